use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use eigenspot::detector::{detect, Method};
use eigenspot::evaluation::{run_study_with, DatasetKey, StudyConfig, StudyTable, SweepSpec, VerdictProvider};
use eigenspot::simulator::{
    generate, BaselineSource, HotspotOrigin, LambdaMode, SimulatedDataset, SimulationConfig,
    DEFAULT_GROWTH_RATE, DEFAULT_SCALE_RANGE,
};
use eigenspot::stats::Tail;
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::matrix_io::{
    align_labels, csv_writer, finish, format_number, read_matrix, to_wide_csv, InputFormat,
    ReadOptions,
};
use crate::report::{sha256_hex, InputDigests, ReportFile};
use crate::verdicts::{dataset_stem, parse_verdicts, verdict_path};

/// Exit status of a detection that reported at least one cell.
pub const EXIT_FOUND: u8 = 0;
/// Exit status of a detection that reported nothing.
pub const EXIT_NONE: u8 = 1;
/// Exit status of any input or runtime error.
pub const EXIT_ERROR: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "eigenspot", version, about = "Spatiotemporal hotspot detection on region x period count matrices")]
pub struct Cli {
    /// Suppress progress messages on stderr.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Detect a hotspot in a cases matrix relative to a baseline matrix.
    ///
    /// Exits 0 when cells are reported, 1 when none are, 2 on error.
    Detect(DetectArgs),
    /// Write a simulated baseline/cases pair with an injected hotspot.
    Simulate(SimulateArgs),
    /// Run the threshold-swept accuracy study over simulated datasets.
    Study(StudyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TailArg {
    Two,
    Left,
    Right,
}

impl From<TailArg> for Tail {
    fn from(t: TailArg) -> Self {
        match t {
            TailArg::Two => Tail::TwoTailed,
            TailArg::Left => Tail::LeftTailed,
            TailArg::Right => Tail::RightTailed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Eigenspot,
    Ratio,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Eigenspot => Method::EigenSpot,
            MethodArg::Ratio => Method::BaselineRatio,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LambdaArg {
    Global,
    PerRegion,
}

impl From<LambdaArg> for LambdaMode {
    fn from(l: LambdaArg) -> Self {
        match l {
            LambdaArg::Global => LambdaMode::Global,
            LambdaArg::PerRegion => LambdaMode::PerRegion,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[arg(long)]
    pub baseline: PathBuf,
    #[arg(long)]
    pub cases: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = TailArg::Two)]
    pub tail: TailArg,
    #[arg(long, value_enum, default_value_t = MethodArg::Eigenspot)]
    pub method: MethodArg,
    /// Report destination; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
    pub format: ReportFormat,
    #[arg(long, value_enum, default_value_t = InputFormat::Auto)]
    pub input_format: InputFormat,
    /// Treat cells absent from a long-format file as zero counts.
    #[arg(long)]
    pub fill_missing_zero: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 32)]
    pub regions: usize,
    #[arg(long, default_value_t = 19)]
    pub periods: usize,
    /// Multiplier applied to the cases inside the hotspot window.
    #[arg(long, default_value_t = 1.0)]
    pub impact: f64,
    /// Side length of the square hotspot window; 0 injects nothing.
    #[arg(long, default_value_t = 0)]
    pub size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Per-period growth rate of the expected case count.
    #[arg(long, default_value_t = DEFAULT_GROWTH_RATE)]
    pub growth: f64,
    /// Top-left cell of the window as 0-based `REGION,PERIOD`, or `random`.
    #[arg(long, default_value = "random")]
    pub origin: String,
    /// Baseline matrix file, or `synthetic`. A file overrides --regions/--periods.
    #[arg(long, default_value = "synthetic")]
    pub baseline: String,
    #[arg(long, value_enum, default_value_t = LambdaArg::Global)]
    pub lambda_mode: LambdaArg,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    /// Hotspot sizes: a range `A..B` (inclusive) or a comma list.
    #[arg(long, default_value = "1..5")]
    pub sizes: String,
    #[arg(long, value_delimiter = ',', default_value = "1.5,2,2.5")]
    pub impacts: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    pub replicates: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Built-in detectors to score; `none` scores only external verdicts.
    #[arg(long, default_value = "eigenspot,ratio")]
    pub methods: String,
    #[arg(long, default_value_t = 1.28)]
    pub z_lo: f64,
    #[arg(long, default_value_t = 3.0)]
    pub z_hi: f64,
    #[arg(long, default_value_t = 0.01)]
    pub z_step: f64,
    #[arg(long, value_enum, default_value_t = TailArg::Two)]
    pub tail: TailArg,
    #[arg(long, default_value_t = 32)]
    pub regions: usize,
    #[arg(long, default_value_t = 19)]
    pub periods: usize,
    #[arg(long, default_value_t = DEFAULT_GROWTH_RATE)]
    pub growth: f64,
    /// Baseline matrix file, or `synthetic`.
    #[arg(long, default_value = "synthetic")]
    pub baseline: String,
    #[arg(long, value_enum, default_value_t = LambdaArg::Global)]
    pub lambda_mode: LambdaArg,
    /// Directory of per-dataset verdict files to score as an extra method.
    #[arg(long)]
    pub external_verdicts: Option<PathBuf>,
    /// Also write every simulated dataset under `<out-dir>/datasets/`.
    #[arg(long)]
    pub export_datasets: bool,
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// Runs a parsed command line and returns the process exit status.
pub fn run(cli: Cli) -> CliResult<u8> {
    let log = Logger { quiet: cli.quiet };
    match cli.command {
        Command::Detect(a) => cmd_detect(&a, &log),
        Command::Simulate(a) => cmd_simulate(&a, &log).map(|()| 0),
        Command::Study(a) => cmd_study(&a, &log).map(|()| 0),
    }
}

struct Logger {
    quiet: bool,
}

impl Logger {
    fn info(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

fn cmd_detect(args: &DetectArgs, log: &Logger) -> CliResult<u8> {
    let opts = ReadOptions {
        format: args.input_format,
        fill_missing_zero: args.fill_missing_zero,
    };
    let baseline = read_matrix(&args.baseline, opts)?;
    let cases = read_matrix(&args.cases, opts)?;
    let aligned = align_labels(&baseline.matrix, &cases.matrix).map_err(|m| CliError::input(&args.cases, m))?;

    let report = detect(
        args.method.into(),
        &baseline.matrix,
        &aligned,
        args.alpha,
        args.tail.into(),
    )?;
    let file = ReportFile::new(
        &report,
        &baseline.matrix,
        InputDigests {
            baseline: sha256_hex(&baseline.bytes),
            cases: sha256_hex(&cases.bytes),
        },
    );
    let body = match args.format {
        ReportFormat::Json => file.to_json(),
        ReportFormat::Csv => file.to_csv(),
    };
    match &args.out {
        Some(path) => write_file(path, body)?,
        None => print!("{body}"),
    }
    log.info(format!(
        "{}: {} cell(s) across {} region(s) x {} period(s) at alpha {}",
        report.method,
        file.cells.len(),
        file.spatial_components.len(),
        file.temporal_components.len(),
        args.alpha
    ));
    Ok(if report.is_empty() { EXIT_NONE } else { EXIT_FOUND })
}

fn parse_origin(text: &str) -> CliResult<HotspotOrigin> {
    if text.eq_ignore_ascii_case("random") {
        return Ok(HotspotOrigin::Random);
    }
    let parsed = text
        .split_once(',')
        .and_then(|(r, t)| Some((r.trim().parse().ok()?, t.trim().parse().ok()?)));
    match parsed {
        Some((region, period)) => Ok(HotspotOrigin::Fixed { region, period }),
        None => Err(CliError::Usage(format!(
            "--origin '{text}': expected REGION,PERIOD (0-based) or 'random'"
        ))),
    }
}

fn parse_baseline(text: &str) -> CliResult<BaselineSource> {
    if text.eq_ignore_ascii_case("synthetic") {
        return Ok(BaselineSource::Synthetic {
            scale_min: DEFAULT_SCALE_RANGE.0,
            scale_max: DEFAULT_SCALE_RANGE.1,
        });
    }
    let loaded = read_matrix(Path::new(text), ReadOptions::default())?;
    Ok(BaselineSource::External(loaded.matrix))
}

#[derive(Serialize)]
struct SimulationMeta<'a> {
    config: &'a SimulationConfig,
    hotspot_origin: Option<(usize, usize)>,
    injected_cells: Vec<(usize, usize)>,
    /// Row-major injection mask, one inner vector per region.
    injection_mask: Vec<Vec<bool>>,
    rng: &'static str,
}

fn write_dataset(dir: &Path, d: &SimulatedDataset) -> CliResult<()> {
    create_dir(dir)?;
    write_file(&dir.join("baseline.csv"), to_wide_csv(&d.baseline))?;
    write_file(&dir.join("cases.csv"), to_wide_csv(&d.cases))?;
    let meta = SimulationMeta {
        config: &d.config,
        hotspot_origin: d.hotspot_origin,
        injected_cells: d.injection_mask.iter_set().collect(),
        injection_mask: d.injection_mask.rows().map(<[bool]>::to_vec).collect(),
        rng: "chacha8, key from splitmix64(seed)",
    };
    let mut json = serde_json::to_string_pretty(&meta)?;
    json.push('\n');
    write_file(&dir.join("meta.json"), json)
}

fn cmd_simulate(args: &SimulateArgs, log: &Logger) -> CliResult<()> {
    let baseline = parse_baseline(&args.baseline)?;
    let (n, m) = match &baseline {
        BaselineSource::External(b) => b.shape(),
        BaselineSource::Synthetic { .. } => (args.regions, args.periods),
    };
    let config = SimulationConfig {
        growth_rate: args.growth,
        baseline,
        lambda_mode: args.lambda_mode.into(),
        ..SimulationConfig::new(n, m, args.seed)
    }
    .with_hotspot(args.size, args.impact)
    .with_origin(parse_origin(&args.origin)?);
    let dataset = generate(&config)?;
    write_dataset(&args.out_dir, &dataset)?;
    log.info(format!(
        "wrote {n}x{m} dataset with {} injected cell(s) to {}",
        dataset.injection_mask.count(),
        args.out_dir.display()
    ));
    Ok(())
}

fn parse_sizes(text: &str) -> CliResult<Vec<usize>> {
    let bad = || CliError::Usage(format!("--sizes '{text}': expected A..B or a comma list"));
    if let Some((a, b)) = text.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    text.split(',')
        .map(|s| s.trim().parse().map_err(|_| bad()))
        .collect()
}

fn parse_methods(text: &str) -> CliResult<Vec<Method>> {
    if text.eq_ignore_ascii_case("none") {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|s| s.trim().parse::<Method>().map_err(|e| CliError::Usage(format!("--methods: {e}"))))
        .collect()
}

fn table_csv(table: &StudyTable) -> CliResult<String> {
    let mut w = csv_writer();
    w.write_record(["method", "impact", "size", "mean_accuracy", "stderr"])?;
    for r in &table.rows {
        w.write_record([
            r.method.to_string(),
            format_number(r.impact),
            r.size.to_string(),
            format_number(r.mean_accuracy),
            format_number(r.stderr),
        ])?;
    }
    Ok(finish(w))
}

/// Replicate-averaged accuracy at every threshold, ready for plotting.
fn sweep_csv(table: &StudyTable) -> CliResult<String> {
    let mut w = csv_writer();
    w.write_record(["method", "impact", "size", "z", "alpha", "mean_accuracy"])?;
    for r in &table.rows {
        for (k, th) in table.thresholds.iter().enumerate() {
            let mean = r.per_alpha.iter().map(|acc| acc[k]).sum::<f64>() / r.per_alpha.len() as f64;
            w.write_record([
                r.method.to_string(),
                format_number(r.impact),
                r.size.to_string(),
                format_number(th.z),
                format_number(th.alpha),
                format_number(mean),
            ])?;
        }
    }
    Ok(finish(w))
}

fn external_provider(dir: PathBuf) -> impl Fn(&DatasetKey, &SimulatedDataset) -> eigenspot::Result<eigenspot::evaluation::VerdictSet> + Sync {
    move |key, dataset| {
        let path = verdict_path(&dir, key.size, key.impact, key.replicate);
        let bytes = fs::read(&path)
            .map_err(|e| eigenspot::Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        parse_verdicts(&bytes, &dataset.baseline)
            .map_err(|m| eigenspot::Error::InvalidConfig(format!("{}: {m}", path.display())))
    }
}

fn cmd_study(args: &StudyArgs, log: &Logger) -> CliResult<()> {
    let sizes = parse_sizes(&args.sizes)?;
    let baseline = parse_baseline(&args.baseline)?;
    let (n, m) = match &baseline {
        BaselineSource::External(b) => b.shape(),
        BaselineSource::Synthetic { .. } => (args.regions, args.periods),
    };
    let config = StudyConfig {
        settings: args
            .impacts
            .iter()
            .flat_map(|&i| sizes.iter().map(move |&h| (h, i)))
            .collect(),
        replicates: args.replicates,
        master_seed: args.seed,
        methods: parse_methods(&args.methods)?,
        spec: SweepSpec {
            z_lo: args.z_lo,
            z_hi: args.z_hi,
            z_step: args.z_step,
            tail: args.tail.into(),
        },
        n_regions: n,
        n_periods: m,
        growth_rate: args.growth,
        baseline,
        lambda_mode: args.lambda_mode.into(),
    };
    log.info(format!(
        "study: {} setting(s) x {} replicate(s), {} threshold(s)",
        config.settings.len(),
        config.replicates,
        config.spec.count()
    ));

    let provider = args.external_verdicts.clone().map(external_provider);
    let table = run_study_with(&config, provider.as_ref().map(|p| p as &VerdictProvider))?;

    create_dir(&args.out_dir)?;
    write_file(&args.out_dir.join("table.csv"), table_csv(&table)?)?;
    write_file(&args.out_dir.join("sweep.csv"), sweep_csv(&table)?)?;
    let mut detail = serde_json::to_string_pretty(&table)?;
    detail.push('\n');
    write_file(&args.out_dir.join("detail.json"), detail)?;

    if args.export_datasets {
        let root = args.out_dir.join("datasets");
        for &(size, impact) in &config.settings {
            for r in 0..config.replicates {
                let d = generate(&config.dataset_config(size, impact, r))?;
                write_dataset(&root.join(dataset_stem(size, impact, r)), &d)?;
            }
        }
        log.info(format!("exported datasets to {}", root.display()));
    }

    for r in &table.rows {
        log.info(format!(
            "{:>9}  I={:<4} H={}  accuracy {:.4} +/- {:.4}",
            r.method.to_string(),
            format_number(r.impact),
            r.size,
            r.mean_accuracy,
            r.stderr
        ));
    }
    Ok(())
}
