//! Count-matrix CSV encodings.
//!
//! * **wide**: the header row holds a corner cell followed by period labels;
//!   every following row is a region label followed by one count per period.
//! * **long**: a `region,period,count` header followed by one row per cell,
//!   in any order. Every region x period cell must appear exactly once unless
//!   missing cells are explicitly zero-filled. Regions and periods are
//!   indexed in order of first appearance.
//!
//! Numbers are written in their shortest round-trip decimal form (`1000`,
//! `2.5`, `0.1`), so reading and re-writing a canonical file is byte-stable.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use clap::ValueEnum;
use eigenspot::linalg::CountMatrix;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum InputFormat {
    /// Long when the header is exactly `region,period,count`, wide otherwise.
    #[default]
    Auto,
    Wide,
    Long,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ReadOptions {
    pub format: InputFormat,
    pub fill_missing_zero: bool,
}

/// A parsed matrix together with the raw bytes it came from.
#[derive(Debug, Clone)]
pub struct LoadedMatrix {
    pub matrix: CountMatrix,
    pub bytes: Vec<u8>,
}

/// Canonical text form of a number: shortest round-trip decimal, `-0` as `0`.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else {
        x.to_string()
    }
}

pub fn read_matrix(path: &Path, opts: ReadOptions) -> CliResult<LoadedMatrix> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let matrix = parse_matrix(&bytes, opts).map_err(|m| CliError::input(path, m))?;
    Ok(LoadedMatrix { matrix, bytes })
}

pub fn parse_matrix(bytes: &[u8], opts: ReadOptions) -> Result<CountMatrix, String> {
    let records = read_records(bytes)?;
    let Some(header) = records.first() else {
        return Err("file is empty".into());
    };
    let looks_long = header.len() == 3
        && header
            .iter()
            .map(|s| s.to_ascii_lowercase())
            .eq(["region", "period", "count"]);
    match opts.format {
        InputFormat::Long => parse_long(&records, opts.fill_missing_zero),
        InputFormat::Wide => parse_wide(&records),
        InputFormat::Auto if looks_long => parse_long(&records, opts.fill_missing_zero),
        InputFormat::Auto => parse_wide(&records),
    }
}

fn read_records(bytes: &[u8]) -> Result<Vec<Vec<String>>, String> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        out.push(rec.iter().map(str::to_string).collect());
    }
    Ok(out)
}

fn parse_count(text: &str, line: usize, what: &str) -> Result<f64, String> {
    let v: f64 = text
        .parse()
        .map_err(|_| format!("line {line}: {what}: '{text}' is not a number"))?;
    if !v.is_finite() || v < 0.0 {
        return Err(format!(
            "line {line}: {what}: count {text} must be finite and nonnegative"
        ));
    }
    Ok(v)
}

fn check_unique(labels: &[String], axis: &str) -> Result<(), String> {
    let mut seen = HashMap::new();
    for (i, l) in labels.iter().enumerate() {
        if l.is_empty() {
            return Err(format!("{axis} label {} is empty", i + 1));
        }
        if let Some(j) = seen.insert(l.as_str(), i) {
            return Err(format!(
                "{axis} label '{l}' appears twice (positions {} and {})",
                j + 1,
                i + 1
            ));
        }
    }
    Ok(())
}

fn parse_wide(records: &[Vec<String>]) -> Result<CountMatrix, String> {
    let header = &records[0];
    let periods: Vec<String> = header[1..].to_vec();
    if periods.is_empty() {
        return Err("wide header has no period columns".into());
    }
    check_unique(&periods, "period")?;
    let mut regions = Vec::new();
    let mut values = Vec::new();
    for (k, rec) in records[1..].iter().enumerate() {
        let line = k + 2;
        if rec.len() != periods.len() + 1 {
            return Err(format!(
                "line {line}: expected {} fields, found {}",
                periods.len() + 1,
                rec.len()
            ));
        }
        regions.push(rec[0].clone());
        for (p, text) in periods.iter().zip(&rec[1..]) {
            values.push(parse_count(text, line, &format!("region '{}', period '{p}'", rec[0]))?);
        }
    }
    if regions.is_empty() {
        return Err("no region rows".into());
    }
    check_unique(&regions, "region")?;
    build(regions, periods, values)
}

fn parse_long(records: &[Vec<String>], fill_missing_zero: bool) -> Result<CountMatrix, String> {
    let mut regions: Vec<String> = Vec::new();
    let mut periods: Vec<String> = Vec::new();
    let mut region_ix: HashMap<String, usize> = HashMap::new();
    let mut period_ix: HashMap<String, usize> = HashMap::new();
    let mut cells: HashMap<(usize, usize), (f64, usize)> = HashMap::new();

    for (k, rec) in records[1..].iter().enumerate() {
        let line = k + 2;
        if rec.len() != 3 {
            return Err(format!("line {line}: expected 3 fields, found {}", rec.len()));
        }
        let (r, p) = (&rec[0], &rec[1]);
        if r.is_empty() || p.is_empty() {
            return Err(format!("line {line}: empty region or period label"));
        }
        let ri = *region_ix.entry(r.clone()).or_insert_with(|| {
            regions.push(r.clone());
            regions.len() - 1
        });
        let pi = *period_ix.entry(p.clone()).or_insert_with(|| {
            periods.push(p.clone());
            periods.len() - 1
        });
        let v = parse_count(&rec[2], line, &format!("region '{r}', period '{p}'"))?;
        if let Some((_, first)) = cells.insert((ri, pi), (v, line)) {
            return Err(format!(
                "duplicate cell (region '{r}', period '{p}') on lines {first} and {line}"
            ));
        }
    }
    if cells.is_empty() {
        return Err("no data rows".into());
    }

    let (n, m) = (regions.len(), periods.len());
    let mut values = vec![0.0; n * m];
    let mut missing = Vec::new();
    for i in 0..n {
        for j in 0..m {
            match cells.get(&(i, j)) {
                Some(&(v, _)) => values[i * m + j] = v,
                None => missing.push((i, j)),
            }
        }
    }
    if !missing.is_empty() && !fill_missing_zero {
        let (i, j) = missing[0];
        return Err(format!(
            "{} of {} cells missing, first: (region '{}', period '{}'); pass --fill-missing-zero to treat them as 0",
            missing.len(),
            n * m,
            regions[i],
            periods[j]
        ));
    }
    build(regions, periods, values)
}

fn build(regions: Vec<String>, periods: Vec<String>, values: Vec<f64>) -> Result<CountMatrix, String> {
    CountMatrix::new(regions.len(), periods.len(), values)
        .and_then(|m| m.with_labels(regions, periods))
        .map_err(|e| e.to_string())
}

/// Reorders `cases` so its labels line up with `baseline`. Both must carry
/// the same label sets.
pub fn align_labels(baseline: &CountMatrix, cases: &CountMatrix) -> Result<CountMatrix, String> {
    if baseline.shape() != cases.shape() {
        return Err(format!(
            "baseline is {}x{} but cases is {}x{}",
            baseline.n_regions(),
            baseline.n_periods(),
            cases.n_regions(),
            cases.n_periods()
        ));
    }
    let (Some(br), Some(bp), Some(cr), Some(cp)) = (
        baseline.region_labels(),
        baseline.period_labels(),
        cases.region_labels(),
        cases.period_labels(),
    ) else {
        return Ok(cases.clone());
    };
    let lookup = |wanted: &[String], have: &[String], axis: &str| -> Result<Vec<usize>, String> {
        let index: HashMap<&str, usize> = have.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
        wanted
            .iter()
            .map(|l| {
                index
                    .get(l.as_str())
                    .copied()
                    .ok_or_else(|| format!("{axis} '{l}' is in the baseline but not in the cases"))
            })
            .collect()
    };
    let rp = lookup(br, cr, "region")?;
    let tp = lookup(bp, cp, "period")?;
    Ok(cases.permute_regions(&rp).permute_periods(&tp))
}

/// Wide encoding of `matrix`. Unlabelled axes use `R1..` / `T1..`.
pub fn to_wide_csv(matrix: &CountMatrix) -> String {
    let mut w = csv_writer();
    let mut header = vec!["region".to_string()];
    header.extend((0..matrix.n_periods()).map(|j| period_label(matrix, j)));
    w.write_record(&header).expect("in-memory write");
    for i in 0..matrix.n_regions() {
        let mut rec = vec![region_label(matrix, i)];
        rec.extend(matrix.row(i).iter().map(|&v| format_number(v)));
        w.write_record(&rec).expect("in-memory write");
    }
    finish(w)
}

/// Long encoding of `matrix`, row-major cell order.
pub fn to_long_csv(matrix: &CountMatrix) -> String {
    let mut w = csv_writer();
    w.write_record(["region", "period", "count"]).expect("in-memory write");
    for i in 0..matrix.n_regions() {
        for j in 0..matrix.n_periods() {
            w.write_record([
                region_label(matrix, i),
                period_label(matrix, j),
                format_number(matrix.get(i, j)),
            ])
            .expect("in-memory write");
        }
    }
    finish(w)
}

pub fn region_label(matrix: &CountMatrix, i: usize) -> String {
    matrix
        .region_labels()
        .map_or_else(|| format!("R{}", i + 1), |l| l[i].clone())
}

pub fn period_label(matrix: &CountMatrix, j: usize) -> String {
    matrix
        .period_labels()
        .map_or_else(|| format!("T{}", j + 1), |l| l[j].clone())
}

pub(crate) fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

pub(crate) fn finish(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}
