//! Threshold-swept accuracy evaluation against injected hotspots.
//!
//! Every cell of the grid is a binary classification (hotspot or not). For a
//! grid of z thresholds `z_lo, z_lo + step, ..., z_hi` the corresponding
//! two-tailed significance levels are fed to the detector and the per-cell
//! accuracy is recorded. A dataset's score is the mean accuracy over the
//! sweep; a setting's score is the mean of those over replicates.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::{Analysis, HotspotReport, Method};
use crate::error::{Error, Result};
use crate::linalg::CellMask;
use crate::simulator::{
    generate, replicate_seed, BaselineSource, HotspotOrigin, LambdaMode, SimulatedDataset,
    SimulationConfig, DEFAULT_GROWTH_RATE,
};
use crate::stats::{normal_p_value, Tail};

/// Grid of z thresholds swept during evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub z_lo: f64,
    pub z_hi: f64,
    pub z_step: f64,
    /// Tail the detector tests against. Threshold alphas are always two-tailed.
    pub tail: Tail,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            z_lo: 1.28,
            z_hi: 3.00,
            z_step: 0.01,
            tail: Tail::TwoTailed,
        }
    }
}

/// One point of the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub z: f64,
    pub alpha: f64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = self.z_lo.is_finite()
            && self.z_hi.is_finite()
            && self.z_step.is_finite()
            && self.z_lo < self.z_hi
            && self.z_step > 0.0
            && self.z_lo >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "sweep needs 0 <= z_lo < z_hi and z_step > 0, got {}..{} step {}",
                self.z_lo, self.z_hi, self.z_step
            )))
        }
    }

    /// `floor((z_hi - z_lo) / z_step) + 1`, robust to the step not being
    /// exactly representable.
    pub fn count(&self) -> usize {
        ((self.z_hi - self.z_lo) / self.z_step + 1e-9).floor() as usize + 1
    }

    pub fn thresholds(&self) -> Result<Vec<Threshold>> {
        self.validate()?;
        (0..self.count())
            .map(|k| {
                let z = self.z_lo + k as f64 * self.z_step;
                let alpha = normal_p_value(z, Tail::TwoTailed)?;
                if !(alpha > 0.0 && alpha < 1.0) {
                    return Err(Error::InvalidAlpha(alpha));
                }
                Ok(Threshold { z, alpha })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub true_pos: usize,
    pub false_pos: usize,
    pub true_neg: usize,
    pub false_neg: usize,
}

impl Confusion {
    pub fn between(predicted: &CellMask, truth: &CellMask) -> Result<Self> {
        if predicted.shape() != truth.shape() {
            return Err(Error::ShapeMismatch {
                baseline: truth.shape(),
                cases: predicted.shape(),
            });
        }
        let mut c = Confusion::default();
        for (&p, &t) in predicted.as_slice().iter().zip(truth.as_slice()) {
            match (p, t) {
                (true, true) => c.true_pos += 1,
                (true, false) => c.false_pos += 1,
                (false, false) => c.true_neg += 1,
                (false, true) => c.false_neg += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.true_pos + self.false_pos + self.true_neg + self.false_neg
    }

    pub fn accuracy(&self) -> f64 {
        (self.true_pos + self.true_neg) as f64 / self.total() as f64
    }

    pub fn recall(&self) -> Option<f64> {
        let positives = self.true_pos + self.false_neg;
        (positives > 0).then(|| self.true_pos as f64 / positives as f64)
    }
}

/// Fraction of cells whose reported/not-reported status matches `mask`.
pub fn accuracy(report: &HotspotReport, mask: &CellMask) -> Result<f64> {
    Ok(Confusion::between(&report.cell_mask(), mask)?.accuracy())
}

/// What produced a set of verdicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoredMethod {
    #[serde(rename = "eigenspot")]
    EigenSpot,
    #[serde(rename = "ratio")]
    BaselineRatio,
    /// Per-cell verdicts supplied from outside, e.g. a scan-statistic tool.
    External,
}

impl From<Method> for ScoredMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::EigenSpot => ScoredMethod::EigenSpot,
            Method::BaselineRatio => ScoredMethod::BaselineRatio,
        }
    }
}

impl fmt::Display for ScoredMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScoredMethod::EigenSpot => "eigenspot",
            ScoredMethod::BaselineRatio => "ratio",
            ScoredMethod::External => "external",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub z: f64,
    pub alpha: f64,
    pub accuracy: f64,
    pub confusion: Confusion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub method: ScoredMethod,
    pub points: Vec<SweepPoint>,
    pub mean_accuracy: f64,
}

impl EvaluationReport {
    fn from_masks(
        method: ScoredMethod,
        thresholds: &[Threshold],
        mut predicted: impl FnMut(usize, f64) -> CellMask,
        truth: &CellMask,
    ) -> Result<Self> {
        let points = thresholds
            .iter()
            .enumerate()
            .map(|(k, th)| {
                let confusion = Confusion::between(&predicted(k, th.alpha), truth)?;
                Ok(SweepPoint {
                    z: th.z,
                    alpha: th.alpha,
                    accuracy: confusion.accuracy(),
                    confusion,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mean_accuracy =
            points.iter().map(|p| p.accuracy).sum::<f64>() / points.len() as f64;
        Ok(Self {
            method,
            points,
            mean_accuracy,
        })
    }
}

/// Accuracy of `method` at every threshold of `spec`, plus their mean.
pub fn alpha_sweep(
    baseline: &crate::linalg::CountMatrix,
    cases: &crate::linalg::CountMatrix,
    mask: &CellMask,
    method: Method,
    spec: &SweepSpec,
) -> Result<EvaluationReport> {
    let thresholds = spec.thresholds()?;
    let analysis = Analysis::new(method, baseline, cases, spec.tail)?;
    if analysis.shape() != mask.shape() {
        return Err(Error::ShapeMismatch {
            baseline: baseline.shape(),
            cases: mask.shape(),
        });
    }
    EvaluationReport::from_masks(
        method.into(),
        &thresholds,
        |_, alpha| analysis.flagged_mask(alpha),
        mask,
    )
}

/// Externally produced per-cell verdicts for one dataset: either a single
/// mask used at every threshold, or one mask per threshold in sweep order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictSet {
    masks: Vec<CellMask>,
}

impl VerdictSet {
    pub fn constant(mask: CellMask) -> Self {
        Self { masks: vec![mask] }
    }

    pub fn per_threshold(masks: Vec<CellMask>) -> Result<Self> {
        let Some(first) = masks.first() else {
            return Err(Error::InvalidConfig("verdict set has no masks".into()));
        };
        if masks.iter().any(|m| m.shape() != first.shape()) {
            return Err(Error::InvalidConfig("verdict masks differ in shape".into()));
        }
        Ok(Self { masks })
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.masks[0].shape()
    }

    fn mask_at(&self, k: usize) -> &CellMask {
        if self.masks.len() == 1 {
            &self.masks[0]
        } else {
            &self.masks[k]
        }
    }
}

/// Scores external verdicts exactly the way [`alpha_sweep`] scores a detector.
pub fn score_verdicts(
    verdicts: &VerdictSet,
    mask: &CellMask,
    spec: &SweepSpec,
) -> Result<EvaluationReport> {
    let thresholds = spec.thresholds()?;
    if verdicts.len() != 1 && verdicts.len() != thresholds.len() {
        return Err(Error::InvalidConfig(format!(
            "verdict set has {} masks; expected 1 or {}",
            verdicts.len(),
            thresholds.len()
        )));
    }
    EvaluationReport::from_masks(
        ScoredMethod::External,
        &thresholds,
        |k, _| verdicts.mask_at(k).clone(),
        mask,
    )
}

/// Identifies one simulated dataset within a study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetKey {
    pub size: usize,
    pub impact: f64,
    pub replicate: usize,
    pub seed: u64,
}

/// Supplies external verdicts for a dataset of a study.
pub type VerdictProvider = dyn Fn(&DatasetKey, &SimulatedDataset) -> Result<VerdictSet> + Sync;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    /// `(hotspot size H, impact I)` pairs, evaluated in order.
    pub settings: Vec<(usize, f64)>,
    pub replicates: usize,
    pub master_seed: u64,
    pub methods: Vec<Method>,
    pub spec: SweepSpec,
    pub n_regions: usize,
    pub n_periods: usize,
    pub growth_rate: f64,
    pub baseline: BaselineSource,
    pub lambda_mode: LambdaMode,
}

impl StudyConfig {
    /// Sizes 1..=5 crossed with impacts 1.5, 2.0, 2.5 on a 32 x 19 grid,
    /// 100 replicates, both detectors.
    pub fn table_one(master_seed: u64) -> Self {
        let settings = [1.5, 2.0, 2.5]
            .into_iter()
            .flat_map(|i| (1..=5).map(move |h| (h, i)))
            .collect();
        Self {
            settings,
            replicates: 100,
            master_seed,
            methods: vec![Method::EigenSpot, Method::BaselineRatio],
            spec: SweepSpec::default(),
            n_regions: 32,
            n_periods: 19,
            growth_rate: DEFAULT_GROWTH_RATE,
            baseline: BaselineSource::default(),
            lambda_mode: LambdaMode::Global,
        }
    }

    /// Simulation config of replicate `replicate` in setting `(size, impact)`.
    /// Replicate seeds do not depend on the setting.
    pub fn dataset_config(&self, size: usize, impact: f64, replicate: usize) -> SimulationConfig {
        SimulationConfig {
            n_regions: self.n_regions,
            n_periods: self.n_periods,
            growth_rate: self.growth_rate,
            hotspot_size: size,
            hotspot_impact: impact,
            hotspot_origin: HotspotOrigin::Random,
            seed: replicate_seed(self.master_seed, replicate as u64),
            baseline: self.baseline.clone(),
            lambda_mode: self.lambda_mode,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub method: ScoredMethod,
    pub impact: f64,
    pub size: usize,
    /// Grand mean: over thresholds within a replicate, then over replicates.
    pub mean_accuracy: f64,
    /// Standard error of the replicate means.
    pub stderr: f64,
    /// Sweep-mean accuracy of each replicate, in replicate order.
    pub per_replicate: Vec<f64>,
    /// `per_alpha[r][k]`: accuracy of replicate `r` at threshold `k`.
    pub per_alpha: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyTable {
    pub config: StudyConfig,
    pub thresholds: Vec<Threshold>,
    pub rows: Vec<StudyRow>,
}

impl StudyTable {
    pub fn row(&self, method: ScoredMethod, size: usize, impact: f64) -> Option<&StudyRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.size == size && r.impact == impact)
    }
}

/// Runs every setting x method over `replicates` simulated datasets.
pub fn run_study(config: &StudyConfig) -> Result<StudyTable> {
    run_study_with(config, None)
}

/// [`run_study`], additionally scoring external verdicts for every dataset.
pub fn run_study_with(
    config: &StudyConfig,
    external: Option<&VerdictProvider>,
) -> Result<StudyTable> {
    if config.replicates == 0 {
        return Err(Error::InvalidConfig("replicates must be >= 1".into()));
    }
    if config.methods.is_empty() && external.is_none() {
        return Err(Error::InvalidConfig("no methods to evaluate".into()));
    }
    let thresholds = config.spec.thresholds()?;

    let mut rows = Vec::new();
    for &(size, impact) in &config.settings {
        // Each replicate yields one report per method (detectors first, then external).
        let outcomes: Vec<Vec<EvaluationReport>> = (0..config.replicates)
            .into_par_iter()
            .map(|r| {
                let cfg = config.dataset_config(size, impact, r);
                let data = generate(&cfg)?;
                let mut reports = config
                    .methods
                    .iter()
                    .map(|&m| {
                        alpha_sweep(&data.baseline, &data.cases, &data.injection_mask, m, &config.spec)
                    })
                    .collect::<Result<Vec<_>>>()?;
                if let Some(provider) = external {
                    let key = DatasetKey {
                        size,
                        impact,
                        replicate: r,
                        seed: cfg.seed,
                    };
                    let verdicts = provider(&key, &data)?;
                    reports.push(score_verdicts(&verdicts, &data.injection_mask, &config.spec)?);
                }
                Ok(reports)
            })
            .collect::<Result<Vec<_>>>()?;

        let n_methods = outcomes[0].len();
        for j in 0..n_methods {
            let per_replicate: Vec<f64> = outcomes.iter().map(|o| o[j].mean_accuracy).collect();
            let per_alpha: Vec<Vec<f64>> = outcomes
                .iter()
                .map(|o| o[j].points.iter().map(|p| p.accuracy).collect())
                .collect();
            let (mean, stderr) = mean_and_stderr(&per_replicate);
            rows.push(StudyRow {
                method: outcomes[0][j].method,
                impact,
                size,
                mean_accuracy: mean,
                stderr,
                per_replicate,
                per_alpha,
            });
        }
    }
    Ok(StudyTable {
        config: config.clone(),
        thresholds,
        rows,
    })
}

fn mean_and_stderr(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (mean, 0.0);
    }
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::detect;
    use crate::linalg::CountMatrix;

    #[test]
    fn default_sweep_has_173_thresholds() {
        let th = SweepSpec::default().thresholds().unwrap();
        assert_eq!(th.len(), 173);
        assert!((th[0].alpha - 0.2005).abs() < 5e-4);
        assert!((th[172].alpha - 0.0027).abs() < 5e-4);
        assert!((th[172].z - 3.0).abs() < 1e-12);
        assert!(th.windows(2).all(|w| w[1].alpha < w[0].alpha));
    }

    #[test]
    fn coarse_step_gives_18_thresholds() {
        let spec = SweepSpec {
            z_step: 0.1,
            ..SweepSpec::default()
        };
        assert_eq!(spec.count(), 18);
    }

    #[test]
    fn sweep_spec_validation() {
        let bad = SweepSpec {
            z_lo: 3.0,
            z_hi: 1.0,
            ..SweepSpec::default()
        };
        assert!(bad.thresholds().is_err());
        let bad = SweepSpec {
            z_step: 0.0,
            ..SweepSpec::default()
        };
        assert!(bad.thresholds().is_err());
    }

    fn report_with(cells: &[(usize, usize)], n: usize, m: usize) -> HotspotReport {
        // Build a real report and overwrite its cells.
        let b = CountMatrix::new(n, m, vec![1.0; n * m]).unwrap();
        let mut r = detect(Method::BaselineRatio, &b, &b, 0.05, Tail::TwoTailed).unwrap();
        r.cells = cells
            .iter()
            .map(|&(region, period)| crate::detector::CellScore {
                region,
                period,
                score: 0.0,
            })
            .collect();
        r
    }

    #[test]
    fn accuracy_examples() {
        let mask = CellMask::from_cells(4, 5, [(1, 1), (1, 2), (2, 1)]);
        let exact: Vec<_> = mask.iter_set().collect();
        assert_eq!(accuracy(&report_with(&exact, 4, 5), &mask), Ok(1.0));
        assert_eq!(accuracy(&report_with(&[], 4, 5), &mask), Ok(17.0 / 20.0));
        let wrong: Vec<_> = mask.complement().iter_set().collect();
        assert_eq!(accuracy(&report_with(&wrong, 4, 5), &mask), Ok(0.0));
        assert!(matches!(
            accuracy(&report_with(&[], 5, 4), &mask),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn null_detection_scores_negative_rate() {
        let b = CountMatrix::from_fn(6, 5, |r, t| (10 + r * 3 + t) as f64).unwrap();
        let mask = CellMask::from_cells(6, 5, [(0, 0), (0, 1), (1, 0), (1, 1)]);
        for method in [Method::EigenSpot, Method::BaselineRatio] {
            let rep = alpha_sweep(&b, &b, &mask, method, &SweepSpec::default()).unwrap();
            assert_eq!(rep.points.len(), 173);
            assert!(rep.points.iter().all(|p| p.accuracy == 26.0 / 30.0));
        }
    }

    #[test]
    fn sweep_matches_per_alpha_detection() {
        let cfg = SimulationConfig::new(10, 8, 4).with_hotspot(2, 2.5);
        let d = generate(&cfg).unwrap();
        let spec = SweepSpec {
            z_step: 0.25,
            ..SweepSpec::default()
        };
        for method in [Method::EigenSpot, Method::BaselineRatio] {
            let rep = alpha_sweep(&d.baseline, &d.cases, &d.injection_mask, method, &spec).unwrap();
            for p in &rep.points {
                let r = detect(method, &d.baseline, &d.cases, p.alpha, Tail::TwoTailed).unwrap();
                assert_eq!(p.accuracy, accuracy(&r, &d.injection_mask).unwrap());
            }
            let lo = rep.points.iter().map(|p| p.accuracy).fold(1.0, f64::min);
            let hi = rep.points.iter().map(|p| p.accuracy).fold(0.0, f64::max);
            assert!(lo <= rep.mean_accuracy && rep.mean_accuracy <= hi);
        }
    }

    #[test]
    fn sweep_is_deterministic() {
        let cfg = SimulationConfig::new(32, 19, 99).with_hotspot(3, 2.5);
        let run = || {
            let d = generate(&cfg).unwrap();
            alpha_sweep(&d.baseline, &d.cases, &d.injection_mask, Method::EigenSpot, &SweepSpec::default())
                .unwrap()
                .mean_accuracy
        };
        assert_eq!(run().to_bits(), run().to_bits());
    }

    #[test]
    fn perfect_verdicts_score_one() {
        let mask = CellMask::from_cells(5, 4, [(2, 2)]);
        let rep = score_verdicts(&VerdictSet::constant(mask.clone()), &mask, &SweepSpec::default())
            .unwrap();
        assert!(rep.points.iter().all(|p| p.accuracy == 1.0));
        let wrong_len = VerdictSet::per_threshold(vec![mask.clone(), mask.clone()]).unwrap();
        assert!(score_verdicts(&wrong_len, &mask, &SweepSpec::default()).is_err());
    }

    #[test]
    fn tiny_study_is_a_function_of_the_seed() {
        let cfg = StudyConfig {
            settings: vec![(2, 2.0), (3, 2.5)],
            replicates: 3,
            ..StudyConfig::table_one(7)
        };
        let a = run_study(&cfg).unwrap();
        let b = run_study(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), 4);
        assert_eq!(a.rows[0].per_alpha.len(), 3);
        assert_eq!(a.rows[0].per_alpha[0].len(), 173);
        let c = run_study(&StudyConfig {
            master_seed: 8,
            ..cfg
        })
        .unwrap();
        assert_ne!(a.rows[0].per_replicate, c.rows[0].per_replicate);
    }

    #[test]
    fn table_one_layout() {
        let cfg = StudyConfig::table_one(1);
        assert_eq!(cfg.settings.len(), 15);
        assert_eq!(cfg.settings[0], (1, 1.5));
        assert_eq!(cfg.settings[14], (5, 2.5));
    }
}
