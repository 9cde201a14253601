//! Semi-synthetic benchmark data: Poisson case counts over a baseline grid,
//! with an optional `H x H` hotspot window multiplied by an impact factor.
//!
//! # Reproducibility contract
//!
//! All randomness comes from [`SimRng`], a ChaCha8 stream cipher generator
//! keyed by four SplitMix64 outputs of a 64-bit seed. Uniform variates use
//! the top 53 bits of each `u64` output, offset by half an ulp so they lie in
//! the open interval `(0, 1)`. A dataset with seed `s` reads three independent
//! streams, keyed by [`mix64`]`(s, stream_id)`:
//!
//! | stream | id | consumed by |
//! |---|---|---|
//! | baseline | 1 | synthetic region scales, one uniform per region |
//! | cases | 2 | Poisson draws, one call per cell in row-major order |
//! | placement | 3 | random hotspot origin: region then period |
//!
//! Because placement has its own stream, the uninjected counts do not depend
//! on the hotspot size, impact or origin.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::linalg::{CellMask, CountMatrix};

/// Per-period growth applied to the Poisson rate (1.2%).
pub const DEFAULT_GROWTH_RATE: f64 = 0.012;
/// Synthetic region populations are log-uniform over this range.
pub const DEFAULT_SCALE_RANGE: (f64, f64) = (1e3, 1e6);

const BASELINE_STREAM: u64 = 1;
const CASES_STREAM: u64 = 2;
const PLACEMENT_STREAM: u64 = 3;

/// Rates below this use the multiplication method; at or above, PTRS.
const PTRS_THRESHOLD: f64 = 30.0;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function applied to `x + golden gamma`.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Order-sensitive combination of two 64-bit values.
pub fn mix64(a: u64, b: u64) -> u64 {
    splitmix64(a ^ splitmix64(b))
}

/// Seed of replicate `r` in a batch started from `master_seed`.
pub fn replicate_seed(master_seed: u64, replicate: u64) -> u64 {
    mix64(master_seed, replicate.wrapping_add(1))
}

/// Seed of the baseline stream of a dataset with seed `seed`; passing it to
/// [`synthesize_baseline`] reproduces the baseline [`generate`] builds.
pub fn baseline_stream_seed(seed: u64) -> u64 {
    mix64(seed, BASELINE_STREAM)
}

/// The simulator's random source.
#[derive(Debug, Clone)]
pub struct SimRng(ChaCha8Rng);

impl SimRng {
    pub fn new(seed: u64) -> Self {
        let mut key = [0u8; 32];
        let mut state = seed;
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(state).to_le_bytes());
            state = state.wrapping_add(GOLDEN_GAMMA);
        }
        SimRng(ChaCha8Rng::from_seed(key))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform on the open interval `(0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n` (n > 0).
    pub fn below(&mut self, n: usize) -> usize {
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }
}

/// Exact Poisson variate.
///
/// For `lambda < 30` multiplies uniforms until the product drops below
/// `exp(-lambda)`. Larger rates use Hörmann's PTRS transformed rejection with
/// squeeze, which is exact for every `lambda >= 10`.
pub fn sample_poisson(lambda: f64, rng: &mut SimRng) -> Result<u64> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::NonPositiveLambda(lambda));
    }
    if lambda < PTRS_THRESHOLD {
        let limit = (-lambda).exp();
        let mut k = 0u64;
        let mut prod = rng.uniform();
        while prod > limit {
            prod *= rng.uniform();
            k += 1;
        }
        return Ok(k);
    }

    let slam = lambda.sqrt();
    let loglam = lambda.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = rng.uniform() - 0.5;
        let v = rng.uniform();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + lambda + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return Ok(k as u64);
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        let lhs = v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln();
        let rhs = -lambda + k * loglam - ln_gamma(k + 1.0);
        if lhs <= rhs {
            return Ok(k as u64);
        }
    }
}

/// Poisson rate MLE from the first period: the mean of column 0.
pub fn estimate_lambda(baseline: &CountMatrix) -> Result<f64> {
    let first: Vec<f64> = baseline.column(0).collect();
    if !first.iter().any(|&c| c > 0.0) {
        return Err(Error::EmptyFirstPeriod);
    }
    Ok(first.iter().sum::<f64>() / first.len() as f64)
}

/// Default labels `R1..Rn` and `T1..Tm`.
pub fn default_labels(n_regions: usize, n_periods: usize) -> (Vec<String>, Vec<String>) {
    (
        (1..=n_regions).map(|i| format!("R{i}")).collect(),
        (1..=n_periods).map(|t| format!("T{t}")).collect(),
    )
}

/// Synthetic population grid: per-region scales log-uniform over
/// `[1e3, 1e6]`, grown geometrically across periods and rounded.
pub fn synthesize_baseline(
    n_regions: usize,
    n_periods: usize,
    growth_rate: f64,
    seed: u64,
) -> Result<CountMatrix> {
    synthesize_baseline_in(n_regions, n_periods, growth_rate, seed, DEFAULT_SCALE_RANGE)
}

pub fn synthesize_baseline_in(
    n_regions: usize,
    n_periods: usize,
    growth_rate: f64,
    seed: u64,
    (scale_min, scale_max): (f64, f64),
) -> Result<CountMatrix> {
    if n_regions == 0 || n_periods == 0 {
        return Err(Error::EmptyMatrix {
            n_regions,
            n_periods,
        });
    }
    check_growth(growth_rate)?;
    if !(scale_min >= 1.0 && scale_max >= scale_min && scale_max.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "population scale range must satisfy 1 <= min <= max, got [{scale_min}, {scale_max}]"
        )));
    }
    let mut rng = SimRng::new(seed);
    let (lo, hi) = (scale_min.ln(), scale_max.ln());
    let scales: Vec<f64> = (0..n_regions)
        .map(|_| (lo + rng.uniform() * (hi - lo)).exp())
        .collect();
    let growth = growth_factors(growth_rate, n_periods);
    let (regions, periods) = default_labels(n_regions, n_periods);
    CountMatrix::from_fn(n_regions, n_periods, |r, t| (scales[r] * growth[t]).round())?
        .with_labels(regions, periods)
}

fn growth_factors(growth_rate: f64, n_periods: usize) -> Vec<f64> {
    (0..n_periods)
        .map(|t| (1.0 + growth_rate).powi(t as i32))
        .collect()
}

fn check_growth(growth_rate: f64) -> Result<()> {
    if growth_rate > -1.0 && growth_rate.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "growth rate must be finite and > -1, got {growth_rate}"
        )))
    }
}

/// Where the hotspot window's top-left cell sits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HotspotOrigin {
    /// Uniform over all origins whose window fits inside the grid.
    #[default]
    Random,
    Fixed { region: usize, period: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineSource {
    /// Log-uniform region scales over `[scale_min, scale_max]`.
    Synthetic { scale_min: f64, scale_max: f64 },
    External(CountMatrix),
}

impl Default for BaselineSource {
    fn default() -> Self {
        BaselineSource::Synthetic {
            scale_min: DEFAULT_SCALE_RANGE.0,
            scale_max: DEFAULT_SCALE_RANGE.1,
        }
    }
}

/// How the Poisson rate of each cell is derived from the baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaMode {
    /// One rate per period: mean of the first-period baseline, grown.
    #[default]
    Global,
    /// Region `i` uses its own first-period baseline count, grown.
    PerRegion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub n_regions: usize,
    pub n_periods: usize,
    pub growth_rate: f64,
    /// Side length `H` of the injected window; 0 disables injection.
    pub hotspot_size: usize,
    /// Multiplier `I >= 1` applied to counts inside the window.
    pub hotspot_impact: f64,
    pub hotspot_origin: HotspotOrigin,
    pub seed: u64,
    pub baseline: BaselineSource,
    pub lambda_mode: LambdaMode,
}

impl SimulationConfig {
    /// Synthetic baseline, 1.2% growth, no hotspot.
    pub fn new(n_regions: usize, n_periods: usize, seed: u64) -> Self {
        Self {
            n_regions,
            n_periods,
            growth_rate: DEFAULT_GROWTH_RATE,
            hotspot_size: 0,
            hotspot_impact: 1.0,
            hotspot_origin: HotspotOrigin::Random,
            seed,
            baseline: BaselineSource::default(),
            lambda_mode: LambdaMode::Global,
        }
    }

    pub fn with_hotspot(mut self, size: usize, impact: f64) -> Self {
        self.hotspot_size = size;
        self.hotspot_impact = impact;
        self
    }

    pub fn with_origin(mut self, origin: HotspotOrigin) -> Self {
        self.hotspot_origin = origin;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_regions == 0 || self.n_periods == 0 {
            return invalid(format!(
                "grid must be at least 1x1, got {}x{}",
                self.n_regions, self.n_periods
            ));
        }
        check_growth(self.growth_rate)?;
        if !(self.hotspot_impact >= 1.0 && self.hotspot_impact.is_finite()) {
            return invalid(format!(
                "hotspot impact must be finite and >= 1, got {}",
                self.hotspot_impact
            ));
        }
        let h = self.hotspot_size;
        if h > self.n_regions || h > self.n_periods {
            return invalid(format!(
                "hotspot window {h}x{h} does not fit a {}x{} grid",
                self.n_regions, self.n_periods
            ));
        }
        if let HotspotOrigin::Fixed { region, period } = self.hotspot_origin {
            if h > 0 && (region + h > self.n_regions || period + h > self.n_periods) {
                return invalid(format!(
                    "hotspot window {h}x{h} at ({region}, {period}) leaves the {}x{} grid",
                    self.n_regions, self.n_periods
                ));
            }
        }
        match &self.baseline {
            BaselineSource::External(m) if m.shape() != (self.n_regions, self.n_periods) => {
                invalid(format!(
                    "external baseline is {:?}, config grid is {}x{}",
                    m.shape(),
                    self.n_regions,
                    self.n_periods
                ))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedDataset {
    pub baseline: CountMatrix,
    pub cases: CountMatrix,
    pub injection_mask: CellMask,
    /// Top-left cell of the injected window, if any.
    pub hotspot_origin: Option<(usize, usize)>,
    pub config: SimulationConfig,
    /// Case counts before the impact multiplier was applied.
    pub uninjected_cases: CountMatrix,
}

/// Generates one dataset. See the module docs for the stream layout.
pub fn generate(config: &SimulationConfig) -> Result<SimulatedDataset> {
    config.validate()?;
    let (n, m) = (config.n_regions, config.n_periods);

    let baseline = match &config.baseline {
        BaselineSource::Synthetic {
            scale_min,
            scale_max,
        } => synthesize_baseline_in(
            n,
            m,
            config.growth_rate,
            baseline_stream_seed(config.seed),
            (*scale_min, *scale_max),
        )?,
        BaselineSource::External(matrix) => matrix.clone(),
    };

    let growth = growth_factors(config.growth_rate, m);
    let rates: Vec<f64> = match config.lambda_mode {
        LambdaMode::Global => {
            let lambda = estimate_lambda(&baseline)?;
            (0..n).flat_map(|_| growth.iter().map(move |g| lambda * g)).collect()
        }
        LambdaMode::PerRegion => {
            let first: Vec<f64> = baseline.column(0).collect();
            first
                .iter()
                .flat_map(|&b| growth.iter().map(move |g| b * g))
                .collect()
        }
    };

    let mut rng = SimRng::new(mix64(config.seed, CASES_STREAM));
    let mut draws = Vec::with_capacity(n * m);
    for &rate in &rates {
        let k = if rate == 0.0 {
            0
        } else {
            sample_poisson(rate, &mut rng)?
        };
        draws.push(k as f64);
    }

    let (region_labels, period_labels) = match (baseline.region_labels(), baseline.period_labels()) {
        (Some(r), Some(p)) => (r.to_vec(), p.to_vec()),
        _ => default_labels(n, m),
    };
    let uninjected_cases = CountMatrix::new(n, m, draws.clone())?
        .with_labels(region_labels.clone(), period_labels.clone())?;

    let h = config.hotspot_size;
    let mut mask = CellMask::empty(n, m);
    let origin = if h == 0 {
        None
    } else {
        let (r0, t0) = match config.hotspot_origin {
            HotspotOrigin::Fixed { region, period } => (region, period),
            HotspotOrigin::Random => {
                let mut place = SimRng::new(mix64(config.seed, PLACEMENT_STREAM));
                let r0 = place.below(n - h + 1);
                let t0 = place.below(m - h + 1);
                (r0, t0)
            }
        };
        for r in r0..r0 + h {
            for t in t0..t0 + h {
                mask.set(r, t, true);
                // f64::round rounds half away from zero.
                draws[r * m + t] = (draws[r * m + t] * config.hotspot_impact).round();
            }
        }
        Some((r0, t0))
    };

    let cases = CountMatrix::new(n, m, draws)?.with_labels(region_labels, period_labels)?;
    Ok(SimulatedDataset {
        baseline,
        cases,
        injection_mask: mask,
        hotspot_origin: origin,
        config: config.clone(),
        uninjected_cases,
    })
}
