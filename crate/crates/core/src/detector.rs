//! Hotspot detectors: EigenSpot and the per-cell ratio comparator.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{rank1_svd, CellMask, CountMatrix, SingularPair, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::stats::{control_chart, standardize, normal_p_value, ControlChartResult, Tail};

/// Detection method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Singular-vector deviations on a z-score chart, `n + m` comparisons.
    #[serde(rename = "eigenspot")]
    EigenSpot,
    /// z-scores of the `n * m` cell ratios `cases / baseline`.
    #[serde(rename = "ratio")]
    BaselineRatio,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::EigenSpot => "eigenspot",
            Method::BaselineRatio => "ratio",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "eigenspot" => Ok(Method::EigenSpot),
            "ratio" | "baseline" | "baseline_ratio" => Ok(Method::BaselineRatio),
            other => Err(format!("unknown method '{other}' (expected eigenspot or ratio)")),
        }
    }
}

/// A reported cell with the smallest significance level at which it would
/// still be reported.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellScore {
    pub region: usize,
    pub period: usize,
    pub score: f64,
}

/// Per-method evidence behind a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum Diagnostics {
    #[serde(rename = "eigenspot")]
    EigenSpot {
        spatial: ControlChartResult,
        temporal: ControlChartResult,
        baseline: SingularPair,
        cases: SingularPair,
    },
    #[serde(rename = "ratio")]
    BaselineRatio {
        /// Row-major `cases / baseline`.
        ratios: Vec<f64>,
        z_scores: Vec<f64>,
        p_values: Vec<f64>,
        degenerate: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HotspotReport {
    pub method: Method,
    pub alpha: f64,
    pub tail: Tail,
    pub n_regions: usize,
    pub n_periods: usize,
    /// Flagged regions. For the ratio method, the regions of flagged cells.
    pub spatial_components: Vec<usize>,
    /// Flagged periods. For the ratio method, the periods of flagged cells.
    pub temporal_components: Vec<usize>,
    /// Reported cells in row-major order.
    pub cells: Vec<CellScore>,
    pub diagnostics: Diagnostics,
}

impl HotspotReport {
    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_regions, self.n_periods)
    }

    pub fn cell_mask(&self) -> CellMask {
        CellMask::from_cells(
            self.n_regions,
            self.n_periods,
            self.cells.iter().map(|c| (c.region, c.period)),
        )
    }

    /// Number of element-level significance comparisons the method made:
    /// `n + m` for EigenSpot, `n * m` for the ratio method.
    pub fn comparison_count(&self) -> usize {
        match &self.diagnostics {
            Diagnostics::EigenSpot {
                spatial, temporal, ..
            } => spatial.p_values.len() + temporal.p_values.len(),
            Diagnostics::BaselineRatio { p_values, .. } => p_values.len(),
        }
    }
}

/// Detector state that does not depend on the significance level, so a
/// threshold sweep can re-use one decomposition for every alpha.
#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Analysis {
    EigenSpot {
        spatial: ControlChartResult,
        temporal: ControlChartResult,
        baseline: SingularPair,
        cases: SingularPair,
    },
    BaselineRatio {
        n_regions: usize,
        n_periods: usize,
        tail: Tail,
        ratios: Vec<f64>,
        z_scores: Vec<f64>,
        p_values: Vec<f64>,
        degenerate: bool,
    },
}

fn check_shapes(baseline: &CountMatrix, cases: &CountMatrix) -> Result<()> {
    if baseline.shape() != cases.shape() {
        return Err(Error::ShapeMismatch {
            baseline: baseline.shape(),
            cases: cases.shape(),
        });
    }
    Ok(())
}

// Placeholder level for charts built ahead of thresholding.
const UNTHRESHOLDED: f64 = 0.5;

impl Analysis {
    pub fn new(method: Method, baseline: &CountMatrix, cases: &CountMatrix, tail: Tail) -> Result<Self> {
        match method {
            Method::EigenSpot => Self::eigenspot(baseline, cases, tail),
            Method::BaselineRatio => Self::baseline_ratio(baseline, cases, tail),
        }
    }

    /// Rank-1 SVD of both matrices, then `ds = sc - sb` and `dt = tc - tb`
    /// each standardized on a control chart.
    pub fn eigenspot(baseline: &CountMatrix, cases: &CountMatrix, tail: Tail) -> Result<Self> {
        check_shapes(baseline, cases)?;
        let b = rank1_svd(baseline, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
        let c = rank1_svd(cases, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
        let ds: Vec<f64> = c.spatial.iter().zip(&b.spatial).map(|(x, y)| x - y).collect();
        let dt: Vec<f64> = c.temporal.iter().zip(&b.temporal).map(|(x, y)| x - y).collect();
        Ok(Analysis::EigenSpot {
            spatial: control_chart(&ds, UNTHRESHOLDED, tail)?,
            temporal: control_chart(&dt, UNTHRESHOLDED, tail)?,
            baseline: b,
            cases: c,
        })
    }

    /// Ratios `c_ij / b_ij` standardized once over the whole grid.
    pub fn baseline_ratio(baseline: &CountMatrix, cases: &CountMatrix, tail: Tail) -> Result<Self> {
        check_shapes(baseline, cases)?;
        let (n, m) = baseline.shape();
        if let Some(idx) = baseline.values().iter().position(|&b| b <= 0.0) {
            return Err(Error::ZeroBaselineCell {
                region: idx / m,
                period: idx % m,
            });
        }
        let ratios: Vec<f64> = cases
            .values()
            .iter()
            .zip(baseline.values())
            .map(|(c, b)| c / b)
            .collect();
        let std = standardize(&ratios)?;
        let p_values = if std.degenerate {
            vec![1.0; ratios.len()]
        } else {
            std.scores
                .iter()
                .map(|&z| normal_p_value(z, tail))
                .collect::<Result<Vec<_>>>()?
        };
        Ok(Analysis::BaselineRatio {
            n_regions: n,
            n_periods: m,
            tail,
            ratios,
            z_scores: std.scores,
            p_values,
            degenerate: std.degenerate,
        })
    }

    pub fn method(&self) -> Method {
        match self {
            Analysis::EigenSpot { .. } => Method::EigenSpot,
            Analysis::BaselineRatio { .. } => Method::BaselineRatio,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            Analysis::EigenSpot {
                spatial, temporal, ..
            } => (spatial.p_values.len(), temporal.p_values.len()),
            Analysis::BaselineRatio {
                n_regions,
                n_periods,
                ..
            } => (*n_regions, *n_periods),
        }
    }

    /// Cells reported at `alpha`, without building a full report.
    pub fn flagged_mask(&self, alpha: f64) -> CellMask {
        let (n, m) = self.shape();
        match self {
            Analysis::EigenSpot {
                spatial, temporal, ..
            } => {
                let rows = flagged(spatial, alpha);
                let cols = flagged(temporal, alpha);
                CellMask::from_cells(
                    n,
                    m,
                    rows.iter().flat_map(|&r| cols.iter().map(move |&t| (r, t))),
                )
            }
            Analysis::BaselineRatio {
                p_values,
                degenerate,
                ..
            } => {
                let mut mask = CellMask::empty(n, m);
                if !degenerate {
                    for (i, &p) in p_values.iter().enumerate() {
                        if p < alpha {
                            mask.set(i / m, i % m, true);
                        }
                    }
                }
                mask
            }
        }
    }

    pub fn report(&self, alpha: f64) -> Result<HotspotReport> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidAlpha(alpha));
        }
        let (n, m) = self.shape();
        match self {
            Analysis::EigenSpot {
                spatial,
                temporal,
                baseline,
                cases,
            } => {
                let spatial = spatial.at_alpha(alpha)?;
                let temporal = temporal.at_alpha(alpha)?;
                let cells = spatial
                    .flagged
                    .iter()
                    .flat_map(|&r| {
                        let (spatial, temporal) = (&spatial, &temporal);
                        temporal.flagged.iter().map(move |&t| CellScore {
                            region: r,
                            period: t,
                            score: spatial.p_values[r].max(temporal.p_values[t]),
                        })
                    })
                    .collect();
                Ok(HotspotReport {
                    method: Method::EigenSpot,
                    alpha,
                    tail: spatial.tail,
                    n_regions: n,
                    n_periods: m,
                    spatial_components: spatial.flagged.clone(),
                    temporal_components: temporal.flagged.clone(),
                    cells,
                    diagnostics: Diagnostics::EigenSpot {
                        spatial,
                        temporal,
                        baseline: baseline.clone(),
                        cases: cases.clone(),
                    },
                })
            }
            Analysis::BaselineRatio {
                tail,
                ratios,
                z_scores,
                p_values,
                degenerate,
                ..
            } => {
                let cells: Vec<CellScore> = if *degenerate {
                    Vec::new()
                } else {
                    p_values
                        .iter()
                        .enumerate()
                        .filter(|(_, &p)| p < alpha)
                        .map(|(i, &p)| CellScore {
                            region: i / m,
                            period: i % m,
                            score: p,
                        })
                        .collect()
                };
                let regions: BTreeSet<usize> = cells.iter().map(|c| c.region).collect();
                let periods: BTreeSet<usize> = cells.iter().map(|c| c.period).collect();
                Ok(HotspotReport {
                    method: Method::BaselineRatio,
                    alpha,
                    tail: *tail,
                    n_regions: n,
                    n_periods: m,
                    spatial_components: regions.into_iter().collect(),
                    temporal_components: periods.into_iter().collect(),
                    cells,
                    diagnostics: Diagnostics::BaselineRatio {
                        ratios: ratios.clone(),
                        z_scores: z_scores.clone(),
                        p_values: p_values.clone(),
                        degenerate: *degenerate,
                    },
                })
            }
        }
    }
}

fn flagged(chart: &ControlChartResult, alpha: f64) -> Vec<usize> {
    if chart.degenerate {
        return Vec::new();
    }
    chart
        .p_values
        .iter()
        .enumerate()
        .filter(|(_, &p)| p < alpha)
        .map(|(i, _)| i)
        .collect()
}

/// Runs EigenSpot on a baseline/cases pair at significance level `alpha`.
pub fn detect_eigenspot(
    baseline: &CountMatrix,
    cases: &CountMatrix,
    alpha: f64,
    tail: Tail,
) -> Result<HotspotReport> {
    Analysis::eigenspot(baseline, cases, tail)?.report(alpha)
}

/// Runs the per-cell ratio comparator at significance level `alpha`.
pub fn detect_baseline_method(
    baseline: &CountMatrix,
    cases: &CountMatrix,
    alpha: f64,
    tail: Tail,
) -> Result<HotspotReport> {
    Analysis::baseline_ratio(baseline, cases, tail)?.report(alpha)
}

pub fn detect(
    method: Method,
    baseline: &CountMatrix,
    cases: &CountMatrix,
    alpha: f64,
    tail: Tail,
) -> Result<HotspotReport> {
    Analysis::new(method, baseline, cases, tail)?.report(alpha)
}
