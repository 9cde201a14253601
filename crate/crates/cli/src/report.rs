//! Machine-readable detection reports.

use eigenspot::detector::{Diagnostics, HotspotReport, Method};
use eigenspot::linalg::CountMatrix;
use eigenspot::stats::Tail;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::matrix_io::{csv_writer, finish, format_number, period_label, region_label};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub method: Method,
    pub alpha: f64,
    pub tail: Tail,
    pub matrix_shape: MatrixShape,
    pub spatial_components: Vec<Component>,
    pub temporal_components: Vec<Component>,
    pub cells: Vec<Cell>,
    pub diagnostics: Diagnostics,
    pub input_digests: InputDigests,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixShape {
    pub regions: usize,
    pub periods: usize,
}

/// A flagged region or period.
///
/// For EigenSpot `p_value` comes from the control chart of that axis; for the
/// ratio method it is the smallest cell p-value along that row or column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub index: usize,
    pub label: String,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub region: String,
    pub period: String,
    pub region_index: usize,
    pub period_index: usize,
    pub score: f64,
}

/// Lower-case hex SHA-256 of the raw input files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigests {
    pub baseline: String,
    pub cases: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

impl ReportFile {
    /// `labels` supplies the region and period names.
    pub fn new(report: &HotspotReport, labels: &CountMatrix, digests: InputDigests) -> Self {
        let (spatial_p, temporal_p): (Vec<f64>, Vec<f64>) = match &report.diagnostics {
            Diagnostics::EigenSpot {
                spatial, temporal, ..
            } => (
                report
                    .spatial_components
                    .iter()
                    .map(|&i| spatial.p_values[i])
                    .collect(),
                report
                    .temporal_components
                    .iter()
                    .map(|&j| temporal.p_values[j])
                    .collect(),
            ),
            Diagnostics::BaselineRatio { .. } => {
                let min_score = |pick: &dyn Fn(&eigenspot::CellScore) -> bool| {
                    report
                        .cells
                        .iter()
                        .filter(|c| pick(c))
                        .map(|c| c.score)
                        .fold(f64::INFINITY, f64::min)
                };
                (
                    report
                        .spatial_components
                        .iter()
                        .map(|&i| min_score(&|c| c.region == i))
                        .collect(),
                    report
                        .temporal_components
                        .iter()
                        .map(|&j| min_score(&|c| c.period == j))
                        .collect(),
                )
            }
        };
        let components = |ix: &[usize], p: Vec<f64>, label: &dyn Fn(usize) -> String| {
            ix.iter()
                .zip(p)
                .map(|(&index, p_value)| Component {
                    index,
                    label: label(index),
                    p_value,
                })
                .collect()
        };
        Self {
            method: report.method,
            alpha: report.alpha,
            tail: report.tail,
            matrix_shape: MatrixShape {
                regions: report.n_regions,
                periods: report.n_periods,
            },
            spatial_components: components(&report.spatial_components, spatial_p, &|i| {
                region_label(labels, i)
            }),
            temporal_components: components(&report.temporal_components, temporal_p, &|j| {
                period_label(labels, j)
            }),
            cells: report
                .cells
                .iter()
                .map(|c| Cell {
                    region: region_label(labels, c.region),
                    period: period_label(labels, c.period),
                    region_index: c.region,
                    period_index: c.period,
                    score: c.score,
                })
                .collect(),
            diagnostics: report.diagnostics.clone(),
            input_digests: digests,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// One row per reported cell.
    pub fn to_csv(&self) -> String {
        let mut w = csv_writer();
        w.write_record(["region", "period", "region_index", "period_index", "score"])
            .expect("in-memory write");
        for c in &self.cells {
            w.write_record([
                c.region.clone(),
                c.period.clone(),
                c.region_index.to_string(),
                c.period_index.to_string(),
                format_number(c.score),
            ])
            .expect("in-memory write");
        }
        finish(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use eigenspot::detect;

    #[test]
    fn sha256_of_abc() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn json_round_trips_losslessly() {
        let b = CountMatrix::from_rows(&[[100.0, 120.0, 90.0], [50.0, 55.0, 60.0], [10.0, 12.0, 11.0]])
            .unwrap();
        let c = CountMatrix::from_rows(&[[3.0, 9.0, 2.0], [1.0, 7.0, 1.0], [2.0, 1.0, 2.0]]).unwrap();
        for method in [Method::EigenSpot, Method::BaselineRatio] {
            let report = detect(method, &b, &c, 0.4, Tail::TwoTailed).unwrap();
            let digests = InputDigests {
                baseline: sha256_hex(b"b"),
                cases: sha256_hex(b"c"),
            };
            let file = ReportFile::new(&report, &b, digests);
            let back: ReportFile = serde_json::from_str(&file.to_json()).unwrap();
            assert_eq!(back, file);
        }
    }
}
