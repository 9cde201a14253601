//! External per-cell verdict files.
//!
//! One CSV per simulated dataset, named `size{H}_impact{I}_rep{r}.csv` with
//! `I` in canonical number form (`size3_impact2_rep0.csv`,
//! `size3_impact2.5_rep0.csv`). The header is `region,period` followed by
//! either a single flag column, applied at every threshold, or one flag
//! column per sweep threshold in sweep order. Regions and periods are given
//! by label, or by 0-based index when no label matches. Flags are `1`/`0` or
//! `true`/`false`. Cells without a row are not flagged.

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};

use eigenspot::evaluation::VerdictSet;
use eigenspot::linalg::{CellMask, CountMatrix};

use crate::matrix_io::{format_number, period_label, region_label};

pub fn dataset_stem(size: usize, impact: f64, replicate: usize) -> String {
    format!("size{size}_impact{}_rep{replicate}", format_number(impact))
}

pub fn verdict_path(dir: &Path, size: usize, impact: f64, replicate: usize) -> PathBuf {
    dir.join(format!("{}.csv", dataset_stem(size, impact, replicate)))
}

fn parse_flag(text: &str) -> Option<bool> {
    match text.to_ascii_lowercase().as_str() {
        "1" | "true" => Some(true),
        "0" | "false" => Some(false),
        _ => None,
    }
}

fn resolve(text: &str, labels: &HashMap<String, usize>, len: usize) -> Option<usize> {
    labels
        .get(text)
        .copied()
        .or_else(|| text.parse::<usize>().ok().filter(|&i| i < len))
}

/// Parses a verdict file against the labels of `grid`.
pub fn parse_verdicts(bytes: &[u8], grid: &CountMatrix) -> Result<VerdictSet, String> {
    let (n, m) = grid.shape();
    let region_ix: HashMap<String, usize> = (0..n).map(|i| (region_label(grid, i), i)).collect();
    let period_ix: HashMap<String, usize> = (0..m).map(|j| (period_label(grid, j), j)).collect();

    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let header = reader.headers().map_err(|e| e.to_string())?.clone();
    if header.len() < 3
        || !header[0].eq_ignore_ascii_case("region")
        || !header[1].eq_ignore_ascii_case("period")
    {
        return Err("header must be region,period followed by at least one flag column".into());
    }
    let columns = header.len() - 2;
    let mut masks = vec![CellMask::empty(n, m); columns];
    let mut seen = HashSet::new();
    for (k, rec) in reader.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| e.to_string())?;
        let r = resolve(&rec[0], &region_ix, n)
            .ok_or_else(|| format!("line {line}: unknown region '{}'", &rec[0]))?;
        let p = resolve(&rec[1], &period_ix, m)
            .ok_or_else(|| format!("line {line}: unknown period '{}'", &rec[1]))?;
        if !seen.insert((r, p)) {
            return Err(format!(
                "line {line}: duplicate cell (region '{}', period '{}')",
                &rec[0], &rec[1]
            ));
        }
        for (c, mask) in masks.iter_mut().enumerate() {
            let text = &rec[c + 2];
            let flag = parse_flag(text)
                .ok_or_else(|| format!("line {line}: flag '{text}' is not 0/1/true/false"))?;
            mask.set(r, p, flag);
        }
    }
    VerdictSet::per_threshold(masks).map_err(|e| e.to_string())
}
