//! Standardization, normal tail probabilities, the z-score control chart, and
//! the paired t / one-way ANOVA tests used to compare detectors.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Sample standard deviations at or below `DEGENERATE_STD * max(1, max|x|)`
/// are treated as zero.
pub const DEGENERATE_STD: f64 = 1e-11;

/// Which tail(s) of the standard normal a z-score is tested against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    #[default]
    TwoTailed,
    LeftTailed,
    RightTailed,
}

impl Tail {
    pub fn as_str(self) -> &'static str {
        match self {
            Tail::TwoTailed => "two",
            Tail::LeftTailed => "left",
            Tail::RightTailed => "right",
        }
    }
}

impl fmt::Display for Tail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Tail {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "two" | "two_tailed" | "two-tailed" => Ok(Tail::TwoTailed),
            "left" | "left_tailed" | "left-tailed" => Ok(Tail::LeftTailed),
            "right" | "right_tailed" | "right-tailed" => Ok(Tail::RightTailed),
            other => Err(format!("unknown tail '{other}' (expected two, left or right)")),
        }
    }
}

/// z-scores of a vector together with the moments used to produce them.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardized {
    pub scores: Vec<f64>,
    pub mean: f64,
    pub std_dev: f64,
    /// The sample standard deviation was (numerically) zero; `scores` is all zero.
    pub degenerate: bool,
}

/// `(x_i - mean) / s` with the `n - 1` sample standard deviation.
pub fn standardize(x: &[f64]) -> Result<Standardized> {
    if x.len() < 2 {
        return Err(Error::TooShort { len: x.len() });
    }
    if let Some(bad) = x.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(*bad));
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let ss: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
    let std_dev = (ss / (n - 1.0)).sqrt();
    let scale = x.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));

    if std_dev <= DEGENERATE_STD * scale {
        return Ok(Standardized {
            scores: vec![0.0; x.len()],
            mean,
            std_dev,
            degenerate: true,
        });
    }
    Ok(Standardized {
        scores: x.iter().map(|v| (v - mean) / std_dev).collect(),
        mean,
        std_dev,
        degenerate: false,
    })
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Tail probability of a standard normal z-score.
pub fn normal_p_value(z: f64, tail: Tail) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::NonFinite(z));
    }
    let p = match tail {
        Tail::TwoTailed => erfc(z.abs() / std::f64::consts::SQRT_2),
        Tail::LeftTailed => normal_cdf(z),
        Tail::RightTailed => normal_cdf(-z),
    };
    Ok(p.clamp(0.0, 1.0))
}

/// Outcome of a z-score control chart over one deviation vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlChartResult {
    pub deviations: Vec<f64>,
    pub z_scores: Vec<f64>,
    pub p_values: Vec<f64>,
    /// Ascending indices with `p_value < alpha`.
    pub flagged: Vec<usize>,
    pub alpha: f64,
    pub tail: Tail,
    pub degenerate: bool,
}

impl ControlChartResult {
    /// Same chart re-thresholded at a different significance level.
    pub fn at_alpha(&self, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self {
            flagged: flag_indices(&self.p_values, alpha, self.degenerate),
            alpha,
            ..self.clone()
        })
    }

    pub fn is_flagged(&self, index: usize) -> bool {
        self.flagged.binary_search(&index).is_ok()
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidAlpha(alpha))
    }
}

fn flag_indices(p_values: &[f64], alpha: f64, degenerate: bool) -> Vec<usize> {
    if degenerate {
        return Vec::new();
    }
    p_values
        .iter()
        .enumerate()
        .filter(|(_, &p)| p < alpha)
        .map(|(i, _)| i)
        .collect()
}

/// Flags the elements of `deviations` whose standardized score has a tail
/// probability strictly below `alpha`. A zero-variance input flags nothing and
/// reports every p-value as 1.
pub fn control_chart(deviations: &[f64], alpha: f64, tail: Tail) -> Result<ControlChartResult> {
    check_alpha(alpha)?;
    let std = standardize(deviations)?;
    let p_values = if std.degenerate {
        vec![1.0; deviations.len()]
    } else {
        std.scores
            .iter()
            .map(|&z| normal_p_value(z, tail))
            .collect::<Result<Vec<_>>>()?
    };
    Ok(ControlChartResult {
        deviations: deviations.to_vec(),
        flagged: flag_indices(&p_values, alpha, std.degenerate),
        z_scores: std.scores,
        p_values,
        alpha,
        tail,
        degenerate: std.degenerate,
    })
}

/// Result of a t or F test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub statistic: f64,
    pub p_value: f64,
    /// Degrees of freedom; the second entry is present for F tests.
    pub dof: (usize, Option<usize>),
}

/// Two-sided upper tail of Student's t with `dof` degrees of freedom.
pub fn student_t_two_tailed(t: f64, dof: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    beta_reg(dof / 2.0, 0.5, dof / (dof + t * t)).clamp(0.0, 1.0)
}

/// Upper tail `P(F > f)` of the F distribution.
pub fn f_upper_tail(f: f64, d1: f64, d2: f64) -> f64 {
    if f <= 0.0 {
        return 1.0;
    }
    beta_reg(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f)).clamp(0.0, 1.0)
}

/// Paired Student t-test on `a - b`, two-tailed.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TestReport> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::TooShort { len: a.len() });
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    // Equal differences can leave a few ulps of spread after the mean subtraction.
    let largest = d.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if var.sqrt() <= 1e-14 * largest || var == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let t = mean / (var / n).sqrt();
    let dof = d.len() - 1;
    Ok(TestReport {
        statistic: t,
        p_value: student_t_two_tailed(t, dof as f64),
        dof: (dof, None),
    })
}

/// One-way ANOVA F test across `groups`.
pub fn one_way_anova<G: AsRef<[f64]>>(groups: &[G]) -> Result<TestReport> {
    if groups.len() < 2 || groups.iter().any(|g| g.as_ref().len() < 2) {
        return Err(Error::TooFewGroups);
    }
    let k = groups.len();
    let total: usize = groups.iter().map(|g| g.as_ref().len()).sum();
    let grand_mean =
        groups.iter().flat_map(|g| g.as_ref().iter()).sum::<f64>() / total as f64;

    let mut ss_between = 0.0;
    let mut ss_within = 0.0;
    for g in groups {
        let g = g.as_ref();
        let mean = g.iter().sum::<f64>() / g.len() as f64;
        ss_between += g.len() as f64 * (mean - grand_mean).powi(2);
        ss_within += g.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    }
    if ss_within == 0.0 {
        return Err(Error::ZeroWithinVariance);
    }
    let (d1, d2) = (k - 1, total - k);
    let f = (ss_between / d1 as f64) / (ss_within / d2 as f64);
    Ok(TestReport {
        statistic: f,
        p_value: f_upper_tail(f, d1 as f64, d2 as f64),
        dof: (d1, Some(d2)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const WORKED_DS: [f64; 4] = [-0.05, -0.80, -0.05, 0.05];

    #[test]
    fn worked_example_z_scores() {
        let z = standardize(&WORKED_DS).unwrap();
        for (got, want) in z.scores.iter().zip([0.4119, -1.4893, 0.4119, 0.6654]) {
            assert!((got - want).abs() < 1e-4, "{got} vs {want}");
        }
    }

    #[test]
    fn population_std_does_not_reproduce_worked_example() {
        let n = WORKED_DS.len() as f64;
        let mean = WORKED_DS.iter().sum::<f64>() / n;
        let pop = (WORKED_DS.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!(((WORKED_DS[1] - mean) / pop - (-1.4893)).abs() > 1e-2);
    }

    #[test]
    fn constant_vector_is_degenerate() {
        let z = standardize(&[5.0, 5.0, 5.0]).unwrap();
        assert!(z.degenerate);
        assert_eq!(z.scores, vec![0.0; 3]);
        assert_eq!(standardize(&[1.0]), Err(Error::TooShort { len: 1 }));
    }

    #[test]
    fn p_value_examples() {
        let p = |z, t| normal_p_value(z, t).unwrap();
        assert!((p(1.28, Tail::TwoTailed) - 0.2005).abs() < 5e-4);
        assert!((p(3.00, Tail::TwoTailed) - 0.0027).abs() < 5e-4);
        assert_eq!(p(0.0, Tail::TwoTailed), 1.0);
        assert!((p(-1.4893, Tail::LeftTailed) - 0.0682).abs() < 1e-3);
        assert!(normal_p_value(f64::NAN, Tail::TwoTailed).is_err());
    }

    #[test]
    fn worked_example_chart() {
        let c = control_chart(&WORKED_DS, 0.10, Tail::LeftTailed).unwrap();
        assert_eq!(c.flagged, vec![1]);
        let c = control_chart(&WORKED_DS, 0.05, Tail::LeftTailed).unwrap();
        assert!(c.flagged.is_empty());
        // Two-tailed doubles the p-value, so region 2 drops out at 0.10 too.
        let c = control_chart(&WORKED_DS, 0.10, Tail::TwoTailed).unwrap();
        assert!(c.flagged.is_empty());
    }

    #[test]
    fn constant_chart_flags_nothing() {
        let c = control_chart(&[0.3; 6], 0.2, Tail::TwoTailed).unwrap();
        assert!(c.degenerate);
        assert!(c.flagged.is_empty());
        assert!(c.p_values.iter().all(|&p| p == 1.0));
    }

    #[test]
    fn chart_rejects_bad_alpha() {
        assert_eq!(
            control_chart(&WORKED_DS, 1.0, Tail::TwoTailed),
            Err(Error::InvalidAlpha(1.0))
        );
        assert!(control_chart(&WORKED_DS, 0.0, Tail::TwoTailed).is_err());
    }

    #[test]
    fn rethreshold_matches_fresh_chart() {
        let c = control_chart(&WORKED_DS, 0.05, Tail::LeftTailed).unwrap();
        assert_eq!(
            c.at_alpha(0.10).unwrap(),
            control_chart(&WORKED_DS, 0.10, Tail::LeftTailed).unwrap()
        );
    }

    #[test]
    fn paired_t_identical_samples() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(paired_t_test(&a, &a), Err(Error::ZeroVariance));
        assert!(matches!(
            paired_t_test(&a, &[1.0]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn paired_t_hand_expanded() {
        // d = [0.1, 0.0, 0.2, -0.1], mean 0.05,
        // sum sq dev = 0.0025 + 0.0025 + 0.0225 + 0.0225 = 0.05, var = 0.05 / 3
        // t = 0.05 / sqrt(var / 4)
        let r = paired_t_test(&[1.1, 2.0, 3.2, 3.9], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        let t = 0.05 / ((0.05 / 3.0) / 4.0f64).sqrt();
        assert!((r.statistic - t).abs() < 1e-12);
        assert_eq!(r.dof, (3, None));
        // scipy.stats.ttest_rel: t = 0.7745966692414835, p = 0.495025346059711
        assert!((r.statistic - 0.774_596_669_241_483_4).abs() < 1e-9);
        assert!((r.p_value - 0.495_025_346_059_711).abs() < 1e-8);
    }

    #[test]
    fn paired_t_p_shrinks_with_noise() {
        let noise = [0.3, -0.2, -0.1];
        let mut last = 1.0;
        for eps in [1.0, 0.5, 0.1, 0.01] {
            let a = [2.0, 4.0, 6.0];
            let b: Vec<f64> = [1.0, 3.0, 5.0]
                .iter()
                .zip(noise)
                .map(|(x, e)| x - eps * e)
                .collect();
            let p = paired_t_test(&a, &b).unwrap().p_value;
            assert!(p < last, "eps {eps}: {p} !< {last}");
            last = p;
        }
    }

    #[test]
    fn anova_examples() {
        let r = one_way_anova(&[[1.0, 2.0, 3.0], [1.0, 2.0, 3.0], [1.0, 2.0, 3.0]]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.dof, (2, Some(6)));

        let r = one_way_anova(&[[1.0, 1.1, 0.9], [5.0, 5.1, 4.9]]).unwrap();
        // between SS = 3 * 2 * 2^2 = 24, within SS = 4 * 0.01 = 0.04, F = 24 / (0.04 / 4)
        assert!((r.statistic - 2400.0).abs() < 1e-8);
        assert!(r.p_value < 0.01);
        // scipy.stats.f_oneway: p = 1.03877946508485e-06
        assert!((r.p_value - 1.038_779_465_084_85e-6).abs() < 1e-12);
    }

    #[test]
    fn anova_errors() {
        assert_eq!(one_way_anova(&[[1.0, 2.0]]), Err(Error::TooFewGroups));
        assert_eq!(
            one_way_anova(&[vec![1.0, 2.0], vec![1.0]]),
            Err(Error::TooFewGroups)
        );
        assert_eq!(
            one_way_anova(&[[1.0, 1.0], [2.0, 2.0]]),
            Err(Error::ZeroWithinVariance)
        );
    }

    #[test]
    fn tail_parsing() {
        assert_eq!("two".parse::<Tail>(), Ok(Tail::TwoTailed));
        assert_eq!("LEFT".parse::<Tail>(), Ok(Tail::LeftTailed));
        assert_eq!("right_tailed".parse::<Tail>(), Ok(Tail::RightTailed));
        assert!("both".parse::<Tail>().is_err());
    }
}
