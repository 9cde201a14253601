use thiserror::Error;

/// Errors raised by the detection, simulation and evaluation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix must have at least one region and one period (got {n_regions}x{n_periods})")]
    EmptyMatrix { n_regions: usize, n_periods: usize },

    #[error("expected {expected} values for the matrix, got {got}")]
    ValueCount { expected: usize, got: usize },

    #[error("invalid count {value} at region {region}, period {period}: counts must be finite and nonnegative")]
    InvalidCount {
        region: usize,
        period: usize,
        value: f64,
    },

    #[error("{axis} labels: expected {expected}, got {got}")]
    LabelCount {
        axis: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("matrix is all zero; its singular vectors are undefined")]
    AllZeroMatrix,

    #[error("oracle SVD is limited to min(n, m) <= {limit}, got {n_regions}x{n_periods}")]
    OracleSizeExceeded {
        n_regions: usize,
        n_periods: usize,
        limit: usize,
    },

    #[error("zero-length vector has no direction")]
    ZeroVector,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("need at least 2 values, got {len}")]
    TooShort { len: usize },

    #[error("significance level must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),

    #[error("value must be finite, got {0}")]
    NonFinite(f64),

    #[error("all paired differences are equal; t statistic is undefined")]
    ZeroVariance,

    #[error("need at least 2 groups of at least 2 values each")]
    TooFewGroups,

    #[error("within-group variance is zero; F statistic is undefined")]
    ZeroWithinVariance,

    #[error("shape mismatch: baseline is {baseline:?}, cases is {cases:?}")]
    ShapeMismatch {
        baseline: (usize, usize),
        cases: (usize, usize),
    },

    #[error("baseline count is zero at region {region}, period {period}; ratio undefined")]
    ZeroBaselineCell { region: usize, period: usize },

    #[error("first period has no positive count; Poisson rate cannot be estimated")]
    EmptyFirstPeriod,

    #[error("Poisson rate must be positive and finite, got {0}")]
    NonPositiveLambda(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
