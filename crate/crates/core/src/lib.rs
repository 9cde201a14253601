//! EigenSpot hotspot detection.
//!
//! Given a baseline matrix (e.g. population) and a cases matrix (e.g. disease
//! counts) over the same regions and time periods, EigenSpot compares the
//! principal spatial and temporal singular vectors of the two matrices,
//! flags the components whose deviation is out of control on a z-score chart,
//! and reports the cross product of flagged regions and periods as hotspot
//! cells. It needs `n + m` significance comparisons instead of the `n * m`
//! used by the per-cell ratio comparator, which is also provided.
//!
//! The crate also contains the simulation protocol used to benchmark the
//! detector (Poisson cases with geometric growth plus an injected `H x H`
//! window) and the threshold-sweep evaluation harness.

pub mod detector;
pub mod error;
pub mod evaluation;
pub mod linalg;
pub mod simulator;
pub mod stats;

pub use detector::{
    detect, detect_baseline_method, detect_eigenspot, Analysis, CellScore, Diagnostics,
    HotspotReport, Method,
};
pub use error::{Error, Result};
pub use evaluation::{
    accuracy, alpha_sweep, run_study, Confusion, EvaluationReport, StudyConfig, StudyRow,
    StudyTable, SweepSpec, VerdictSet,
};
pub use linalg::{rank1_svd, svd_oracle, vector_angle, CellMask, CountMatrix, SingularPair};
pub use simulator::{
    estimate_lambda, generate, replicate_seed, sample_poisson, synthesize_baseline,
    BaselineSource, HotspotOrigin, LambdaMode, SimRng, SimulatedDataset, SimulationConfig,
};
pub use stats::{
    control_chart, normal_p_value, one_way_anova, paired_t_test, standardize, ControlChartResult,
    Tail, TestReport,
};
