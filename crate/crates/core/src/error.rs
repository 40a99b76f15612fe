use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("information density undefined at (x={x}, y={y}): W(y|x) > 0 but PW(y) = 0")]
    UndefinedDensity { x: usize, y: usize },

    #[error("the two channels have different capacity-achieving inputs (gap {gap:.3e} > tolerance {tolerance:.3e})")]
    CommonMaximizerViolation { gap: f64, tolerance: f64 },

    #[error("capacity optimization did not converge: relative gap {gap:.3e} after {iterations} iterations")]
    CapacityNotConverged { gap: f64, iterations: usize },

    #[error("alternating maximization ({ba:.12}) fell below simplex grid search ({grid:.12})")]
    OptimizerMismatch { ba: f64, grid: f64 },

    #[error("quantized grid overflow: {atoms} atoms exceeds the limit {limit}; use a coarser step")]
    GridOverflow { atoms: usize, limit: usize },

    #[error("probability mass drifted by {drift:.3e} during convolution")]
    MassDrift { drift: f64 },

    #[error("type enumeration overflow: {count} compositions exceeds the limit {limit}")]
    TypeEnumerationOverflow { count: u128, limit: usize },

    #[error("log M = {log_m} is outside the domain log M > 1")]
    LogMDomain { log_m: f64 },

    #[error("bracket failure: {0}")]
    BracketFailure(String),

    #[error("design recipe infeasible: {0}")]
    RecipeInfeasible(String),

    #[error("{censored} of {trials} trials hit the step cap of {max_steps}")]
    CensoredRuns {
        censored: usize,
        trials: usize,
        max_steps: u64,
    },

    #[error("random walk has nonpositive drift (mu_w = {mu_w}, mu_z = {mu_z})")]
    NonpositiveDrift { mu_w: f64, mu_z: f64 },

    #[error("I/O error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
