use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{what} index {index} out of range (count {count})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        count: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("regularizer is not separable under the block partition; Async-BCD does not apply")]
    NonSeparable,

    #[error("step-size policy is not admissible: window sum {window_sum:e} exceeds {limit:e} at k = {k}")]
    Inadmissible { k: usize, window_sum: f64, limit: f64 },

    #[error("delay sequence violates the delay bound at k = {k} (tau = {tau})")]
    DelayBoundViolated { k: usize, tau: usize },

    #[error("iterate x_{index} was evicted from history at k = {k}")]
    EvictedIterate { index: usize, k: usize },

    #[error("delay sequence covers {len} steps but {needed} are required")]
    DelaysTooShort { len: usize, needed: usize },

    #[error("operation requires an adversarial delay sequence")]
    NotAdversarial,

    #[error("missing constant for bound curve: {0}")]
    MissingConstant(&'static str),

    #[error("trace and bound curve come from different configurations: {0}")]
    ConfigurationMismatch(String),

    #[error("reference solve did not converge: residual {residual:e} after {iterations} iterations")]
    ReferenceSolveFailed { residual: f64, iterations: usize },

    #[error("empty batch: {0}")]
    EmptyBatch(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
