//! Experiment runner: configuration, the run pipeline, and b-sweeps.

// `!(x > 0.0)` style guards reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod runner;

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult, FailureKind};
pub use runner::{run_experiment, sweep, RunOutcome, SweepOutcome};
