//! Delay-adaptive proximal incremental aggregated gradient (PIAG) and
//! asynchronous block coordinate descent, replayed deterministically from
//! delay tables, with the matching convergence bounds.

// `!(x > 0.0)` style guards reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod delay;
pub mod error;
mod history;
pub mod linalg;
pub mod objectives;
pub mod piag;
pub mod problem;
pub mod prox;
pub mod reference;
pub mod schedule;
pub mod trace;

pub use error::{Error, Result};
pub use history::IterateHistory;
pub mod bcd;
pub mod bounds;
