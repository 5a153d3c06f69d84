//! Fairness-aware secure ISAC with a STAR-RIS: channel simulation, exact rate
//! and sensing metrics, MM surrogates, conic subproblems and the alternating
//! optimization driver.

// `!(x > 0.0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

use openblas_src as _;

pub mod channel;
pub mod conic;
pub mod driver;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod scenario;
pub mod subproblems;
pub mod surrogate;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
