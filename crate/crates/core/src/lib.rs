//! Numerics for rescaled light-tailed compound Poisson bridges.

// NaN-rejecting `!(x > 0.0)` guards and index loops over small fixed arrays are deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod asymptotic;
pub mod bridge;
pub mod cli;
pub mod config;
pub mod convdens;
pub mod error;
pub mod gsolver;
pub mod ldp;
pub mod marginal;
pub mod numerics;
pub mod rng;
pub mod rvfun;
pub mod validate;

pub use error::{Error, Result};
pub use rvfun::{RVFunction, RVParams};

#[cfg(test)]
mod tests;
