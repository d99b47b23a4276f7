//! Balancedness dynamics of SGD, SAM and the BAR regularizers on
//! scale-invariant synthetic problems.
//!
//! For a pair of blocks `(x, y)` the balancedness is
//! `B = (||x||^2 - ||y||^2) / 2`. The crate provides the problems
//! ([`problems`]), the update rules ([`optimizers`]), the quantities tracked
//! along a run ([`diagnostics`]), exact and statistical checks
//! ([`verification`]) and the experiment runner behind the `sam-balance` CLI
//! ([`harness`]).

// `!(a <= b)` is used on purpose so that NaN counts as a failure.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod optimizers;
pub mod problems;
pub mod rng;
pub mod verification;

pub use error::{Error, Result};
