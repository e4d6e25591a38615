//! Minimal supersolutions of decoupled forward-backward SDEs with convex generators.
//!
//! The value function is built as the increasing limit of Lipschitz problems obtained by
//! truncating the convex conjugate of the generator. Each rung is solved by a monotone
//! explicit finite-difference scheme and cross-checked by regression Monte Carlo; the
//! [`analysis`] module checks stability, locality, Markov and viscosity properties of the
//! computed surfaces.

// `!(a > b)` is used on purpose so that NaN lands on the rejecting branch
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod backward;
pub mod cli;
pub mod convexlab;
pub mod error;
pub mod forward;
pub mod ladder;

pub use error::{Error, Result};
