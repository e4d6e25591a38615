//! Convex analysis on uniform grids: closures, convex envelopes, conjugates,
//! epi-limits, horizon functions and sufficient checks for the (REC) condition.

mod conjugate;
mod envelope;
mod epi;
mod grid;
mod horizon;
mod rec;

pub use conjugate::{dual_box, legendre_conjugate};
pub use envelope::{convexify, convexify_z, lsc_envelope};
pub use epi::{epi_liminf, tail_envelopes, EpiMode, EpiSequence, TailPolicy};
pub use grid::{Axis, GridFunction};
pub use horizon::horizon_function;
pub use rec::{rec_check, RecCase, RecConfig, RecReport, RecVerdict};

pub(crate) use grid::fmt_f64;
