//! Numerical checks of the stability, locality, Markov and viscosity properties of the
//! minimal supersolution, each producing a [`CheckReport`].

mod limits;
mod locality;
mod markov;
mod report;
mod stability;
mod viscosity;

pub use limits::{check_limit_family, monotone_limit_check, LimitFamily};
pub use locality::{check_locality, EventRule, LocalityConfig};
pub use markov::{check_markov_identity, check_shift_identity, MarkovConfig, ShiftConfig};
pub use report::{write_summary, CheckReport, Verdict};
pub use stability::{check_stability, EqualityClaim, StabilityConfig};
pub use viscosity::{check_lsc, discrete_jet, viscosity_residual, DiscreteJet, ViscosityConfig};
