//! Forward diffusion: Euler–Maruyama bundles with counter-addressed per-path random
//! streams, time shifts, path concatenation and step-function partitions.

mod bundle;
mod diffusion;
mod partition;
mod stats;

pub use bundle::{concatenate, simulate, simulate_on, simulate_stream, BundleManifest, PathBundle, TimeGrid};
pub use diffusion::{shifted_diffusion, Affine, DiffusionSpec};
pub use partition::{step_approximation, Partition, StepDirection};
pub use stats::{mean_var, pairwise_sum, Moments};
