//! Value functions `u_n` of the Lipschitz rungs by an explicit monotone scheme, the
//! ladder limit `u = sup_n u_n`, and a regression Monte-Carlo BSDE cross-check.

mod mc;
mod pde;
mod surface;

pub use mc::{solve_bsde_mc, Basis, BsdePathSolution, Grouping, RegressionConfig};
pub use pde::{
    ladder_sweep, max_stable_dt, solve_ladder, solve_pde_level, time_steps, GridConfig, LadderConfig, LadderSolution,
    SolverManifest, LADDER_DECREASE_LIMIT,
};
pub use surface::{BoundaryPolicy, LevelTag, ValueSurface};
