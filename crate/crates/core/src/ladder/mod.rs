//! Lipschitz approximation ladder `g^n ↗ g` by truncated convex conjugation, and the
//! truncated terminals `phi^n = phi ∧ n`.

mod generator;
mod level;
mod terminal;

pub use generator::{
    GeneratorKind, GeneratorSpec, Monotonicity, ProbeGrid3, SampledGenerator, StructureFlags, REGISTRY_NAMES,
};
pub use level::{
    build_gn, build_gn_tabulated, conjugate_full, verify_monotone_ladder, ConjugateTable, GnEvaluator, LadderLevel,
    LadderManifest, MonotoneReport,
};
pub use terminal::{truncate_terminal, SampledTerminal, TerminalKind, TerminalSpec, TERMINAL_NAMES};
