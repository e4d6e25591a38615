use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("improper function: every node is +inf")]
    ImproperFunction,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("requires (y,z) grid")]
    RequiresYzGrid,

    #[error("empty dual grid")]
    EmptyDualGrid,

    #[error("horizon function is only defined for convex input")]
    NotConvex,

    #[error("ladder requires jointly convex generator")]
    NotJointlyConvex,

    #[error("ladder level must be >= 1, got {0}")]
    InvalidLevel(u32),

    #[error("sequence is empty")]
    EmptySequence,

    #[error("unbounded sequence: entry {index} = {value}")]
    UnboundedSequence { index: usize, value: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("non-finite state at step {step} on path {path}")]
    NonFiniteState { step: usize, path: usize },

    #[error("time {0} is not a grid node")]
    NotOnGrid(f64),

    #[error("shift time {t} is outside [0, {horizon}]")]
    ShiftOutOfRange { t: f64, horizon: f64 },

    #[error("CFL condition violated: dt = {dt:e} exceeds max admissible dt = {max_dt:e}")]
    Cfl { dt: f64, max_dt: f64 },

    #[error("non-finite value produced at time index {j}, space index {i}")]
    NanProduced { j: usize, i: usize },

    #[error("ladder monotonicity violated between levels {n} and {next}: decrease {violation:e}")]
    LadderMonotonicity { n: u32, next: u32, violation: f64 },

    #[error("implicit step not contractive: n*dt = {0}")]
    NotContractive(f64),

    #[error("singular regression design at step {step}; try a larger n_paths")]
    SingularRegression { step: usize },

    #[error("point (t={t}, x={x}) is outside the reporting window")]
    OutsideWindow { t: f64, x: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{0} required")]
    MissingKey(String),

    #[error("unknown {kind} '{name}'; valid names: {valid}")]
    UnknownName {
        kind: &'static str,
        name: String,
        valid: String,
    },

    #[error("{key} = {value} out of range [{lo}, {hi}]")]
    OutOfRange { key: String, value: f64, lo: f64, hi: f64 },

    #[error("malformed config: {0}")]
    Malformed(String),
}
