use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::scenarios::{scenario, SCENARIO_NAMES};
use crate::analysis::{EqualityClaim, EventRule, LimitFamily};
use crate::backward::{GridConfig, LadderConfig, RegressionConfig};
use crate::convexlab::Axis;
use crate::error::{ConfigError, Result};
use crate::forward::{Affine, DiffusionSpec};
use crate::ladder::{
    GeneratorKind, GeneratorSpec, StructureFlags, TerminalKind, TerminalSpec, REGISTRY_NAMES, TERMINAL_NAMES,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffusionConfig {
    pub mu: Affine,
    pub sigma: Affine,
    pub horizon: f64,
}

impl DiffusionConfig {
    pub const fn brownian(horizon: f64) -> Self {
        DiffusionConfig {
            mu: Affine::constant(0.0),
            sigma: Affine::constant(1.0),
            horizon,
        }
    }

    pub fn build(&self) -> Result<DiffusionSpec> {
        DiffusionSpec::new(self.mu, self.sigma, self.horizon)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    pub x0: f64,
    pub n_paths: usize,
    pub steps: usize,
    pub regression: RegressionConfig,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            x0: 0.0,
            n_paths: 100_000,
            steps: 50,
            regression: RegressionConfig::default(),
        }
    }
}

/// Points `x_k` approaching the limit `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SequenceSpec {
    /// `x + sign / k` for `k = 1..=count`.
    Harmonic {
        count: usize,
        sign: f64,
    },
    Explicit {
        values: Vec<f64>,
    },
}

impl SequenceSpec {
    pub fn points(&self, x: f64) -> Vec<f64> {
        match self {
            SequenceSpec::Harmonic { count, sign } => (1..=*count).map(|k| x + sign / k as f64).collect(),
            SequenceSpec::Explicit { values } => values.clone(),
        }
    }
}

fn default_tol() -> f64 {
    5e-3
}

fn default_buckets() -> usize {
    20
}

fn default_visc_tol() -> f64 {
    1e-3
}

fn default_kink() -> f64 {
    0.1
}

fn default_level() -> u32 {
    16
}

fn default_limit_axis() -> Axis {
    Axis::new(-2.0, 2.0, 81).expect("static axis")
}

/// One harness check with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CheckSpec {
    Stability {
        x: f64,
        sequence: SequenceSpec,
        #[serde(default = "default_tol")]
        tol: f64,
        #[serde(default)]
        claim: Option<EqualityClaim>,
        #[serde(default)]
        rec_known: bool,
        #[serde(default)]
        tail_from: Option<usize>,
    },
    Locality {
        t: f64,
        event: EventRule,
        second: DiffusionConfig,
        #[serde(default = "default_locality_level")]
        level: u32,
    },
    Markov {
        t: f64,
        #[serde(default)]
        equality: bool,
        #[serde(default = "default_buckets")]
        buckets: usize,
    },
    Shift {
        t: f64,
        x: f64,
        #[serde(default = "default_level")]
        level: u32,
    },
    Viscosity {
        #[serde(default = "default_visc_tol")]
        tol: f64,
        #[serde(default = "default_kink")]
        kink_threshold: f64,
    },
    Lsc {
        t: f64,
    },
    Limits {
        family: LimitFamily,
        #[serde(default = "default_limit_axis")]
        axis: Axis,
    },
}

fn default_locality_level() -> u32 {
    64
}

impl CheckSpec {
    pub fn name(&self) -> &'static str {
        match self {
            CheckSpec::Stability { .. } => "stability",
            CheckSpec::Locality { .. } => "locality",
            CheckSpec::Markov { .. } => "markov",
            CheckSpec::Shift { .. } => "shift",
            CheckSpec::Viscosity { .. } => "viscosity",
            CheckSpec::Lsc { .. } => "lsc",
            CheckSpec::Limits { .. } => "limits",
        }
    }

    /// Checks that read the ladder surface of the run.
    pub fn needs_surface(&self) -> bool {
        matches!(self, CheckSpec::Viscosity { .. } | CheckSpec::Lsc { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: String,
    pub seed: u64,
    pub generator: GeneratorKind,
    /// Structure flags for sampled generators; registry entries carry their own.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator_flags: Option<StructureFlags>,
    pub terminal: TerminalKind,
    pub diffusion: DiffusionConfig,
    pub grid: GridConfig,
    pub ladder: LadderConfig,
    pub mc: McConfig,
    pub checks: Vec<CheckSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn generator(&self) -> Result<GeneratorSpec> {
        let mut g = GeneratorSpec::registry(self.generator.clone())?;
        if let Some(f) = self.generator_flags {
            g.flags = f;
        }
        Ok(g)
    }

    pub fn terminal(&self) -> Result<TerminalSpec> {
        TerminalSpec::new(self.terminal.clone())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Parses a JSON config: the named scenario is the base, every other key overrides it.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let v: Value = serde_json::from_str(text).map_err(|e| ConfigError::Malformed(e.to_string()))?;
    let Value::Object(mut over) = v else {
        return Err(ConfigError::Malformed("top level must be an object".into()).into());
    };
    let name = match over.get("scenario") {
        None => return Err(ConfigError::MissingKey("scenario".into()).into()),
        Some(Value::String(s)) => s.clone(),
        Some(other) => return Err(ConfigError::Malformed(format!("scenario must be a string, got {other}")).into()),
    };
    if !over.contains_key("seed") {
        return Err(ConfigError::MissingKey("seed".into()).into());
    }
    expand_name(&mut over, "generator", REGISTRY_NAMES)?;
    expand_name(&mut over, "terminal", TERMINAL_NAMES)?;
    let base = scenario(&name).ok_or_else(|| ConfigError::UnknownName {
        kind: "scenario",
        name: name.clone(),
        valid: SCENARIO_NAMES.join(", "),
    })?;
    let mut merged = serde_json::to_value(base)?;
    merge(&mut merged, Value::Object(over));
    let cfg: RunConfig = serde_json::from_value(merged).map_err(|e| ConfigError::Malformed(e.to_string()))?;
    validate(&cfg)?;
    Ok(cfg)
}

/// Accepts `"generator": "entropic"` as shorthand and rejects unknown names up front.
fn expand_name(over: &mut Map<String, Value>, key: &str, valid: &[&str]) -> Result<()> {
    let name = match over.get(key) {
        None => return Ok(()),
        Some(Value::String(s)) => {
            let s = s.clone();
            over.insert(key.into(), serde_json::json!({ "name": s }));
            s
        }
        Some(Value::Object(m)) => match m.get("name") {
            Some(Value::String(s)) => s.clone(),
            _ => return Err(ConfigError::MissingKey(format!("{key}.name")).into()),
        },
        Some(other) => {
            return Err(ConfigError::Malformed(format!("{key} must be a name or object, got {other}")).into())
        }
    };
    if !valid.contains(&name.as_str()) {
        return Err(ConfigError::UnknownName {
            kind: if key == "generator" { "generator" } else { "terminal" },
            name,
            valid: valid.join(", "),
        }
        .into());
    }
    Ok(())
}

const TAGS: [&str; 4] = ["name", "kind", "check", "family"];

/// Recursive object merge; an object whose tag differs from the base replaces it whole,
/// and arrays always replace.
fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            let retagged = TAGS
                .iter()
                .any(|t| matches!((b.get(*t), o.get(*t)), (Some(x), Some(y)) if x != y));
            if retagged {
                *b = o;
                return;
            }
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn range(key: &str, value: f64, lo: f64, hi: f64) -> Result<()> {
    if !(lo..=hi).contains(&value) {
        return Err(ConfigError::OutOfRange {
            key: key.into(),
            value,
            lo,
            hi,
        }
        .into());
    }
    Ok(())
}

fn validate(c: &RunConfig) -> Result<()> {
    range("diffusion.horizon", c.diffusion.horizon, 1e-6, 100.0)?;
    range("grid.dx", c.grid.dx, 1e-4, 1.0)?;
    range("grid.x_lo", c.grid.x_lo, -1e3, c.grid.x_hi - 2.0 * c.grid.dx)?;
    range("grid.x_hi", c.grid.x_hi, c.grid.x_lo + 2.0 * c.grid.dx, 1e3)?;
    range("grid.cfl_target", c.grid.cfl_target, 1e-3, 1.0)?;
    range("grid.time_alignment", c.grid.time_alignment as f64, 1.0, 1e6)?;
    if let Some(dt) = c.grid.dt {
        range("grid.dt", dt, 1e-9, c.diffusion.horizon)?;
    }
    range("ladder.n_max", c.ladder.n_max as f64, 1.0, 1024.0)?;
    range("ladder.tol", c.ladder.tol, 1e-12, 1.0)?;
    range("mc.n_paths", c.mc.n_paths as f64, 2.0, 1e7)?;
    range("mc.steps", c.mc.steps as f64, 1.0, 1e5)?;
    range("mc.regression.ridge", c.mc.regression.ridge, 0.0, 1.0)?;
    range("mc.regression.max_iter", c.mc.regression.max_iter as f64, 1.0, 1e4)?;
    for (i, chk) in c.checks.iter().enumerate() {
        let key = |f: &str| format!("checks[{i}].{f}");
        match chk {
            CheckSpec::Stability { tol, sequence, .. } => {
                range(&key("tol"), *tol, 0.0, 1e3)?;
                if let SequenceSpec::Harmonic { count, .. } = sequence {
                    range(&key("sequence.count"), *count as f64, 1.0, 1e6)?;
                }
            }
            CheckSpec::Locality { t, level, second, .. } => {
                range(&key("t"), *t, 0.0, c.diffusion.horizon)?;
                range(&key("level"), *level as f64, 1.0, 1024.0)?;
                range(
                    &key("second.horizon"),
                    second.horizon,
                    c.diffusion.horizon,
                    c.diffusion.horizon,
                )?;
            }
            CheckSpec::Markov { t, buckets, .. } => {
                range(&key("t"), *t, 0.0, c.diffusion.horizon)?;
                range(&key("buckets"), *buckets as f64, 1.0, 1e3)?;
            }
            CheckSpec::Shift { t, level, .. } => {
                range(&key("t"), *t, 0.0, c.diffusion.horizon)?;
                range(&key("level"), *level as f64, 1.0, 1024.0)?;
            }
            CheckSpec::Viscosity { tol, .. } => range(&key("tol"), *tol, 0.0, 1e3)?,
            CheckSpec::Lsc { t } => range(&key("t"), *t, 0.0, c.diffusion.horizon)?,
            CheckSpec::Limits { family, .. } => {
                let (LimitFamily::Oscillating { count }
                | LimitFamily::ShiftedParabola { count, .. }
                | LimitFamily::ScaledParabola { count, .. }) = *family;
                range(&key("family.count"), count as f64, 1.0, 1e4)?;
            }
        }
    }
    Ok(())
}
