use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 1D terminal table, linearly interpolated and held constant outside its range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledTerminal {
    pub lo: f64,
    pub hi: f64,
    pub values: Vec<f64>,
}

impl SampledTerminal {
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.values.len();
        let h = (self.hi - self.lo) / (n - 1) as f64;
        let s = ((x - self.lo) / h).clamp(0.0, (n - 1) as f64);
        let i = (s.floor() as usize).min(n - 2);
        let w = s - i as f64;
        if w == 0.0 {
            self.values[i]
        } else {
            self.values[i] + w * (self.values[i + 1] - self.values[i])
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TerminalKind {
    Identity,
    Square,
    Tanh,
    PositivePart,
    Zero,
    Constant { c: f64 },
    Sampled { table: SampledTerminal },
}

pub const TERMINAL_NAMES: &[&str] = &[
    "identity",
    "square",
    "tanh",
    "positive-part",
    "zero",
    "constant",
    "sampled",
];

/// Terminal function `phi`, optionally capped from above.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerminalSpec {
    pub kind: TerminalKind,
    /// Declared constant `C` with `phi >= C`; `None` when `phi` is unbounded below.
    pub lower_bound: Option<f64>,
    /// `phi ∧ cap`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<f64>,
}

impl TerminalSpec {
    /// Registry terminal with its natural lower bound.
    pub fn new(kind: TerminalKind) -> Result<Self> {
        let lower_bound = match &kind {
            TerminalKind::Identity => None,
            TerminalKind::Square | TerminalKind::PositivePart | TerminalKind::Zero => Some(0.0),
            TerminalKind::Tanh => Some(-1.0),
            TerminalKind::Constant { c } => {
                if !c.is_finite() {
                    return Err(Error::InvalidArgument("constant terminal must be finite".into()));
                }
                Some(*c)
            }
            TerminalKind::Sampled { table } => {
                if table.values.len() < 2 || !(table.lo < table.hi) || table.values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidArgument("malformed sampled terminal".into()));
                }
                Some(table.values.iter().copied().fold(f64::INFINITY, f64::min))
            }
        };
        Ok(TerminalSpec {
            kind,
            lower_bound,
            cap: None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            TerminalKind::Identity => "identity",
            TerminalKind::Square => "square",
            TerminalKind::Tanh => "tanh",
            TerminalKind::PositivePart => "positive-part",
            TerminalKind::Zero => "zero",
            TerminalKind::Constant { .. } => "constant",
            TerminalKind::Sampled { .. } => "sampled",
        }
    }

    /// Uncapped `phi(x)`.
    pub fn base(&self, x: f64) -> f64 {
        match &self.kind {
            TerminalKind::Identity => x,
            TerminalKind::Square => x * x,
            TerminalKind::Tanh => x.tanh(),
            TerminalKind::PositivePart => x.max(0.0),
            TerminalKind::Zero => 0.0,
            TerminalKind::Constant { c } => *c,
            TerminalKind::Sampled { table } => table.eval(x),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self.cap {
            Some(c) => self.base(x).min(c),
            None => self.base(x),
        }
    }
}

/// `phi^n = phi ∧ n`. The declared lower bound becomes `min(C, n)`.
pub fn truncate_terminal(phi: &TerminalSpec, n: u32) -> Result<TerminalSpec> {
    if n < 1 {
        return Err(Error::InvalidLevel(n));
    }
    let n = n as f64;
    Ok(TerminalSpec {
        kind: phi.kind.clone(),
        lower_bound: phi.lower_bound.map(|c| c.min(n)),
        cap: Some(phi.cap.map_or(n, |c| c.min(n))),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_truncated_at_one() {
        let phi = TerminalSpec::new(TerminalKind::Identity).unwrap();
        let t = truncate_terminal(&phi, 1).unwrap();
        for x in [-3.0, 0.0, 0.5, 1.0, 2.0, 10.0] {
            assert_eq!(t.eval(x), x.min(1.0));
        }
    }

    #[test]
    fn bounded_terminal_unchanged() {
        let phi = TerminalSpec::new(TerminalKind::Tanh).unwrap();
        let t = truncate_terminal(&phi, 1).unwrap();
        for x in [-3.0, 0.0, 0.5, 20.0] {
            assert_eq!(t.eval(x), x.tanh());
        }
    }

    #[test]
    fn square_truncated_at_four() {
        let phi = TerminalSpec::new(TerminalKind::Square).unwrap();
        let t = truncate_terminal(&phi, 4).unwrap();
        assert_eq!(t.eval(1.5), 2.25);
        assert_eq!(t.eval(-3.0), 4.0);
        assert_eq!(t.lower_bound, Some(0.0));
    }

    #[test]
    fn level_zero_rejected() {
        let phi = TerminalSpec::new(TerminalKind::Zero).unwrap();
        assert!(truncate_terminal(&phi, 0).is_err());
    }
}
