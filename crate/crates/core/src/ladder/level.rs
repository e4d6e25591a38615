use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generator::{GeneratorSpec, Part, ProbeGrid3};
use super::terminal::{truncate_terminal, TerminalSpec};
use crate::convexlab::Axis;
use crate::error::{Error, Result};

/// `g*(a, b, c) = max over probe nodes of a x + b y + c z - g(x, y, z)` on the dual box
/// `|a| ∨ |b| ∨ |c| <= n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjugateTable {
    pub radius: f64,
    pub dual: ProbeGrid3,
    pub probe: ProbeGrid3,
    pub values: Vec<f64>,
    /// Supremum attained only on the probe-box edge.
    pub saturated: Vec<bool>,
}

pub fn conjugate_full(g: &GeneratorSpec, radius: f64, dual_spacing: f64, probe: &ProbeGrid3) -> Result<ConjugateTable> {
    if !g.flags.convex_xyz {
        return Err(Error::NotJointlyConvex);
    }
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "dual radius must be positive, got {radius}"
        )));
    }
    let axis = Axis::with_spacing(-radius, radius, dual_spacing)?;
    let dual = ProbeGrid3 {
        x: axis,
        y: axis,
        z: axis,
    };
    let nodes: Vec<([f64; 3], f64, bool)> = (0..probe.len())
        .map(|m| {
            let p = probe.point(m);
            (p, g.eval(p[0], p[1], p[2]), probe.on_edge(m))
        })
        .collect();
    let scale = nodes.iter().fold(0.0f64, |s, n| s.max(n.1.abs()));
    let (values, saturated) = (0..dual.len())
        .into_par_iter()
        .map(|m| {
            let th = dual.point(m);
            let mut all = f64::NEG_INFINITY;
            let mut inner = f64::NEG_INFINITY;
            for (p, v, edge) in &nodes {
                let s = th[0] * p[0] + th[1] * p[1] + th[2] * p[2] - v;
                all = all.max(s);
                if !edge {
                    inner = inner.max(s);
                }
            }
            (all, inner < all - 1e-12 * (1.0 + scale + all.abs()))
        })
        .unzip();
    Ok(ConjugateTable {
        radius,
        dual,
        probe: *probe,
        values,
        saturated,
    })
}

/// How `g^n` is evaluated.
#[derive(Debug, Clone)]
pub enum GnEvaluator {
    /// Coordinate-wise closed form of the truncated sup.
    ClosedForm([ClosedPart; 3]),
    /// Sup over the unsaturated nodes of a conjugate table: `(theta, g*(theta))`.
    Table(Vec<([f64; 3], f64)>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedPart {
    part: Part,
    n: f64,
}

impl ClosedPart {
    /// `sup_{|t| <= n} t s - part*(t)`.
    fn eval(self, s: f64) -> f64 {
        let n = self.n;
        match self.part {
            Part::Zero => 0.0,
            Part::Abs(c) => c.min(n) * s.abs(),
            Part::Quad(c) => {
                if (2.0 * c * s).abs() <= n {
                    c * s * s
                } else {
                    n * s.abs() - n * n / (4.0 * c)
                }
            }
            Part::Linear(k) => k * s,
        }
    }

    fn lipschitz(self) -> f64 {
        match self.part {
            Part::Zero => 0.0,
            Part::Abs(c) => c.min(self.n),
            Part::Quad(_) => self.n,
            Part::Linear(k) => k.abs(),
        }
    }
}

impl GnEvaluator {
    pub fn eval(&self, x: f64, y: f64, z: f64) -> f64 {
        match self {
            GnEvaluator::ClosedForm([a, b, c]) => a.eval(x) + b.eval(y) + c.eval(z),
            GnEvaluator::Table(rows) => rows
                .iter()
                .map(|(t, v)| t[0] * x + t[1] * y + t[2] * z - v)
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// The `n`-th rung: Lipschitz generator `g^n` and truncated terminal `phi^n`.
#[derive(Debug, Clone)]
pub struct LadderLevel {
    pub n: u32,
    pub generator: GeneratorSpec,
    pub evaluator: GnEvaluator,
    pub terminal: Option<TerminalSpec>,
    /// Per-coordinate Lipschitz bounds of `g^n` in `(x, y, z)`; each is at most `n`.
    pub lipschitz: [f64; 3],
    /// Probe grid of the conjugate table, for table-based levels.
    pub probe: Option<ProbeGrid3>,
    pub dual_spacing: Option<f64>,
}

impl LadderLevel {
    pub fn gn(&self, x: f64, y: f64, z: f64) -> f64 {
        self.evaluator.eval(x, y, z)
    }

    /// `phi^n(x)`.
    pub fn phi(&self, x: f64) -> f64 {
        self.terminal
            .as_ref()
            .expect("ladder level built without a terminal")
            .eval(x)
    }

    pub fn with_terminal(mut self, phi: &TerminalSpec) -> Result<Self> {
        self.terminal = Some(truncate_terminal(phi, self.n)?);
        Ok(self)
    }

    /// Nominal Lipschitz bound used for step-size control.
    pub fn nominal_lipschitz(&self) -> f64 {
        self.n as f64
    }
}

/// `g^n` from its closed form when the generator has one, else from a conjugate table
/// on the generator's own sampling grid with dual spacing `n / 10`.
pub fn build_gn(g: &GeneratorSpec, n: u32) -> Result<LadderLevel> {
    if n < 1 {
        return Err(Error::InvalidLevel(n));
    }
    if !g.flags.convex_xyz {
        return Err(Error::NotJointlyConvex);
    }
    if let Some(parts) = g.parts() {
        let nf = n as f64;
        let closed = parts.map(|part| ClosedPart { part, n: nf });
        for c in &closed {
            if let Part::Linear(k) = c.part {
                if k.abs() > nf {
                    return Err(Error::InvalidArgument(format!(
                        "linear generator slope {k} exceeds ladder level {n}; the truncated sup is empty"
                    )));
                }
            }
        }
        let lipschitz = closed.map(|c| c.lipschitz());
        return Ok(LadderLevel {
            n,
            generator: g.clone(),
            evaluator: GnEvaluator::ClosedForm(closed),
            terminal: None,
            lipschitz,
            probe: None,
            dual_spacing: None,
        });
    }
    match &g.kind {
        super::GeneratorKind::Sampled { table } => build_gn_tabulated(g, n, &table.grid, n as f64 / 10.0),
        _ => Err(Error::NotJointlyConvex),
    }
}

/// `g^n` by brute-force conjugation on `probe`, whatever the generator kind.
pub fn build_gn_tabulated(g: &GeneratorSpec, n: u32, probe: &ProbeGrid3, dual_spacing: f64) -> Result<LadderLevel> {
    if n < 1 {
        return Err(Error::InvalidLevel(n));
    }
    let table = conjugate_full(g, n as f64, dual_spacing, probe)?;
    let excluded = table.saturated.iter().filter(|s| **s).count();
    if excluded > 0 {
        warn!(
            "level {n}: excluding {excluded} of {} dual nodes whose conjugate saturates at the probe box",
            table.values.len()
        );
    }
    let rows: Vec<([f64; 3], f64)> = (0..table.values.len())
        .filter(|&m| !table.saturated[m])
        .map(|m| (table.dual.point(m), table.values[m]))
        .collect();
    if rows.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "every dual node saturates at level {n}; enlarge the probe box"
        )));
    }
    let mut lipschitz = [0.0f64; 3];
    for (t, _) in &rows {
        for d in 0..3 {
            lipschitz[d] = lipschitz[d].max(t[d].abs());
        }
    }
    Ok(LadderLevel {
        n,
        generator: g.clone(),
        evaluator: GnEvaluator::Table(rows),
        terminal: None,
        lipschitz,
        probe: Some(*probe),
        dual_spacing: Some(dual_spacing),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneReport {
    /// `max (g^n - g^{n+1})^+` over probes and consecutive pairs.
    pub max_step_violation: f64,
    /// `max (g^n - g)^+` over probes and levels.
    pub max_excess: f64,
    pub tolerance: f64,
    pub pass: bool,
}

pub fn verify_monotone_ladder(levels: &[LadderLevel], probe: &ProbeGrid3, tolerance: f64) -> Result<MonotoneReport> {
    let first = levels.first().ok_or(Error::EmptySequence)?;
    for l in levels {
        if l.generator != first.generator {
            return Err(Error::GridMismatch("levels come from different generators".into()));
        }
        if let Some(p) = &l.probe {
            if p != probe {
                return Err(Error::GridMismatch(format!(
                    "level {} was tabulated on a different probe grid",
                    l.n
                )));
            }
        }
    }
    let g = &first.generator;
    let (step, excess) = (0..probe.len())
        .into_par_iter()
        .map(|m| {
            let [x, y, z] = probe.point(m);
            let gv = g.eval(x, y, z);
            let vals: Vec<f64> = levels.iter().map(|l| l.gn(x, y, z)).collect();
            let step = vals.windows(2).map(|w| (w[0] - w[1]).max(0.0)).fold(0.0, f64::max);
            let excess = vals.iter().map(|v| (v - gv).max(0.0)).fold(0.0, f64::max);
            (step, excess)
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)));
    Ok(MonotoneReport {
        max_step_violation: step,
        max_excess: excess,
        tolerance,
        pass: step <= tolerance && excess <= tolerance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderManifest {
    pub generator: String,
    pub n_levels: usize,
    pub dual_spacing: Option<f64>,
    pub lipschitz_bounds: Vec<[f64; 3]>,
    pub max_monotonicity_violation: f64,
}

impl LadderManifest {
    pub fn new(levels: &[LadderLevel], report: &MonotoneReport) -> Self {
        LadderManifest {
            generator: levels.first().map_or("", |l| l.generator.name()).to_string(),
            n_levels: levels.len(),
            dual_spacing: levels.first().and_then(|l| l.dual_spacing),
            lipschitz_bounds: levels.iter().map(|l| l.lipschitz).collect(),
            max_monotonicity_violation: report.max_step_violation.max(report.max_excess),
        }
    }
}
