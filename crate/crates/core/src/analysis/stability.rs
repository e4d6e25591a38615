use serde::{Deserialize, Serialize};
use serde_json::json;

use super::report::CheckReport;
use crate::backward::{solve_ladder, GridConfig, LadderConfig};
use crate::convexlab::{rec_check, RecCase, RecConfig, RecVerdict};
use crate::error::{Error, Result};
use crate::forward::DiffusionSpec;
use crate::ladder::{GeneratorSpec, TerminalSpec};

/// When the scenario asserts `u(0, x) = lim u(0, x_k)` in addition to the liminf bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EqualityClaim {
    /// `g` increasing in `x`, `phi` increasing and `x_k` increasing to `x`; verified on probes.
    Monotone,
    /// `u(0, .)` declared continuous by the scenario.
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilityConfig {
    pub grid: GridConfig,
    pub ladder: LadderConfig,
    pub rec: RecConfig,
    pub tol: f64,
    pub claim: Option<EqualityClaim>,
    /// Registry scenarios known to satisfy (REC) proceed even if `rec_check` is inconclusive.
    pub rec_known: bool,
    /// 1-based index where the tail of `x_sequence` starts; `None` is the second half.
    pub tail_from: Option<usize>,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        StabilityConfig {
            grid: GridConfig::default(),
            ladder: LadderConfig::default(),
            rec: RecConfig::default(),
            tol: 5e-3,
            claim: None,
            rec_known: false,
            tail_from: None,
        }
    }
}

/// `u(0, x) <= liminf u(0, x_k)` along `x_k -> x`, read off one ladder surface.
pub fn check_stability(
    g: &GeneratorSpec,
    phi: &TerminalSpec,
    d: &DiffusionSpec,
    x: f64,
    x_sequence: &[f64],
    cfg: &StabilityConfig,
) -> Result<CheckReport> {
    if x_sequence.is_empty() {
        return Err(Error::EmptySequence);
    }
    let fp = json!({
        "generator": g.name(),
        "terminal": phi.name(),
        "x": x,
        "x_sequence_len": x_sequence.len(),
        "x_last": x_sequence[x_sequence.len() - 1],
        "dx": cfg.grid.dx,
        "n_max": cfg.ladder.n_max,
    });
    let mut report = CheckReport::new("stability", fp);
    let mut seq = x_sequence.to_vec();
    seq.push(x);
    let rec = rec_check(g, &seq, RecCase::Auto, &cfg.rec)?;
    report.note(format!("rec_check: {:?} via case {:?}", rec.verdict, rec.case_used));
    if rec.verdict != RecVerdict::Pass {
        if !cfg.rec_known {
            return Ok(report.inconclusive("(REC) not established; stability bound not tested"));
        }
        report.note("(REC) taken from the scenario registry");
    }

    let sol = solve_ladder(g, phi, d, &cfg.grid, &cfg.ladder)?;
    let u = |x: f64| sol.surface.evaluate(0.0, x);
    let u_x = u(x)?;
    let values: Vec<f64> = x_sequence.iter().map(|&xk| u(xk)).collect::<Result<_>>()?;
    let start = cfg
        .tail_from
        .map(|k| k.saturating_sub(1))
        .unwrap_or(values.len() / 2)
        .min(values.len() - 1);
    let tail = &values[start..];
    let tail_min = tail.iter().copied().fold(f64::INFINITY, f64::min);
    let tail_sup = tail.iter().map(|v| (v - u_x).abs()).fold(0.0, f64::max);
    let last = values[values.len() - 1];
    report
        .gap("liminf_shortfall", (u_x - tail_min).max(0.0), cfg.tol)
        .measure("u_limit", u_x)
        .measure("tail_min", tail_min)
        .measure("tail_sup_gap", tail_sup)
        .measure("tail_start", (start + 1) as f64)
        .measure("n_star", sol.n_star as f64);

    let mut established = true;
    if let Some(claim) = cfg.claim {
        report.gap("limit_gap", (last - u_x).abs(), cfg.tol);
        if claim == EqualityClaim::Monotone {
            let failed = monotone_hypotheses(g, phi, x, x_sequence, &sol.surface.window(0.0));
            if !failed.is_empty() {
                established = false;
                report.note(format!("monotone hypotheses not verified: {}", failed.join(", ")));
            }
        }
    }
    Ok(report.conclude(established))
}

fn monotone_hypotheses(
    g: &GeneratorSpec,
    phi: &TerminalSpec,
    x: f64,
    xs: &[f64],
    window: &(f64, f64),
) -> Vec<&'static str> {
    let mut failed = Vec::new();
    if xs.windows(2).any(|w| w[1] < w[0]) || xs.iter().any(|&v| v > x) {
        failed.push("x_k increasing to x");
    }
    let probes: Vec<f64> = (0..=120)
        .map(|i| window.0 + (window.1 - window.0) * i as f64 / 120.0)
        .collect();
    if probes.windows(2).any(|w| phi.eval(w[1]) < phi.eval(w[0])) {
        failed.push("phi increasing");
    }
    let yz = [-1.0, 0.0, 1.0];
    let g_inc = probes.windows(2).all(|w| {
        yz.iter()
            .all(|&y| yz.iter().all(|&z| g.eval(w[1], y, z) >= g.eval(w[0], y, z)))
    });
    if !g_inc {
        failed.push("g increasing in x");
    }
    failed
}
