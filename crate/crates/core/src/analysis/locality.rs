use serde::{Deserialize, Serialize};
use serde_json::json;

use super::report::CheckReport;
use crate::backward::{solve_bsde_mc, BsdePathSolution, Grouping, RegressionConfig};
use crate::error::Result;
use crate::forward::{concatenate, mean_var, simulate_stream, DiffusionSpec, PathBundle};
use crate::ladder::{build_gn, GeneratorSpec, TerminalSpec};

/// `F_t`-measurable event selecting the paths that keep the first dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EventRule {
    Always,
    Never,
    /// `{X_t > x_0}`.
    AboveStart,
    Above {
        level: f64,
    },
}

impl EventRule {
    /// Evaluates the rule on each path of `a` at step `k`.
    pub fn mask(&self, a: &PathBundle, k: usize) -> Vec<bool> {
        (0..a.n_paths)
            .map(|p| match *self {
                EventRule::Always => true,
                EventRule::Never => false,
                EventRule::AboveStart => a.state(p, k) > a.state(p, 0),
                EventRule::Above { level } => a.state(p, k) > level,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalityConfig {
    pub x0: f64,
    pub n_paths: usize,
    pub steps: usize,
    pub seed: u64,
    /// Ladder level of the generator and terminal used by all three solves.
    pub level: u32,
    pub regression: RegressionConfig,
    /// Combined standard errors allowed per mask cell.
    pub se_factor: f64,
}

impl Default for LocalityConfig {
    fn default() -> Self {
        LocalityConfig {
            x0: 0.0,
            n_paths: 100_000,
            steps: 50,
            seed: 0,
            level: 64,
            regression: RegressionConfig::default(),
            se_factor: 3.0,
        }
    }
}

/// Compares `E_s(X)` with `1_A E_s(X^1) + 1_{A^c} E_s(X^2)` cell by cell at
/// `s in {t, (t+T)/2}`, where `X` switches from `d1` to `d2` after `t` off `A`.
pub fn check_locality(
    g: &GeneratorSpec,
    phi: &TerminalSpec,
    d1: &DiffusionSpec,
    d2: &DiffusionSpec,
    t: f64,
    event: EventRule,
    cfg: &LocalityConfig,
) -> Result<CheckReport> {
    let horizon = d1.horizon;
    let fp = json!({
        "generator": g.name(),
        "terminal": phi.name(),
        "t": t,
        "event": event,
        "n_paths": cfg.n_paths,
        "steps": cfg.steps,
        "seed": cfg.seed,
        "level": cfg.level,
    });
    let mut report = CheckReport::new("locality", fp);
    let a = simulate_stream(d1, cfg.x0, 0.0, horizon, cfg.steps, cfg.n_paths, cfg.seed, 1)?;
    let b = simulate_stream(d2, cfg.x0, 0.0, horizon, cfg.steps, cfg.n_paths, cfg.seed, 2)?;
    let k = a.grid.index_of(t)?;
    let mask = event.mask(&a, k);
    let x2 = concatenate(&a, &b, t, &vec![false; cfg.n_paths])?;
    let x = concatenate(&a, &b, t, &mask)?;

    let level = build_gn(g, cfg.level)?.with_terminal(phi)?;
    let grouping = Grouping {
        labels: mask.iter().map(|&m| usize::from(!m)).collect(),
        from_step: k,
    };
    let sol_x = solve_bsde_mc(&level, &x, &cfg.regression, Some(&grouping))?;
    let sol_1 = solve_bsde_mc(&level, &a, &cfg.regression, None)?;
    let sol_2 = solve_bsde_mc(&level, &x2, &cfg.regression, None)?;

    let in_a = mask.iter().filter(|&&m| m).count();
    report.measure("cell_a_fraction", in_a as f64 / cfg.n_paths as f64);
    if in_a == 0 || in_a == cfg.n_paths {
        report.note("degenerate mask: one cell is empty, identity reduces to a single solve");
    }
    let mid = (k + cfg.steps) / 2;
    for (tag, s) in [("t", k), ("mid", mid)] {
        report.measure(&format!("s_{tag}"), a.grid.time(s));
        for (cell, other, label) in [("a", &sol_1, 0usize), ("ac", &sol_2, 1usize)] {
            let members: Vec<usize> = (0..cfg.n_paths).filter(|&p| grouping.labels[p] == label).collect();
            if members.is_empty() {
                continue;
            }
            let (lhs, rhs) = cell_means(&sol_x, other, &members, s);
            let se = group_se(&sol_x, s, label).hypot(other.propagated_se[s]);
            let key = format!("{cell}_{tag}");
            report
                .gap(&key, (lhs - rhs).abs(), cfg.se_factor * se)
                .measure(&format!("{key}_concatenated"), lhs)
                .measure(&format!("{key}_reference"), rhs)
                .measure(&format!("{key}_se"), se);
        }
    }
    Ok(report.conclude(true))
}

fn group_se(sol: &BsdePathSolution, s: usize, label: usize) -> f64 {
    let v = &sol.group_propagated_se[s];
    if v.len() == 1 {
        v[0]
    } else {
        v[label]
    }
}

fn cell_means(x: &BsdePathSolution, other: &BsdePathSolution, members: &[usize], s: usize) -> (f64, f64) {
    let lhs: Vec<f64> = members.iter().map(|&p| x.y_at(p, s)).collect();
    let rhs: Vec<f64> = members.iter().map(|&p| other.y_at(p, s)).collect();
    (mean_var(&lhs).0, mean_var(&rhs).0)
}
