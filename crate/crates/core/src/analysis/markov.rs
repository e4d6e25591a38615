use serde::{Deserialize, Serialize};
use serde_json::json;

use super::report::CheckReport;
use crate::backward::{
    solve_bsde_mc, solve_ladder, solve_pde_level, time_steps, GridConfig, LadderConfig, RegressionConfig,
};
use crate::error::{Error, Result};
use crate::forward::{mean_var, shifted_diffusion, simulate, DiffusionSpec};
use crate::ladder::{build_gn, truncate_terminal, GeneratorSpec, TerminalSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarkovConfig {
    pub grid: GridConfig,
    pub ladder: LadderConfig,
    pub x0: f64,
    pub n_paths: usize,
    pub steps: usize,
    pub seed: u64,
    pub regression: RegressionConfig,
    pub buckets: usize,
    /// Scenario declares `u(t, .)` continuous (or monotone with a uniform lower bound),
    /// so the bucket-wise equality is required.
    pub equality: bool,
    pub se_factor: f64,
}

impl Default for MarkovConfig {
    fn default() -> Self {
        MarkovConfig {
            grid: GridConfig::default(),
            ladder: LadderConfig::default(),
            x0: 0.0,
            n_paths: 100_000,
            steps: 50,
            seed: 0,
            regression: RegressionConfig::default(),
            buckets: 20,
            equality: false,
            se_factor: 3.0,
        }
    }
}

/// `E_t(X) >= u(t, X_t)` on average, and bucket by bucket in `X_t` when equality is
/// claimed. `E_t(X)` is the pathwise MC estimate at the PDE's converged level.
pub fn check_markov_identity(
    g: &GeneratorSpec,
    phi: &TerminalSpec,
    d: &DiffusionSpec,
    t: f64,
    cfg: &MarkovConfig,
) -> Result<CheckReport> {
    let fp = json!({
        "generator": g.name(),
        "terminal": phi.name(),
        "t": t,
        "x0": cfg.x0,
        "dx": cfg.grid.dx,
        "n_paths": cfg.n_paths,
        "steps": cfg.steps,
        "seed": cfg.seed,
        "buckets": cfg.buckets,
    });
    let mut report = CheckReport::new("markov", fp);
    let sol = solve_ladder(g, phi, d, &cfg.grid, &cfg.ladder)?;
    let surface = &sol.surface;
    let j = surface.time_index(t)?;
    let bundle = simulate(d, cfg.x0, 0.0, d.horizon, cfg.steps, cfg.n_paths, cfg.seed)?;
    let i = bundle.grid.index_of(t)?;
    let t = surface.time(j);
    let level = build_gn(g, sol.n_star)?.with_terminal(phi)?;
    let mc = solve_bsde_mc(&level, &bundle, &cfg.regression, None)?;

    let xs = bundle.column(i);
    let ys = mc.pathwise_column(i);
    let mut pairs: Vec<(f64, f64, f64)> = Vec::with_capacity(xs.len());
    for (&x, &y) in xs.iter().zip(&ys) {
        if let Ok(u) = surface.evaluate(t, x) {
            pairs.push((x, y, u));
        }
    }
    let dropped = xs.len() - pairs.len();
    if dropped > 0 {
        report.note(format!("{dropped} paths outside the reporting window skipped"));
    }
    if pairs.is_empty() {
        return Err(Error::OutsideWindow { t, x: cfg.x0 });
    }
    report
        .measure("n_star", sol.n_star as f64)
        .measure("paths_used", pairs.len() as f64);

    let (gap, se) = mean_gap(&pairs);
    report
        .gap("one_sided", (-gap).max(0.0), cfg.se_factor * se)
        .measure("mean_gap", gap)
        .measure("mean_gap_se", se);

    if cfg.equality {
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let nb = cfg.buckets.clamp(1, pairs.len());
        let mut worst: f64 = 0.0;
        let mut worst_ratio = f64::NEG_INFINITY;
        let mut worst_tol = 0.0;
        for b in 0..nb {
            let chunk = &pairs[b * pairs.len() / nb..(b + 1) * pairs.len() / nb];
            let (gap, se) = mean_gap(chunk);
            let tol = cfg.se_factor * se;
            let ratio = if tol > 0.0 {
                gap.abs() / tol
            } else if gap != 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
            if ratio > worst_ratio {
                (worst, worst_ratio, worst_tol) = (gap.abs(), ratio, tol);
            }
        }
        report
            .gap("bucket_worst", worst, worst_tol)
            .measure("bucket_worst_ratio", worst_ratio);
    }
    Ok(report.conclude(true))
}

/// Mean of `E_t - u` and its standard error.
fn mean_gap(pairs: &[(f64, f64, f64)]) -> (f64, f64) {
    let diff: Vec<f64> = pairs.iter().map(|(_, y, u)| y - u).collect();
    let (m, v) = mean_var(&diff);
    (m, (v / diff.len() as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShiftConfig {
    pub grid: GridConfig,
    pub level: u32,
}

impl Default for ShiftConfig {
    fn default() -> Self {
        ShiftConfig {
            grid: GridConfig::default(),
            level: 16,
        }
    }
}

/// `u(t, x)` from the `[0, T]` solve against the shifted problem on `[0, T - t]` at
/// `(0, x)`, both at level `cfg.level` with the same time step.
pub fn check_shift_identity(
    g: &GeneratorSpec,
    phi: &TerminalSpec,
    d: &DiffusionSpec,
    t: f64,
    x: f64,
    cfg: &ShiftConfig,
) -> Result<CheckReport> {
    let fp = json!({
        "generator": g.name(),
        "terminal": phi.name(),
        "t": t,
        "x": x,
        "dx": cfg.grid.dx,
        "level": cfg.level,
    });
    let mut report = CheckReport::new("shift", fp);
    let level = build_gn(g, cfg.level)?.with_terminal(phi)?;
    if t == d.horizon {
        let truncated = truncate_terminal(phi, cfg.level)?.eval(x);
        let exact = phi.eval(x);
        report.note("t = T: shifted problem is the terminal condition");
        report.gap("gap", (exact - truncated).abs(), 0.0);
        return Ok(report.conclude(true));
    }
    let shifted = shifted_diffusion(d, t)?;
    let (steps, dt, _) = time_steps(d, &cfg.grid, level.nominal_lipschitz())?;
    let k = (t / dt).round();
    if (k * dt - t).abs() > 1e-9 * (1.0 + t) {
        return Err(Error::NotOnGrid(t));
    }
    report.measure("dt", dt).measure("steps", steps as f64);
    let fixed = |dx: f64| GridConfig {
        dx,
        dt: Some(dt),
        ..cfg.grid
    };
    let pair = |dx: f64| -> Result<(f64, f64)> {
        let c = fixed(dx);
        let full = solve_pde_level(&level, d, &c)?.evaluate(t, x)?;
        let short = solve_pde_level(&level, &shifted, &c)?.evaluate(0.0, x)?;
        Ok((full, short))
    };
    let (full, short) = pair(cfg.grid.dx)?;
    let (full2, short2) = pair(2.0 * cfg.grid.dx)?;
    let trunc = (full - full2).abs() + (short - short2).abs();
    let floor = 1e-12 * (1.0 + full.abs());
    report
        .gap("gap", (full - short).abs(), 2.0 * trunc + floor)
        .measure("u_full", full)
        .measure("u_shifted", short)
        .measure("truncation_estimate", trunc);
    Ok(report.conclude(true))
}
