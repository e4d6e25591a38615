use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::surface::{BoundaryPolicy, LevelTag, ValueSurface};
use crate::convexlab::Axis;
use crate::error::{Error, Result};
use crate::forward::DiffusionSpec;
use crate::ladder::{build_gn, GeneratorSpec, LadderLevel, TerminalSpec};

/// Space-time discretisation of the explicit scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub x_lo: f64,
    pub x_hi: f64,
    pub dx: f64,
    /// Fixed time step; `None` picks `cfl_target * dt_max`.
    pub dt: Option<f64>,
    pub cfl_target: f64,
    /// Number of time steps is rounded up to a multiple of this.
    pub time_alignment: usize,
    /// Lower clamp on generator evaluations; `None` leaves `g^n` untouched.
    pub generator_floor: Option<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            x_lo: -6.0,
            x_hi: 6.0,
            dx: 0.02,
            dt: None,
            cfl_target: 0.9,
            time_alignment: 20,
            generator_floor: None,
        }
    }
}

impl GridConfig {
    pub fn axis(&self) -> Result<Axis> {
        Axis::with_spacing(self.x_lo, self.x_hi, self.dx)
    }
}

/// Bounds of `|mu|` and `|sigma|` over the space grid and horizon (affine coefficients
/// attain them at the corners).
fn coefficient_bounds(d: &DiffusionSpec, axis: &Axis) -> (f64, f64) {
    let mut mu: f64 = 0.0;
    let mut sig: f64 = 0.0;
    for t in [0.0, d.horizon] {
        for x in [axis.lo, axis.hi] {
            mu = mu.max(d.mu(t, x).abs());
            sig = sig.max(d.sigma(t, x).abs());
        }
    }
    (mu, sig)
}

/// Largest step for which the explicit scheme is monotone at Lipschitz level `n`.
pub fn max_stable_dt(d: &DiffusionSpec, axis: &Axis, n: f64) -> f64 {
    let (mu, sig) = coefficient_bounds(d, axis);
    let h = axis.spacing();
    1.0 / (sig * sig / (h * h) + mu / h + n * (1.0 + sig) / h.min(1.0))
}

/// Time-step count and the step actually used.
pub fn time_steps(d: &DiffusionSpec, cfg: &GridConfig, n: f64) -> Result<(usize, f64, f64)> {
    let axis = cfg.axis()?;
    let dt_max = max_stable_dt(d, &axis, n);
    let steps = match cfg.dt {
        Some(dt) => {
            if dt > dt_max * (1.0 + 1e-12) {
                return Err(Error::Cfl { dt, max_dt: dt_max });
            }
            (d.horizon / dt).round().max(1.0) as usize
        }
        None => {
            let raw = (d.horizon / (cfg.cfl_target * dt_max)).ceil() as usize;
            let a = cfg.time_alignment.max(1);
            raw.div_ceil(a) * a
        }
    };
    let dt = d.horizon / steps as f64;
    if dt > dt_max * (1.0 + 1e-12) {
        return Err(Error::Cfl { dt, max_dt: dt_max });
    }
    Ok((steps, dt, dt_max))
}

/// Explicit backward sweep for `-v_t - [mu v_x + sigma^2/2 v_xx + g^n(x, v, sigma v_x)] = 0`.
struct Scheme<'a> {
    level: &'a LadderLevel,
    d: &'a DiffusionSpec,
    axis: Axis,
    /// Lipschitz bound in `z` used for the upwind switch; shared across a ladder.
    theta: f64,
    floor: Option<f64>,
}

impl Scheme<'_> {
    fn step(&self, t: f64, dt: f64, next: &[f64], out: &mut [f64]) {
        let h = self.axis.spacing();
        let n = next.len();
        for i in 1..n - 1 {
            let x = self.axis.node(i);
            let mu = self.d.mu(t, x);
            let sig = self.d.sigma(t, x);
            let (vm, v, vp) = (next[i - 1], next[i], next[i + 1]);
            let central = (vp - vm) / (2.0 * h);
            let d2 = (vp - 2.0 * v + vm) / (h * h);
            let upwind = sig * sig < (mu.abs() + self.theta * sig.abs()) * h;
            let (drift, visc) = if upwind {
                let fwd = if mu > 0.0 { (vp - v) / h } else { (v - vm) / h };
                (mu * fwd, (0.5 * self.theta * sig.abs() * h - 0.5 * sig * sig).max(0.0))
            } else {
                (mu * central, 0.0)
            };
            let mut g = self.level.gn(x, v, sig * central);
            if let Some(f) = self.floor {
                g = g.max(f);
            }
            out[i] = v + dt * (drift + (0.5 * sig * sig + visc) * d2 + g);
        }
        out[0] = 2.0 * out[1] - out[2];
        out[n - 1] = 2.0 * out[n - 2] - out[n - 3];
    }
}

fn solve_with(
    level: &LadderLevel,
    d: &DiffusionSpec,
    cfg: &GridConfig,
    steps: usize,
    dt_max: f64,
    theta: f64,
) -> Result<ValueSurface> {
    let phi = level
        .terminal
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("ladder level has no terminal".into()))?;
    let axis = cfg.axis()?;
    let (_, sig) = coefficient_bounds(d, &axis);
    let dt = d.horizon / steps as f64;
    let mut s = ValueSurface {
        horizon: d.horizon,
        steps,
        x: axis,
        values: vec![0.0; (steps + 1) * axis.n],
        boundary: BoundaryPolicy::LinearExtrapolation,
        level: LevelTag::Level(level.n),
        cfl_ratio: dt / dt_max,
        window_rate: 3.0 * sig,
        terminal: Some(phi.clone()),
    };
    for (i, v) in s.row_mut(steps).iter_mut().enumerate() {
        *v = phi.eval(axis.node(i));
    }
    let scheme = Scheme {
        level,
        d,
        axis,
        theta,
        floor: cfg.generator_floor,
    };
    let n = axis.n;
    for j in (0..steps).rev() {
        let t_next = s.time(j + 1);
        let (head, tail) = s.values.split_at_mut((j + 1) * n);
        let out = &mut head[j * n..];
        scheme.step(t_next, dt, &tail[..n], out);
        if let Some(i) = out.iter().position(|v| !v.is_finite()) {
            return Err(Error::NanProduced { j, i });
        }
    }
    Ok(s)
}

/// `u_n` for a single ladder level (the level must carry its truncated terminal).
pub fn solve_pde_level(level: &LadderLevel, d: &DiffusionSpec, cfg: &GridConfig) -> Result<ValueSurface> {
    let n = level.nominal_lipschitz();
    let (steps, _, dt_max) = time_steps(d, cfg, n)?;
    solve_with(level, d, cfg, steps, dt_max, level.lipschitz[2])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LadderConfig {
    pub n_max: u32,
    pub tol: f64,
}

impl Default for LadderConfig {
    fn default() -> Self {
        LadderConfig { n_max: 32, tol: 1e-3 }
    }
}

/// Monotonicity violations beyond this are reported as errors.
pub const LADDER_DECREASE_LIMIT: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct LadderSolution {
    pub surface: ValueSurface,
    pub n_star: u32,
    pub converged: bool,
    /// `||u_{n+1} - u_n||_inf` on the reporting window for each consecutive pair.
    pub increments: Vec<f64>,
    /// Largest node-wise decrease `(u_n - u_{n+1})^+` over all nodes and pairs.
    pub max_decrease: f64,
    pub dt: f64,
}

/// Sweeps `n = 1, 2, ...` with a shared time step (set by `n_max`) and stops at the first
/// `n` with `||u_{n+1} - u_n|| <= tol`, returning `u_n`.
pub fn solve_ladder(
    g: &GeneratorSpec,
    phi: &TerminalSpec,
    d: &DiffusionSpec,
    cfg: &GridConfig,
    ladder: &LadderConfig,
) -> Result<LadderSolution> {
    run_ladder(g, phi, d, cfg, ladder, true)
}

/// All levels `1..=n_max` without early stopping; used to measure monotonicity.
pub fn ladder_sweep(
    g: &GeneratorSpec,
    phi: &TerminalSpec,
    d: &DiffusionSpec,
    cfg: &GridConfig,
    n_max: u32,
) -> Result<LadderSolution> {
    run_ladder(
        g,
        phi,
        d,
        cfg,
        &LadderConfig {
            n_max,
            tol: f64::NEG_INFINITY,
        },
        false,
    )
}

fn run_ladder(
    g: &GeneratorSpec,
    phi: &TerminalSpec,
    d: &DiffusionSpec,
    cfg: &GridConfig,
    ladder: &LadderConfig,
    stop_early: bool,
) -> Result<LadderSolution> {
    if ladder.n_max < 1 {
        return Err(Error::InvalidLevel(ladder.n_max));
    }
    if phi.lower_bound.is_none() {
        warn!(
            "terminal '{}' is not bounded below; the ladder limit may be -inf",
            phi.name()
        );
    }
    let top = build_gn(g, ladder.n_max)?;
    let (steps, dt, dt_max) = time_steps(d, cfg, top.nominal_lipschitz())?;
    let theta = top.lipschitz[2];
    let solve = |n: u32| -> Result<ValueSurface> {
        let level = build_gn(g, n)?.with_terminal(phi)?;
        solve_with(&level, d, cfg, steps, dt_max, theta)
    };
    let mut prev = solve(1)?;
    let mut increments = Vec::new();
    let mut max_decrease: f64 = 0.0;
    for n in 1..ladder.n_max {
        let next = solve(n + 1)?;
        let mut dec: f64 = 0.0;
        for (a, b) in prev.values.iter().zip(&next.values) {
            dec = dec.max(a - b);
        }
        if dec > LADDER_DECREASE_LIMIT {
            return Err(Error::LadderMonotonicity {
                n,
                next: n + 1,
                violation: dec,
            });
        }
        max_decrease = max_decrease.max(dec);
        let inc = window_sup_diff(&prev, &next);
        increments.push(inc);
        info!("ladder level {n} -> {}: window increment {inc:e}", n + 1);
        if stop_early && inc <= ladder.tol {
            prev.level = LevelTag::Limit(n);
            return Ok(LadderSolution {
                surface: prev,
                n_star: n,
                converged: true,
                increments,
                max_decrease,
                dt,
            });
        }
        prev = next;
    }
    if stop_early {
        warn!(
            "ladder did not converge to tol {} by n_max = {}",
            ladder.tol, ladder.n_max
        );
    }
    prev.level = LevelTag::Limit(ladder.n_max);
    Ok(LadderSolution {
        surface: prev,
        n_star: ladder.n_max,
        converged: !stop_early,
        increments,
        max_decrease,
        dt,
    })
}

fn window_sup_diff(a: &ValueSurface, b: &ValueSurface) -> f64 {
    let mut m: f64 = 0.0;
    for j in 0..=a.steps {
        for i in a.window_indices(j) {
            m = m.max((a.at(j, i) - b.at(j, i)).abs());
        }
    }
    m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverManifest {
    pub generator: String,
    pub levels_used: u32,
    pub cfl_ratio: f64,
    pub boundary_policy: BoundaryPolicy,
    pub tolerances: LadderConfig,
    pub converged: bool,
    pub dt: f64,
    pub dx: f64,
}

impl SolverManifest {
    pub fn new(g: &GeneratorSpec, sol: &LadderSolution, ladder: &LadderConfig) -> Self {
        SolverManifest {
            generator: g.name().to_string(),
            levels_used: sol.n_star,
            cfl_ratio: sol.surface.cfl_ratio,
            boundary_policy: sol.surface.boundary,
            tolerances: *ladder,
            converged: sol.converged,
            dt: sol.dt,
            dx: sol.surface.x.spacing(),
        }
    }
}
