use serde::{Deserialize, Serialize};
use serde_json::json;

use super::report::CheckReport;
use crate::backward::ValueSurface;
use crate::error::Result;
use crate::forward::DiffusionSpec;
use crate::ladder::GeneratorSpec;

/// Finite-difference stand-in for a parabolic semi-jet `(a, p, M)` at `(t_j, x_i)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscreteJet {
    pub t: f64,
    pub x: f64,
    pub u: f64,
    /// `(u^j - u^{j-1}) / dt`.
    pub a: f64,
    pub p: f64,
    pub m: f64,
}

/// Jet at time index `j` and space index `i`; `None` unless the node is at least one node
/// inside every edge of the reporting window.
pub fn discrete_jet(s: &ValueSurface, j: usize, i: usize) -> Option<DiscreteJet> {
    if j == 0 || j >= s.steps {
        return None;
    }
    let w = s.window_indices(j);
    if i <= *w.start() || i >= *w.end() {
        return None;
    }
    let h = s.x.spacing();
    let (um, u, up) = (s.at(j, i - 1), s.at(j, i), s.at(j, i + 1));
    Some(DiscreteJet {
        t: s.time(j),
        x: s.x.node(i),
        u,
        a: (u - s.at(j - 1, i)) / s.dt(),
        p: (up - um) / (2.0 * h),
        m: (up - 2.0 * u + um) / (h * h),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ViscosityConfig {
    /// Residual tolerance at `dx = 0.02`; scaled with `dx^2`.
    pub tol: f64,
    /// Nodes with `|M| dx` above this, and their neighbours, are treated as kinks.
    pub kink_threshold: f64,
}

impl Default for ViscosityConfig {
    fn default() -> Self {
        ViscosityConfig {
            tol: 1e-3,
            kink_threshold: 0.1,
        }
    }
}

/// `R = -a - [mu p + sigma^2 M / 2 + g(x, u, sigma p)]` at every interior jet; the
/// supersolution property asks `R >= -tol`. The semi-jet's little-o remainder is not
/// represented, only absorbed into the tolerance.
pub fn viscosity_residual(
    s: &ValueSurface,
    g: &GeneratorSpec,
    d: &DiffusionSpec,
    cfg: &ViscosityConfig,
) -> Result<CheckReport> {
    let h = s.x.spacing();
    let tol = cfg.tol * (h / 0.02).powi(2);
    let fp = json!({
        "generator": g.name(),
        "dx": h,
        "dt": s.dt(),
        "steps": s.steps,
        "horizon": s.horizon,
    });
    let mut report = CheckReport::new("viscosity", fp);
    let mut min_smooth = f64::INFINITY;
    let mut min_all = f64::INFINITY;
    let mut max_abs: f64 = 0.0;
    let mut nodes = 0usize;
    let mut kinks = 0usize;
    for j in 1..s.steps {
        let jets: Vec<Option<DiscreteJet>> = (0..s.x.n).map(|i| discrete_jet(s, j, i)).collect();
        let kink: Vec<bool> = jets
            .iter()
            .map(|q| q.is_some_and(|q| q.m.abs() * h > cfg.kink_threshold))
            .collect();
        for (i, q) in jets.iter().enumerate() {
            let Some(q) = q else { continue };
            let sig = d.sigma(q.t, q.x);
            let f = d.mu(q.t, q.x) * q.p + 0.5 * sig * sig * q.m + g.eval(q.x, q.u, sig * q.p);
            let r = -q.a - f;
            nodes += 1;
            min_all = min_all.min(r);
            max_abs = max_abs.max(r.abs());
            let flagged = kink[i] || (i > 0 && kink[i - 1]) || kink.get(i + 1).copied().unwrap_or(false);
            if flagged {
                kinks += 1;
            } else {
                min_smooth = min_smooth.min(r);
            }
        }
    }
    if kinks > 0 {
        report.note(format!("{kinks} kink-adjacent nodes excluded from the verdict"));
    }
    if nodes == 0 {
        report.note("no interior nodes");
    }
    let min_smooth = if min_smooth.is_finite() { min_smooth } else { 0.0 };
    report
        .gap("negative_residual", (-min_smooth).max(0.0), tol)
        .measure("min_residual", min_smooth)
        .measure("min_residual_all_nodes", if nodes > 0 { min_all } else { 0.0 })
        .measure("max_abs_residual", max_abs)
        .measure("interior_nodes", nodes as f64)
        .measure("kink_nodes", kinks as f64);
    report.note("discrete semi-jets approximate the viscosity test; remainder absorbed into tol");
    Ok(report.conclude(true))
}

/// Lower semicontinuity of `u(t, .)` on grid nodes: `u(x_i)` may not exceed both
/// one-sided linear continuations from the neighbouring cells by more than the grid
/// modulus of the rest of the row. Downward spikes are allowed.
pub fn check_lsc(s: &ValueSurface, t: f64) -> Result<CheckReport> {
    let j = s.time_index(t)?;
    let fp = json!({ "t": s.time(j), "dx": s.x.spacing(), "steps": s.steps });
    let mut report = CheckReport::new("lsc", fp);
    let row = s.row(j);
    let diffs: Vec<f64> = row.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let mut prefix = vec![0.0f64; diffs.len() + 1];
    for k in 0..diffs.len() {
        prefix[k + 1] = prefix[k].max(diffs[k]);
    }
    let mut suffix = vec![0.0f64; diffs.len() + 1];
    for k in (0..diffs.len()).rev() {
        suffix[k] = suffix[k + 1].max(diffs[k]);
    }
    let w = s.window_indices(j);
    let mut excess = f64::NEG_INFINITY;
    let mut worst = None;
    for i in (*w.start() + 2)..=w.end().saturating_sub(2) {
        // modulus without the two differences touching node i
        let eps = prefix[i - 1].max(suffix[i + 1]);
        let left = 2.0 * row[i - 1] - row[i - 2];
        let right = 2.0 * row[i + 1] - row[i + 2];
        let e = row[i] - left.max(right) - eps - 1e-12 * (1.0 + row[i].abs());
        if e > excess {
            excess = e;
            worst = Some(i);
        }
    }
    if let Some(i) = worst {
        report.measure("worst_x", s.x.node(i));
        if excess > 0.0 {
            report.note(format!("lsc violated at x = {}", s.x.node(i)));
        }
    }
    report.gap("lsc_excess", excess.max(0.0), 0.0);
    Ok(report.conclude(true))
}
