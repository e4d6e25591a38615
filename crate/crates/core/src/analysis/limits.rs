use serde::{Deserialize, Serialize};
use serde_json::json;

use super::report::CheckReport;
use crate::convexlab::{epi_liminf, Axis, EpiMode, EpiSequence, GridFunction, TailPolicy};
use crate::error::{Error, Result};

const MONOTONE_TOL: f64 = 1e-12;

/// For a non-decreasing sequence of continuous grid functions, the lower envelope
/// `h_*(z) = min over tail n and |z' - z| <= 1/n of h^n(z')` recovers `sup_n h^n` on the
/// interior up to `2 eps_grid`. Member index `m` counts as `n = m + 1`.
pub fn monotone_limit_check(seq: &EpiSequence) -> Result<CheckReport> {
    let members = seq.members();
    for (m, w) in members.windows(2).enumerate() {
        let drop = w[0]
            .values()
            .iter()
            .zip(w[1].values())
            .map(|(a, b)| a - b)
            .fold(0.0, f64::max);
        if drop > MONOTONE_TOL {
            return Err(Error::InvalidArgument(format!(
                "sequence decreases by {drop:e} between members {} and {}",
                m + 1,
                m + 2
            )));
        }
    }
    let last = &members[members.len() - 1];
    let start = seq.tail_start();
    let fp = json!({
        "members": members.len(),
        "tail_start": start + 1,
        "dim": last.dim(),
        "nodes": last.len(),
    });
    let mut report = CheckReport::new("monotone_limit", fp);
    let eps = last.grid_modulus();
    let mut gap: f64 = 0.0;
    for k in 0..last.len() {
        if last.on_box_edge(k) {
            continue;
        }
        let mut lower = f64::INFINITY;
        for (m, h) in members.iter().enumerate().skip(start) {
            lower = lower.min(ball_min(h, k, 1.0 / (m + 1) as f64));
        }
        let sup = last.values()[k];
        if lower.is_finite() || sup.is_finite() {
            gap = gap.max((lower - sup).abs());
        }
    }
    report.gap("envelope_gap", gap, 2.0 * eps).measure("eps_grid", eps);
    Ok(report.conclude(true))
}

/// Minimum of `h` over grid nodes within Euclidean distance `r` of node `k`.
fn ball_min(h: &GridFunction, k: usize, r: f64) -> f64 {
    let idx = h.multi_index(k);
    let axes = h.axes();
    let reach: Vec<usize> = axes.iter().map(|a| (r / a.spacing() + 1e-9).floor() as usize).collect();
    let mut best = f64::INFINITY;
    match axes.len() {
        1 => {
            let (lo, hi) = (idx[0].saturating_sub(reach[0]), (idx[0] + reach[0]).min(axes[0].n - 1));
            for i in lo..=hi {
                best = best.min(h.values()[i]);
            }
        }
        _ => {
            let (h0, h1) = (axes[0].spacing(), axes[1].spacing());
            let i0 = idx[0].saturating_sub(reach[0])..=(idx[0] + reach[0]).min(axes[0].n - 1);
            for i in i0 {
                let j0 = idx[1].saturating_sub(reach[1])..=(idx[1] + reach[1]).min(axes[1].n - 1);
                for j in j0 {
                    let di = (i as f64 - idx[0] as f64) * h0;
                    let dj = (j as f64 - idx[1] as f64) * h1;
                    if di * di + dj * dj <= r * r * (1.0 + 1e-12) {
                        best = best.min(h.at(&[i, j]));
                    }
                }
            }
        }
    }
    best
}

/// Closed-form sequences used to exercise the limit operators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LimitFamily {
    /// `|z - (-1)^n|`: PK limit `min(|z-1|, |z+1|)`, CC limit `(|z| - 1)^+`.
    Oscillating { count: usize },
    /// `(z - 1/n)^2`: every mode tends to `z^2`.
    ShiftedParabola { count: usize, tail: usize },
    /// `z^2 (1 - 1/(n+1))`, non-decreasing; for [`monotone_limit_check`].
    ScaledParabola { count: usize, tail: usize },
}

impl LimitFamily {
    pub fn name(&self) -> &'static str {
        match self {
            LimitFamily::Oscillating { .. } => "oscillating",
            LimitFamily::ShiftedParabola { .. } => "shifted-parabola",
            LimitFamily::ScaledParabola { .. } => "scaled-parabola",
        }
    }

    pub fn sequence(&self, axis: Axis) -> Result<EpiSequence> {
        let build = |count: usize, f: &dyn Fn(usize, f64) -> f64| -> Result<Vec<GridFunction>> {
            (1..=count)
                .map(|n| GridFunction::from_fn_1d(axis, |z| f(n, z)))
                .collect()
        };
        match *self {
            LimitFamily::Oscillating { count } => EpiSequence::new(
                build(count, &|n, z| (z - if n % 2 == 0 { 1.0 } else { -1.0 }).abs())?,
                TailPolicy::Full,
            ),
            LimitFamily::ShiftedParabola { count, tail } => EpiSequence::new(
                build(count, &|n, z| (z - 1.0 / n as f64).powi(2))?,
                TailPolicy::LastK(tail),
            ),
            LimitFamily::ScaledParabola { count, tail } => EpiSequence::new(
                build(count, &|n, z| z * z * (1.0 - 1.0 / (n + 1) as f64))?,
                TailPolicy::LastK(tail),
            ),
        }
    }
}

/// Runs the family through the matching operator and compares with its closed form.
pub fn check_limit_family(family: &LimitFamily, axis: Axis) -> Result<CheckReport> {
    let seq = family.sequence(axis)?;
    let report = match family {
        LimitFamily::ScaledParabola { count, .. } => {
            let mut r = monotone_limit_check(&seq)?;
            let zmax = axis.lo.abs().max(axis.hi.abs());
            r.measure("closed_form_slack", zmax * zmax / (*count + 1) as f64);
            r.fingerprint = json!({ "family": family, "axis": axis, "sequence": r.fingerprint });
            r
        }
        LimitFamily::Oscillating { .. } => {
            let mut r = CheckReport::new("epi_limit", json!({ "family": family, "axis": axis }));
            let pk = epi_liminf(&seq, EpiMode::Pk)?;
            let cc = epi_liminf(&seq, EpiMode::Cc)?;
            let exact_pk = |z: f64| (z - 1.0).abs().min((z + 1.0).abs());
            let exact_cc = |z: f64| (z.abs() - 1.0).max(0.0);
            r.gap("pk_gap", sup_gap(&pk, exact_pk), 1e-12)
                .gap("cc_gap", sup_gap(&cc, exact_cc), 1e-12);
            r
        }
        LimitFamily::ShiftedParabola { .. } => {
            let mut r = CheckReport::new("epi_limit", json!({ "family": family, "axis": axis }));
            let exact = GridFunction::from_fn_1d(axis, |z| z * z)?;
            let eps = exact.grid_modulus();
            for (key, mode) in [("pk_gap", EpiMode::Pk), ("cc_gap", EpiMode::Cc)] {
                let lim = epi_liminf(&seq, mode)?;
                r.gap(key, sup_gap(&lim, |z| z * z), eps);
            }
            r
        }
    };
    Ok(report.with_scenario(family.name()))
}

fn sup_gap(f: &GridFunction, exact: impl Fn(f64) -> f64) -> f64 {
    (0..f.len())
        .map(|k| (f.values()[k] - exact(f.point(k)[0])).abs())
        .fold(0.0, f64::max)
}
