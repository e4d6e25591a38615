use super::grid::{Axis, GridFunction};
use crate::error::{Error, Result};

/// Relative change between `q(a)` and `q(a/2)` above which the quotient counts as
/// still growing at the box edge.
const STABLE_REL: f64 = 1e-2;

/// Horizon function `h^inf(y) = lim_a (h(x0 + a y) - h(x0)) / a` for convex `h`,
/// sampled on `directions`.
///
/// `x0` is the finite node closest to the box centre. The quotient is read at the
/// largest `a` that keeps `x0 + a y` in the box; nodes where it has not stabilised are
/// flagged saturated. Directions leaving the effective domain get `+inf`.
pub fn horizon_function(h: &GridFunction, directions: &[Axis]) -> Result<GridFunction> {
    if directions.len() != h.dim() {
        return Err(Error::GridMismatch(format!(
            "direction grid has dimension {}, function has {}",
            directions.len(),
            h.dim()
        )));
    }
    if !h.is_proper() {
        return Err(Error::ImproperFunction);
    }
    if !h.check_convex(h.convexity_tol())? {
        return Err(Error::NotConvex);
    }
    horizon_unchecked(h, directions)
}

/// [`horizon_function`] without the convexity check, for callers that already know.
pub(crate) fn horizon_unchecked(h: &GridFunction, directions: &[Axis]) -> Result<GridFunction> {
    let anchor = anchor_node(h);
    let x0 = h.point(anchor);
    let h0 = h.values()[anchor];
    let quotient = |y: &[f64], a: f64| -> f64 {
        let p: Vec<f64> = x0.iter().zip(y).map(|(x, d)| x + a * d).collect();
        let v = h.interpolate(&p).unwrap_or(f64::INFINITY);
        if v.is_infinite() {
            f64::INFINITY
        } else {
            (v - h0) / a
        }
    };

    let out = GridFunction::new(directions.to_vec(), vec![0.0; directions.iter().map(|a| a.n).product()])?;
    let mut values = Vec::with_capacity(out.len());
    let mut saturated = Vec::with_capacity(out.len());
    for k in 0..out.len() {
        let y = out.point(k);
        let Some(a_max) = max_step(h.axes(), &x0, &y) else {
            values.push(0.0);
            saturated.push(false);
            continue;
        };
        let q = quotient(&y, a_max);
        let q_half = quotient(&y, 0.5 * a_max);
        let sat = q.is_finite() && (q - q_half).abs() > STABLE_REL * q.abs().max(1.0);
        values.push(q);
        saturated.push(sat);
    }
    let mut g = out.with_values(values)?;
    g.saturated = saturated;
    Ok(g)
}

fn anchor_node(h: &GridFunction) -> usize {
    let centre: Vec<f64> = h.axes().iter().map(|a| 0.5 * (a.lo + a.hi)).collect();
    (0..h.len())
        .filter(|&k| h.values()[k].is_finite())
        .min_by(|&a, &b| {
            let d = |k: usize| -> f64 { h.point(k).iter().zip(&centre).map(|(x, c)| (x - c) * (x - c)).sum() };
            d(a).total_cmp(&d(b)).then(a.cmp(&b))
        })
        .expect("proper function has a finite node")
}

/// Largest `a > 0` with `x0 + a y` inside the box; `None` for `y = 0`.
fn max_step(axes: &[Axis], x0: &[f64], y: &[f64]) -> Option<f64> {
    let mut a = f64::INFINITY;
    for ((ax, &x), &d) in axes.iter().zip(x0).zip(y) {
        if d > 0.0 {
            a = a.min((ax.hi - x) / d);
        } else if d < 0.0 {
            a = a.min((ax.lo - x) / d);
        }
    }
    (a.is_finite() && a > 0.0).then_some(a)
}
