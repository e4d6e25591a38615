use rayon::prelude::*;

use super::envelope::lsc_envelope;
use super::grid::{Axis, GridFunction};
use crate::error::{Error, Result};

/// Discrete Legendre–Fenchel transform `f*(p) = max_x <p, x> - f(x)` over finite nodes,
/// sampled on `dual_axes`.
///
/// A dual node is flagged saturated when the max over nodes strictly inside the box is
/// below the overall max, i.e. the supremum is only attained on the box edge.
pub fn legendre_conjugate(f: &GridFunction, dual_axes: &[Axis]) -> Result<GridFunction> {
    if dual_axes.is_empty() {
        return Err(Error::EmptyDualGrid);
    }
    if dual_axes.len() != f.dim() {
        return Err(Error::GridMismatch(format!(
            "dual grid has dimension {}, function has {}",
            dual_axes.len(),
            f.dim()
        )));
    }
    let cl = lsc_envelope(f)?;
    let nodes: Vec<(Vec<f64>, f64, bool)> = (0..cl.len())
        .filter(|&k| cl.values()[k].is_finite())
        .map(|k| (cl.point(k), cl.values()[k], cl.on_box_edge(k)))
        .collect();
    let scale = nodes.iter().fold(0.0f64, |m, n| m.max(n.1.abs()));

    let dual = GridFunction::new(dual_axes.to_vec(), vec![0.0; dual_axes.iter().map(|a| a.n).product()])?;
    let (values, saturated): (Vec<f64>, Vec<bool>) = (0..dual.len())
        .into_par_iter()
        .map(|k| {
            let p = dual.point(k);
            let mut all = f64::NEG_INFINITY;
            let mut inner = f64::NEG_INFINITY;
            for (x, v, edge) in &nodes {
                let s: f64 = p.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() - v;
                all = all.max(s);
                if !edge {
                    inner = inner.max(s);
                }
            }
            let tol = 1e-12 * (1.0 + scale + all.abs());
            (all, inner < all - tol)
        })
        .unzip();
    let mut g = dual.with_values(values)?;
    g.saturated = saturated;
    g.is_convex = true;
    g.is_lsc = true;
    Ok(g)
}

/// Dual axes with the given radius and node count per dimension.
pub fn dual_box(dim: usize, radius: f64, n: usize) -> Result<Vec<Axis>> {
    (0..dim).map(|_| Axis::new(-radius, radius, n)).collect()
}
