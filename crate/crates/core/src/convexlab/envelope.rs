use rayon::prelude::*;

use super::grid::GridFunction;
use crate::error::{Error, Result};

/// Closure of `f` on the grid.
///
/// Finite nodes are kept. A `+inf` node whose grid neighbours are all finite is an
/// isolated puncture; it gets the smallest one-sided linear continuation from its
/// neighbours. Every other `+inf` node borders a genuine hole and stays `+inf`.
pub fn lsc_envelope(f: &GridFunction) -> Result<GridFunction> {
    if !f.is_proper() {
        return Err(Error::ImproperFunction);
    }
    let v = f.values();
    let mut out = v.to_vec();
    for k in 0..v.len() {
        if v[k].is_finite() {
            continue;
        }
        let idx = f.multi_index(k);
        let mut all_finite = true;
        let mut best = f64::INFINITY;
        for d in 0..f.dim() {
            for step in [-1i64, 1] {
                let at = |m: i64| -> Option<f64> {
                    let mut i = idx.clone();
                    let j = i[d] as i64 + step * m;
                    if j < 0 || j as usize >= f.axes()[d].n {
                        return None;
                    }
                    i[d] = j as usize;
                    Some(v[f.flat_index(&i)])
                };
                let Some(f1) = at(1) else { continue };
                if !f1.is_finite() {
                    all_finite = false;
                    continue;
                }
                let cont = match at(2) {
                    Some(f2) if f2.is_finite() => 2.0 * f1 - f2,
                    _ => f1,
                };
                best = best.min(cont);
            }
        }
        if all_finite && best.is_finite() {
            out[k] = best;
        }
    }
    let mut g = f.with_values(out)?;
    g.is_lsc = true;
    Ok(g)
}

/// Closed convex envelope of `f`.
pub fn convexify(f: &GridFunction) -> Result<GridFunction> {
    let cl = lsc_envelope(f)?;
    let values = match cl.dim() {
        1 => hull_1d(cl.axes()[0].nodes().as_slice(), cl.values()),
        _ => hull_2d(&cl),
    };
    let mut g = cl.with_values(values)?;
    g.is_convex = true;
    g.is_lsc = true;
    Ok(g)
}

/// Replaces each fixed-`y` slice of a `(y, z)` function by its 1D closed convex envelope.
pub fn convexify_z(f: &GridFunction) -> Result<GridFunction> {
    if f.dim() != 2 {
        return Err(Error::RequiresYzGrid);
    }
    let cl = lsc_envelope(f)?;
    let zs = cl.axes()[1].nodes();
    let nz = zs.len();
    let values: Vec<f64> = cl
        .values()
        .chunks(nz)
        .flat_map(|row| {
            if row.iter().any(|v| v.is_finite()) {
                hull_1d(&zs, row)
            } else {
                row.to_vec()
            }
        })
        .collect();
    let mut g = cl.with_values(values)?;
    g.is_lsc = true;
    Ok(g)
}

fn snap_tol(v: &[f64]) -> f64 {
    let scale = v.iter().filter(|x| x.is_finite()).fold(0.0f64, |m, x| m.max(x.abs()));
    1e-12 * (1.0 + scale)
}

/// Keeps the input value wherever the hull agrees with it up to rounding, which makes
/// the envelope idempotent on node values.
fn snap(hull: f64, orig: f64, tol: f64) -> f64 {
    if orig.is_finite() && hull >= orig - tol {
        orig
    } else {
        hull
    }
}

/// Lower hull by monotone chain on the finite `(x, v)` pairs, read back at every node.
pub(crate) fn hull_1d(xs: &[f64], v: &[f64]) -> Vec<f64> {
    let tol = snap_tol(v);
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(v)
        .filter(|(_, v)| v.is_finite())
        .map(|(&x, &v)| (x, v))
        .collect();
    let mut chain: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for p in pts {
        while chain.len() >= 2 {
            let (a, b) = (chain[chain.len() - 2], chain[chain.len() - 1]);
            // drop b when it is on or above the chord a-p
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross <= tol * (p.0 - a.0).abs() {
                chain.pop();
            } else {
                break;
            }
        }
        chain.push(p);
    }
    let (Some(first), Some(last)) = (chain.first().copied(), chain.last().copied()) else {
        return vec![f64::INFINITY; v.len()];
    };
    let mut seg = 0;
    xs.iter()
        .zip(v)
        .map(|(&x, &orig)| {
            if x < first.0 || x > last.0 {
                return f64::INFINITY;
            }
            while seg + 1 < chain.len() - 1 && x > chain[seg + 1].0 {
                seg += 1;
            }
            let h = if chain.len() == 1 {
                first.1
            } else {
                let (a, b) = (chain[seg], chain[seg + 1]);
                if x == a.0 {
                    a.1
                } else if x == b.0 {
                    b.1
                } else {
                    a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0)
                }
            };
            snap(h, orig, tol)
        })
        .collect()
}

/// 2D lower convex envelope: at each node `p`, the minimum of `sum l_j f_j` over convex
/// weights `l` whose barycentre is `p`.
fn hull_2d(f: &GridFunction) -> Vec<f64> {
    let tol = snap_tol(f.values());
    let pts: Vec<[f64; 3]> = (0..f.len())
        .filter(|&k| f.values()[k].is_finite())
        .map(|k| {
            let p = f.point(k);
            [p[0], p[1], f.values()[k]]
        })
        .collect();
    let sy = f.axes()[0].hi - f.axes()[0].lo;
    let sz = f.axes()[1].hi - f.axes()[1].lo;
    (0..f.len())
        .into_par_iter()
        .map(|k| {
            let p = f.point(k);
            let h = barycentric_lp(&pts, p[0], p[1], sy, sz);
            snap(h, f.values()[k], tol)
        })
        .collect()
}

/// Revised simplex on three equality rows: `sum l_j = 1`, `sum l_j (y_j - py) = 0`,
/// `sum l_j (z_j - pz) = 0`. Returns `+inf` when `p` is outside the convex hull of the
/// points. Coordinates are rescaled by the box size.
fn barycentric_lp(pts: &[[f64; 3]], py: f64, pz: f64, sy: f64, sz: f64) -> f64 {
    let col = |j: usize| -> [f64; 3] {
        let q = &pts[j];
        [1.0, (q[0] - py) / sy, (q[1] - pz) / sz]
    };
    let m = pts.len();
    // basis entries >= m are artificials
    let mut basis = [m, m + 1, m + 2];
    let mut binv = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let mut xb = [1.0, 0.0, 0.0];
    // artificial columns are unit vectors with sign chosen so that xb >= 0 (all b >= 0)
    let eps = 1e-11;

    for phase in 1..=2 {
        let cost = |j: usize| -> f64 {
            if phase == 1 {
                if j >= m {
                    1.0
                } else {
                    0.0
                }
            } else if j >= m {
                0.0
            } else {
                pts[j][2]
            }
        };
        let mut degenerate_run = 0usize;
        let mut iters = 0usize;
        loop {
            iters += 1;
            if iters > 50 * (m + 3) {
                break;
            }
            let cb = [cost(basis[0]), cost(basis[1]), cost(basis[2])];
            let pi = [
                cb[0] * binv[0][0] + cb[1] * binv[1][0] + cb[2] * binv[2][0],
                cb[0] * binv[0][1] + cb[1] * binv[1][1] + cb[2] * binv[2][1],
                cb[0] * binv[0][2] + cb[1] * binv[1][2] + cb[2] * binv[2][2],
            ];
            let scale = 1.0 + pi.iter().fold(0.0f64, |s, x| s.max(x.abs()));
            let bland = degenerate_run > 20;
            let mut enter = None;
            let mut best = -eps * scale;
            for j in 0..m {
                if basis.contains(&j) {
                    continue;
                }
                let a = col(j);
                let rc = cost(j) - (pi[0] * a[0] + pi[1] * a[1] + pi[2] * a[2]);
                if rc < best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = rc;
                }
            }
            let Some(e) = enter else { break };
            let a = col(e);
            let d = [
                binv[0][0] * a[0] + binv[0][1] * a[1] + binv[0][2] * a[2],
                binv[1][0] * a[0] + binv[1][1] * a[1] + binv[1][2] * a[2],
                binv[2][0] * a[0] + binv[2][1] * a[1] + binv[2][2] * a[2],
            ];
            let mut leave = None;
            let mut ratio = f64::INFINITY;
            for r in 0..3 {
                if d[r] > 1e-12 {
                    let t = xb[r] / d[r];
                    let better =
                        t < ratio - 1e-15 || (t <= ratio + 1e-15 && leave.is_some_and(|l: usize| basis[r] < basis[l]));
                    if better {
                        ratio = t;
                        leave = Some(r);
                    }
                }
            }
            let Some(r) = leave else {
                // unbounded cannot happen: weights are bounded by the first row
                break;
            };
            degenerate_run = if ratio <= 1e-15 { degenerate_run + 1 } else { 0 };
            pivot(&mut binv, &mut xb, &d, r);
            basis[r] = e;
        }
        if phase == 1 {
            let infeas: f64 = (0..3).filter(|&r| basis[r] >= m).map(|r| xb[r]).sum();
            if infeas > 1e-9 {
                return f64::INFINITY;
            }
            // drive zero-level artificials out where a real column can replace them
            for r in 0..3 {
                if basis[r] < m {
                    continue;
                }
                let swap = (0..m).filter(|j| !basis.contains(j)).find_map(|j| {
                    let a = col(j);
                    let d = [
                        binv[0][0] * a[0] + binv[0][1] * a[1] + binv[0][2] * a[2],
                        binv[1][0] * a[0] + binv[1][1] * a[1] + binv[1][2] * a[2],
                        binv[2][0] * a[0] + binv[2][1] * a[1] + binv[2][2] * a[2],
                    ];
                    (d[r].abs() > 1e-9).then_some((j, d))
                });
                if let Some((j, d)) = swap {
                    pivot(&mut binv, &mut xb, &d, r);
                    basis[r] = j;
                }
            }
        }
    }
    (0..3)
        .filter(|&r| basis[r] < m)
        .map(|r| xb[r].max(0.0) * pts[basis[r]][2])
        .sum()
}

fn pivot(binv: &mut [[f64; 3]; 3], xb: &mut [f64; 3], d: &[f64; 3], r: usize) {
    let piv = d[r];
    let row_r = binv[r];
    let xr = xb[r] / piv;
    for i in 0..3 {
        if i == r {
            continue;
        }
        let f = d[i] / piv;
        for c in 0..3 {
            binv[i][c] -= f * row_r[c];
        }
        xb[i] -= f * xb[r];
    }
    for c in 0..3 {
        binv[r][c] = row_r[c] / piv;
    }
    xb[r] = xr;
}
