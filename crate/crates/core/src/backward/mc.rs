use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{mean_var, pairwise_sum, PathBundle, TimeGrid};
use crate::ladder::LadderLevel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Basis {
    /// Monomials up to `degree` in the standardised state.
    Polynomial { degree: usize },
    /// Piecewise-linear hats on `knots` equispaced knots over the sample range.
    Hats { knots: usize },
}

impl Basis {
    pub fn size(&self) -> usize {
        match *self {
            Basis::Polynomial { degree } => degree + 1,
            Basis::Hats { knots } => knots,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressionConfig {
    pub basis: Basis,
    /// Ridge added to the normal equations, relative to the sample size.
    pub ridge: f64,
    pub max_iter: usize,
}

impl Default for RegressionConfig {
    fn default() -> Self {
        RegressionConfig {
            basis: Basis::Polynomial { degree: 3 },
            ridge: 1e-8,
            max_iter: 50,
        }
    }
}

/// Paths carrying an `F_t`-measurable label are regressed separately per label from
/// `from_step` on.
#[derive(Debug, Clone, PartialEq)]
pub struct Grouping {
    pub labels: Vec<usize>,
    pub from_step: usize,
}

#[derive(Debug, Clone)]
pub struct BsdePathSolution {
    pub grid: TimeGrid,
    pub n_paths: usize,
    /// Row-major `n_paths x (steps + 1)`.
    pub y: Vec<f64>,
    /// Row-major `n_paths x steps`.
    pub z: Vec<f64>,
    /// `phi^n(X_T) + sum_{j >= i} dt g^n(X_j, Y_j, Z_j)`, row-major like `y`.
    pub y_pathwise: Vec<f64>,
    /// Regression coefficients for `E[Y_{i+1} | X_i]`, per step and group.
    pub coefficients: Vec<Vec<Vec<f64>>>,
    /// Standard error of the fitted conditional mean at each step.
    pub regression_se: Vec<f64>,
    /// Per-step standard error of each label's fit, indexed by label (one entry when
    /// ungrouped; `NaN` for empty labels).
    pub group_se: Vec<Vec<f64>>,
    /// `regression_se` accumulated backward from `T`: the one-step errors are treated as
    /// independent and carried through each step with the factor `1 + L_y dt`.
    pub propagated_se: Vec<f64>,
    /// `group_se` accumulated the same way, per label, while the grouping is active;
    /// the step before it carries over the pooled `propagated_se`.
    pub group_propagated_se: Vec<Vec<f64>>,
}

impl BsdePathSolution {
    pub fn y_at(&self, p: usize, i: usize) -> f64 {
        self.y[p * (self.grid.steps + 1) + i]
    }

    pub fn y_column(&self, i: usize) -> Vec<f64> {
        (0..self.n_paths).map(|p| self.y_at(p, i)).collect()
    }

    pub fn pathwise_column(&self, i: usize) -> Vec<f64> {
        (0..self.n_paths)
            .map(|p| self.y_pathwise[p * (self.grid.steps + 1) + i])
            .collect()
    }

    /// Sample mean of `Y_0`.
    pub fn y0(&self) -> f64 {
        mean_var(&self.y_column(0)).0
    }

    /// Standard error of `Y_0` from the pathwise estimator's spread.
    pub fn y0_se(&self) -> f64 {
        let (_, v) = mean_var(&self.pathwise_column(0));
        (v / self.n_paths as f64).sqrt()
    }
}

/// Design row for one standardised state.
fn features(basis: &Basis, xi: f64, lo: f64, hi: f64, out: &mut [f64]) {
    match *basis {
        Basis::Polynomial { .. } => {
            let mut p = 1.0;
            for o in out.iter_mut() {
                *o = p;
                p *= xi;
            }
        }
        Basis::Hats { knots } => {
            out.iter_mut().for_each(|o| *o = 0.0);
            let h = (hi - lo) / (knots - 1) as f64;
            let s = ((xi - lo) / h).clamp(0.0, (knots - 1) as f64);
            let k = (s.floor() as usize).min(knots - 2);
            let w = s - k as f64;
            out[k] = 1.0 - w;
            out[k + 1] = w;
        }
    }
}

struct Fit {
    coef: Vec<f64>,
    fitted: Vec<Vec<f64>>,
    se: f64,
}

const CHUNK: usize = 4096;

/// Least squares of each target on `basis(x)` over the paths in `members`, with a
/// deterministic chunked accumulation of the normal equations.
fn regress(basis: &Basis, ridge: f64, x: &[f64], members: &[usize], targets: &[&[f64]], step: usize) -> Result<Fit> {
    let n = members.len();
    let xs: Vec<f64> = members.iter().map(|&p| x[p]).collect();
    let (m, v) = mean_var(&xs);
    let sd = v.sqrt();
    let degenerate = n < 2 || !(sd > 1e-12 * (1.0 + m.abs()));
    let p = if degenerate { 1 } else { basis.size() };
    let (lo, hi) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
        (a.min((x - m) / sd), b.max((x - m) / sd))
    });
    let row = |xv: f64, out: &mut [f64]| {
        if degenerate {
            out[0] = 1.0;
        } else {
            features(basis, (xv - m) / sd, lo, hi, out);
        }
    };
    let nt = targets.len();
    let partials: Vec<(Vec<f64>, Vec<f64>)> = members
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut gram = vec![0.0; p * p];
            let mut rhs = vec![0.0; p * nt];
            let mut f = vec![0.0; p];
            for &q in chunk {
                row(x[q], &mut f);
                for a in 0..p {
                    for b in a..p {
                        gram[a * p + b] += f[a] * f[b];
                    }
                    for (t, tg) in targets.iter().enumerate() {
                        rhs[t * p + a] += f[a] * tg[q];
                    }
                }
            }
            (gram, rhs)
        })
        .collect();
    let mut gram = vec![0.0; p * p];
    let mut rhs = vec![0.0; p * nt];
    for (g, r) in &partials {
        gram.iter_mut().zip(g).for_each(|(a, b)| *a += b);
        rhs.iter_mut().zip(r).for_each(|(a, b)| *a += b);
    }
    let mut a = DMatrix::from_fn(p, p, |i, j| if i <= j { gram[i * p + j] } else { gram[j * p + i] });
    for i in 0..p {
        a[(i, i)] += ridge * n as f64;
    }
    let chol = a.cholesky().ok_or(Error::SingularRegression { step })?;
    let mut coef = Vec::with_capacity(p * nt);
    for t in 0..nt {
        let sol = chol.solve(&DVector::from_column_slice(&rhs[t * p..(t + 1) * p]));
        if sol.iter().any(|c| !c.is_finite()) {
            return Err(Error::SingularRegression { step });
        }
        coef.extend(sol.iter());
    }
    let fitted: Vec<Vec<f64>> = (0..nt)
        .map(|t| {
            members
                .par_iter()
                .map_init(
                    || vec![0.0; p],
                    |f, &q| {
                        row(x[q], f);
                        f.iter().zip(&coef[t * p..(t + 1) * p]).map(|(a, b)| a * b).sum()
                    },
                )
                .collect()
        })
        .collect();
    let resid: Vec<f64> = members
        .iter()
        .zip(&fitted[0])
        .map(|(&q, f)| targets[0][q] - f)
        .collect();
    let sigma = if n > p {
        (pairwise_sum(&resid.iter().map(|r| r * r).collect::<Vec<_>>()) / (n - p) as f64).sqrt()
    } else {
        0.0
    };
    Ok(Fit {
        coef,
        fitted,
        se: sigma * (p as f64 / n as f64).sqrt(),
    })
}

/// Backward induction `Y_i = E[Y_{i+1} | X_i] + dt g^n(X_i, Y_i, Z_i)`,
/// `Z_i = E[(Y_{i+1} - E[Y_{i+1} | X_i]) dW_i | X_i] / dt`, implicit in `Y` by
/// fixed-point iteration. Centring the `Z` target leaves its mean unchanged and removes
/// most of its variance.
pub fn solve_bsde_mc(
    level: &LadderLevel,
    bundle: &PathBundle,
    cfg: &RegressionConfig,
    grouping: Option<&Grouping>,
) -> Result<BsdePathSolution> {
    if cfg.basis.size() < 2 {
        return Err(Error::InvalidArgument("regression basis needs >= 2 functions".into()));
    }
    let phi = level
        .terminal
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("ladder level has no terminal".into()))?;
    let dt = bundle.grid.dt;
    let ly = level.lipschitz[1];
    if level.generator.depends_on_y() && level.nominal_lipschitz() * dt >= 1.0 {
        return Err(Error::NotContractive(level.nominal_lipschitz() * dt));
    }
    if let Some(g) = grouping {
        if g.labels.len() != bundle.n_paths {
            return Err(Error::GridMismatch("grouping labels do not match path count".into()));
        }
    }
    let n_paths = bundle.n_paths;
    let steps = bundle.grid.steps;
    let w = steps + 1;
    let mut y = vec![0.0; n_paths * w];
    let mut z = vec![0.0; n_paths * steps];
    let mut ypw = vec![0.0; n_paths * w];
    let mut coefficients = vec![Vec::new(); steps];
    let mut regression_se = vec![0.0; w];
    let mut group_se = vec![Vec::new(); w];

    let mut next: Vec<f64> = (0..n_paths).map(|p| phi.eval(bundle.state(p, steps))).collect();
    let mut next_pw = next.clone();
    for p in 0..n_paths {
        y[p * w + steps] = next[p];
        ypw[p * w + steps] = next[p];
    }
    let all: Vec<usize> = (0..n_paths).collect();
    for i in (0..steps).rev() {
        let x = bundle.column(i);
        let dw = bundle.increments_at(i);
        let groups: Vec<Vec<usize>> = match grouping {
            Some(g) if i >= g.from_step => {
                let k = g.labels.iter().copied().max().unwrap_or(0) + 1;
                let mut v = vec![Vec::new(); k];
                for (p, &l) in g.labels.iter().enumerate() {
                    v[l].push(p);
                }
                v
            }
            _ => vec![all.clone()],
        };
        group_se[i] = vec![f64::NAN; groups.len()];
        let mut cond = vec![0.0; n_paths];
        let mut zi = vec![0.0; n_paths];
        let mut se2 = 0.0;
        for (label, members) in groups.iter().enumerate() {
            if members.is_empty() {
                continue;
            }
            let fit = regress(&cfg.basis, cfg.ridge, &x, members, &[&next], i)?;
            let mut yw = vec![0.0; n_paths];
            for (k, &p) in members.iter().enumerate() {
                cond[p] = fit.fitted[0][k];
                yw[p] = (next[p] - cond[p]) * dw[p];
            }
            let zfit = regress(&cfg.basis, cfg.ridge, &x, members, &[&yw], i)?;
            for (k, &p) in members.iter().enumerate() {
                zi[p] = zfit.fitted[0][k] / dt;
            }
            se2 += fit.se * fit.se * (members.len() as f64 / n_paths as f64).powi(2);
            group_se[i][label] = fit.se;
            coefficients[i].push(fit.coef);
        }
        regression_se[i] = se2.sqrt();
        let yi: Vec<f64> = (0..n_paths)
            .into_par_iter()
            .map(|p| implicit_y(level, x[p], cond[p], zi[p], dt, ly, cfg.max_iter))
            .collect();
        for p in 0..n_paths {
            y[p * w + i] = yi[p];
            z[p * steps + i] = zi[p];
            next_pw[p] += dt * level.gn(x[p], yi[p], zi[p]);
            ypw[p * w + i] = next_pw[p];
        }
        next = yi;
    }
    let mut propagated_se = vec![0.0; w];
    for i in (0..steps).rev() {
        let carried = (1.0 + ly * dt) * propagated_se[i + 1];
        propagated_se[i] = regression_se[i].hypot(carried);
    }
    let mut group_propagated_se = vec![Vec::new(); w];
    for i in (0..steps).rev() {
        let k = 1.0 + ly * dt;
        group_propagated_se[i] = (0..group_se[i].len())
            .map(|l| {
                let next = if i + 1 == steps {
                    0.0
                } else if group_se[i + 1].len() == group_se[i].len() {
                    group_propagated_se[i + 1][l]
                } else {
                    propagated_se[i + 1]
                };
                group_se[i][l].hypot(k * next)
            })
            .collect();
    }
    Ok(BsdePathSolution {
        grid: bundle.grid,
        n_paths,
        y,
        z,
        y_pathwise: ypw,
        coefficients,
        regression_se,
        group_se,
        propagated_se,
        group_propagated_se,
    })
}

/// Solves `y = c + dt g(x, y, z)`; switches to damping 0.5 if the residual stops
/// shrinking.
fn implicit_y(level: &LadderLevel, x: f64, c: f64, z: f64, dt: f64, ly: f64, max_iter: usize) -> f64 {
    let map = |y: f64| c + dt * level.gn(x, y, z);
    let mut y = map(c);
    if ly == 0.0 {
        return y;
    }
    let mut damping = 1.0;
    let mut last = f64::INFINITY;
    for _ in 0..max_iter {
        let target = map(y);
        let r = (target - y).abs();
        if r <= 1e-15 * (1.0 + y.abs()) {
            return target;
        }
        if r >= last {
            damping = 0.5;
        }
        last = r;
        y += damping * (target - y);
    }
    y
}
