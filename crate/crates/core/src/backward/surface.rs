use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::convexlab::{fmt_f64, Axis};
use crate::error::{Error, Result};
use crate::ladder::TerminalSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryPolicy {
    /// `D^2 u = 0` at the edges: `u_0 = 2 u_1 - u_2`.
    LinearExtrapolation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LevelTag {
    Level(u32),
    /// Ladder stopped at this level.
    Limit(u32),
    /// Not produced by the solver.
    External,
}

/// `u(t_j, x_i)` on `t_j = j T / M`, `x_i` uniform.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueSurface {
    pub horizon: f64,
    pub steps: usize,
    pub x: Axis,
    /// Row-major, one row per time level.
    pub values: Vec<f64>,
    pub boundary: BoundaryPolicy,
    pub level: LevelTag,
    pub cfl_ratio: f64,
    /// Width factor for the reporting window: `3 * sigma_max`.
    pub window_rate: f64,
    /// `phi^n`; when present, evaluation at `t = T` uses it instead of interpolating.
    pub terminal: Option<TerminalSpec>,
}

impl ValueSurface {
    /// Surface with values `f(t, x)`; used for closed forms and tests.
    pub fn from_fn(horizon: f64, steps: usize, x: Axis, window_rate: f64, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity((steps + 1) * x.n);
        let dt = horizon / steps as f64;
        for j in 0..=steps {
            let t = if j == steps { horizon } else { j as f64 * dt };
            for i in 0..x.n {
                values.push(f(t, x.node(i)));
            }
        }
        ValueSurface {
            horizon,
            steps,
            x,
            values,
            boundary: BoundaryPolicy::LinearExtrapolation,
            level: LevelTag::External,
            cfl_ratio: f64::NAN,
            window_rate,
            terminal: None,
        }
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn time(&self, j: usize) -> f64 {
        if j == self.steps {
            self.horizon
        } else {
            j as f64 * self.dt()
        }
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.values[j * self.x.n..(j + 1) * self.x.n]
    }

    pub fn row_mut(&mut self, j: usize) -> &mut [f64] {
        let n = self.x.n;
        &mut self.values[j * n..(j + 1) * n]
    }

    pub fn at(&self, j: usize, i: usize) -> f64 {
        self.values[j * self.x.n + i]
    }

    /// Time index of `t`, if `t` is a node.
    pub fn time_index(&self, t: f64) -> Result<usize> {
        let s = (t / self.dt()).round();
        if s < 0.0 || s > self.steps as f64 || (self.time(s as usize) - t).abs() > 1e-9 * (1.0 + t.abs()) {
            return Err(Error::NotOnGrid(t));
        }
        Ok(s as usize)
    }

    /// Reporting window `[x_lo + w, x_hi - w]` with `w = 3 sigma_max sqrt(T - t)`.
    pub fn window(&self, t: f64) -> (f64, f64) {
        let w = self.window_rate * (self.horizon - t).max(0.0).sqrt();
        (self.x.lo + w, self.x.hi - w)
    }

    /// Space indices inside the window at time index `j`.
    pub fn window_indices(&self, j: usize) -> std::ops::RangeInclusive<usize> {
        let (lo, hi) = self.window(self.time(j));
        let h = self.x.spacing();
        let a = ((lo - self.x.lo) / h - 1e-9).ceil().max(0.0) as usize;
        let b = (((hi - self.x.lo) / h + 1e-9).floor() as usize).min(self.x.n - 1);
        a..=b
    }

    /// Bilinear interpolation inside the reporting window.
    pub fn evaluate(&self, t: f64, x: f64) -> Result<f64> {
        let (lo, hi) = self.window(t);
        if !(0.0..=self.horizon).contains(&t) || x < lo - 1e-12 || x > hi + 1e-12 {
            return Err(Error::OutsideWindow { t, x });
        }
        if t == self.horizon {
            if let Some(phi) = &self.terminal {
                return Ok(phi.eval(x));
            }
        }
        let mut s = t / self.dt();
        // t = j dt rounds to just below j; land on the node
        if (s - s.round()).abs() <= 1e-9 {
            s = s.round();
        }
        let j = (s.floor() as usize).min(self.steps - 1);
        let wt = (s - j as f64).clamp(0.0, 1.0);
        let (i, wx) = self.x.locate(x).ok_or(Error::OutsideWindow { t, x })?;
        let at_row = |j: usize| -> f64 {
            let (a, b) = (self.at(j, i), self.at(j, i + 1));
            if wx == 0.0 {
                a
            } else {
                a + wx * (b - a)
            }
        };
        let (a, b) = (at_row(j), at_row(j + 1));
        Ok(if wt == 0.0 {
            a
        } else if wt == 1.0 {
            b
        } else {
            a + wt * (b - a)
        })
    }

    /// CSV `t,x,u` with at most `max_rows` time levels (always including both ends).
    pub fn write_csv<W: Write>(&self, w: W, max_rows: usize) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "x", "u"])?;
        let stride = self.steps.div_ceil(max_rows.max(2) - 1).max(1);
        let mut js: Vec<usize> = (0..=self.steps).step_by(stride).collect();
        if *js.last().expect("non-empty") != self.steps {
            js.push(self.steps);
        }
        for j in js {
            let t = fmt_f64(self.time(j));
            for i in 0..self.x.n {
                out.write_record([t.as_str(), &fmt_f64(self.x.node(i)), &fmt_f64(self.at(j, i))])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}
