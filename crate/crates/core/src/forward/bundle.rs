use std::io::Write;

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::diffusion::DiffusionSpec;
use super::stats::{mean_var, Moments};
use crate::convexlab::fmt_f64;
use crate::error::{Error, Result};

/// Words consumed per step: two `u64` draws for one Box–Muller normal.
const WORDS_PER_STEP: u128 = 4;

/// Uniform grid `origin + g * dt` for global step indices `g = start ..= start + steps`.
///
/// Steps are indexed globally so a restart from an interior node reads the same random
/// words as the uninterrupted run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub origin: f64,
    pub dt: f64,
    pub start: usize,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, t1: f64, steps: usize) -> Result<Self> {
        if steps < 1 {
            return Err(Error::InvalidArgument("step count must be >= 1".into()));
        }
        if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
            return Err(Error::InvalidArgument(format!("need T > t0, got [{t0}, {t1}]")));
        }
        Ok(TimeGrid {
            origin: t0,
            dt: (t1 - t0) / steps as f64,
            start: 0,
            steps,
        })
    }

    /// Time at local index `i`.
    pub fn time(&self, i: usize) -> f64 {
        self.origin + (self.start + i) as f64 * self.dt
    }

    pub fn t0(&self) -> f64 {
        self.time(0)
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.steps)
    }

    /// Local index of the node at time `t`.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let s = (t - self.t0()) / self.dt;
        let i = s.round();
        if i < 0.0 || i > self.steps as f64 || (self.time(i as usize) - t).abs() > 1e-9 * (1.0 + t.abs()) {
            return Err(Error::NotOnGrid(t));
        }
        Ok(i as usize)
    }

    /// The sub-grid starting at local index `i`.
    pub fn tail_from(&self, i: usize) -> TimeGrid {
        TimeGrid {
            start: self.start + i,
            steps: self.steps - i,
            ..*self
        }
    }
}

/// Ensemble of Euler–Maruyama paths on a shared time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBundle {
    pub grid: TimeGrid,
    pub n_paths: usize,
    /// Row-major `n_paths x (steps + 1)`.
    pub x: Vec<f64>,
    /// Row-major `n_paths x steps`.
    pub dw: Vec<f64>,
    pub seed: u64,
    pub stream: u64,
}

impl PathBundle {
    pub fn row(&self, p: usize) -> &[f64] {
        let w = self.grid.steps + 1;
        &self.x[p * w..(p + 1) * w]
    }

    pub fn dw_row(&self, p: usize) -> &[f64] {
        let w = self.grid.steps;
        &self.dw[p * w..(p + 1) * w]
    }

    pub fn state(&self, p: usize, i: usize) -> f64 {
        self.x[p * (self.grid.steps + 1) + i]
    }

    pub fn increment(&self, p: usize, i: usize) -> f64 {
        self.dw[p * self.grid.steps + i]
    }

    /// States of all paths at local index `i`.
    pub fn column(&self, i: usize) -> Vec<f64> {
        (0..self.n_paths).map(|p| self.state(p, i)).collect()
    }

    pub fn increments_at(&self, i: usize) -> Vec<f64> {
        (0..self.n_paths).map(|p| self.increment(p, i)).collect()
    }

    /// Re-simulates from local index `i` with the continuation of every path's stream.
    pub fn restart_at(&self, d: &DiffusionSpec, i: usize) -> Result<PathBundle> {
        if i > self.grid.steps {
            return Err(Error::InvalidArgument(format!("restart index {i} beyond grid")));
        }
        if i == self.grid.steps {
            return Err(Error::InvalidArgument(
                "restart at the terminal node leaves no steps".into(),
            ));
        }
        simulate_on(d, &self.column(i), self.grid.tail_from(i), self.seed, self.stream)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["path_id", "t", "x"])?;
        for p in 0..self.n_paths {
            for (i, x) in self.row(p).iter().enumerate() {
                out.write_record([p.to_string(), fmt_f64(self.grid.time(i)), fmt_f64(*x)])?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn manifest(&self) -> BundleManifest {
        let checkpoints = self.grid.steps.min(10);
        let moments = (0..=checkpoints)
            .map(|c| {
                let i = c * self.grid.steps / checkpoints;
                let (mean, var) = mean_var(&self.column(i));
                Moments {
                    t: self.grid.time(i),
                    mean,
                    var,
                }
            })
            .collect();
        BundleManifest {
            seed: self.seed,
            stream: self.stream,
            n_paths: self.n_paths,
            grid: self.grid,
            moments,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub seed: u64,
    pub stream: u64,
    pub n_paths: usize,
    pub grid: TimeGrid,
    pub moments: Vec<Moments>,
}

/// Per-path generator: key from `(seed, stream)`, ChaCha stream from the path id.
fn path_rng(seed: u64, stream: u64, path: usize, step: usize) -> ChaCha20Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&stream.to_le_bytes());
    let mut rng = ChaCha20Rng::from_seed(key);
    rng.set_stream(path as u64);
    rng.set_word_pos(WORDS_PER_STEP * step as u128);
    rng
}

fn normal(rng: &mut ChaCha20Rng) -> f64 {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    let u1 = ((rng.next_u64() >> 11) + 1) as f64 * SCALE;
    let u2 = (rng.next_u64() >> 11) as f64 * SCALE;
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Euler–Maruyama `X_{i+1} = X_i + mu(t_i, X_i) dt + sigma(t_i, X_i) dW_i` from `x0` on
/// `[t0, t1]` with `steps` steps.
pub fn simulate(
    d: &DiffusionSpec,
    x0: f64,
    t0: f64,
    t1: f64,
    steps: usize,
    n_paths: usize,
    seed: u64,
) -> Result<PathBundle> {
    simulate_stream(d, x0, t0, t1, steps, n_paths, seed, 0)
}

#[allow(clippy::too_many_arguments)]
pub fn simulate_stream(
    d: &DiffusionSpec,
    x0: f64,
    t0: f64,
    t1: f64,
    steps: usize,
    n_paths: usize,
    seed: u64,
    stream: u64,
) -> Result<PathBundle> {
    if n_paths < 1 {
        return Err(Error::InvalidArgument("n_paths must be >= 1".into()));
    }
    let grid = TimeGrid::new(t0, t1, steps)?;
    simulate_on(d, &vec![x0; n_paths], grid, seed, stream)
}

/// Simulates one path per entry of `start`, reading each path's stream from the grid's
/// global start step.
pub fn simulate_on(d: &DiffusionSpec, start: &[f64], grid: TimeGrid, seed: u64, stream: u64) -> Result<PathBundle> {
    let n = grid.steps;
    let n_paths = start.len();
    let mut x = vec![0.0; n_paths * (n + 1)];
    let mut dw = vec![0.0; n_paths * n];
    let sqdt = grid.dt.sqrt();
    let bad = x
        .par_chunks_mut(n + 1)
        .zip(dw.par_chunks_mut(n))
        .enumerate()
        .filter_map(|(p, (row, inc))| {
            let mut rng = path_rng(seed, stream, p, grid.start);
            row[0] = start[p];
            let mut first_bad = None;
            for i in 0..n {
                let t = grid.time(i);
                let w = sqdt * normal(&mut rng);
                inc[i] = w;
                let xi = row[i];
                row[i + 1] = xi + d.mu(t, xi) * grid.dt + d.sigma(t, xi) * w;
                if first_bad.is_none() && !row[i + 1].is_finite() {
                    first_bad = Some(i + 1);
                }
            }
            first_bad.map(|s| (s, p))
        })
        .min();
    if let Some((step, path)) = bad {
        return Err(Error::NonFiniteState { step, path });
    }
    Ok(PathBundle {
        grid,
        n_paths,
        x,
        dw,
        seed,
        stream,
    })
}

/// Masked paths keep `a`; the others follow `a` before `t` and `a_t + (b_u - b_t)` from
/// `t` on.
pub fn concatenate(a: &PathBundle, b: &PathBundle, t: f64, mask: &[bool]) -> Result<PathBundle> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch("bundles have different time grids".into()));
    }
    if a.n_paths != b.n_paths || mask.len() != a.n_paths {
        return Err(Error::GridMismatch(format!(
            "path counts differ: a={}, b={}, mask={}",
            a.n_paths,
            b.n_paths,
            mask.len()
        )));
    }
    let k = a.grid.index_of(t)?;
    let n = a.grid.steps;
    let mut x = a.x.clone();
    let mut dw = a.dw.clone();
    x.par_chunks_mut(n + 1)
        .zip(dw.par_chunks_mut(n))
        .enumerate()
        .filter(|(p, _)| !mask[*p])
        .for_each(|(p, (row, inc))| {
            let brow = b.row(p);
            // a constant shift of b's tail; exact when the paths already meet at t
            let shift = row[k] - brow[k];
            for i in k + 1..=n {
                row[i] = brow[i] + shift;
            }
            inc[k..].copy_from_slice(&b.dw_row(p)[k..]);
        });
    Ok(PathBundle {
        grid: a.grid,
        n_paths: a.n_paths,
        x,
        dw,
        seed: a.seed,
        stream: a.stream,
    })
}
