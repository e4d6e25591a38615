//! Test-side oracles, written without the library's numerics.
#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// `E[f(x + sqrt(tau) Z)]` by composite Simpson on `z in [-10, 10]`.
pub fn gaussian_expectation(x: f64, tau: f64, f: impl Fn(f64) -> f64) -> f64 {
    if tau == 0.0 {
        return f(x);
    }
    let m = 4000;
    let (a, b) = (-10.0, 10.0);
    let h = (b - a) / m as f64;
    let dens = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = 0.0;
    for k in 0..=m {
        let z = a + k as f64 * h;
        let w = if k == 0 || k == m {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        s += w * f(x + tau.sqrt() * z) * dens(z);
    }
    s * h / 3.0
}

/// `log E[exp(tanh(x + W_tau))]`, the exponential-transform value of the entropic problem.
pub fn entropic_value(x: f64, tau: f64) -> f64 {
    gaussian_expectation(x, tau, |y| y.tanh().exp()).ln()
}

/// Standard normals by the Marsaglia polar method on `StdRng`.
pub struct Normals {
    rng: StdRng,
    spare: Option<f64>,
}

impl Normals {
    pub fn new(seed: u64) -> Self {
        Normals {
            rng: StdRng::seed_from_u64(seed),
            spare: None,
        }
    }

    pub fn next(&mut self) -> f64 {
        if let Some(s) = self.spare.take() {
            return s;
        }
        loop {
            let u: f64 = self.rng.gen_range(-1.0..1.0);
            let v: f64 = self.rng.gen_range(-1.0..1.0);
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let k = (-2.0 * s.ln() / s).sqrt();
                self.spare = Some(v * k);
                return u * k;
            }
        }
    }
}

/// Monte-Carlo `log E[exp(tanh(W_1))]` and its delta-method standard error.
pub fn entropic_mc(samples: usize, seed: u64) -> (f64, f64) {
    let mut g = Normals::new(seed);
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..samples {
        let e = g.next().tanh().exp();
        s += e;
        s2 += e * e;
    }
    let n = samples as f64;
    let m = s / n;
    let var = (s2 / n - m * m) * n / (n - 1.0);
    (m.ln(), (var / n).sqrt() / m)
}
