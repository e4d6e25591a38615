use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `c(t, x) = level + slope * x + time_slope * t`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Affine {
    pub level: f64,
    pub slope: f64,
    pub time_slope: f64,
}

impl Affine {
    pub const fn constant(level: f64) -> Self {
        Affine {
            level,
            slope: 0.0,
            time_slope: 0.0,
        }
    }

    pub const fn linear(slope: f64) -> Self {
        Affine {
            level: 0.0,
            slope,
            time_slope: 0.0,
        }
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        self.level + self.slope * x + self.time_slope * t
    }
}

/// Drift and volatility of `dX = mu(t, X) dt + sigma(t, X) dW` on `[0, horizon]`.
///
/// Coefficients are evaluated at absolute time `time_offset + t`; shifting only moves
/// the offset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffusionSpec {
    pub mu: Affine,
    pub sigma: Affine,
    /// Declared Lipschitz constant `L` in `x`.
    pub lipschitz: f64,
    /// Declared linear-growth constant `K`.
    pub growth: f64,
    #[serde(default)]
    pub time_offset: f64,
    pub horizon: f64,
}

impl DiffusionSpec {
    pub fn new(mu: Affine, sigma: Affine, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        let lipschitz = mu.slope.abs().max(sigma.slope.abs());
        let at0 = |c: &Affine| c.level.abs() + c.time_slope.abs() * horizon;
        let growth = lipschitz.max(at0(&mu)).max(at0(&sigma));
        Ok(DiffusionSpec {
            mu,
            sigma,
            lipschitz,
            growth,
            time_offset: 0.0,
            horizon,
        })
    }

    pub fn brownian(horizon: f64) -> Self {
        DiffusionSpec::new(Affine::constant(0.0), Affine::constant(1.0), horizon).expect("positive horizon")
    }

    pub fn mu(&self, t: f64, x: f64) -> f64 {
        self.mu.eval(self.time_offset + t, x)
    }

    pub fn sigma(&self, t: f64, x: f64) -> f64 {
        self.sigma.eval(self.time_offset + t, x)
    }

    pub fn is_time_homogeneous(&self) -> bool {
        self.mu.time_slope == 0.0 && self.sigma.time_slope == 0.0
    }

    /// Checks the declared Lipschitz and growth constants on probe pairs and times.
    pub fn check_conditions(&self, xs: &[f64], times: &[f64]) -> bool {
        let tol = 1e-12;
        times.iter().all(|&t| {
            let growth_ok = [self.mu(t, 0.0), self.sigma(t, 0.0)]
                .iter()
                .all(|v| v.is_finite() && v.abs() <= self.growth * (1.0 + tol));
            growth_ok
                && xs.iter().all(|&a| {
                    xs.iter().all(|&b| {
                        let d = (a - b).abs();
                        (self.mu(t, a) - self.mu(t, b)).abs() <= self.lipschitz * d + tol
                            && (self.sigma(t, a) - self.sigma(t, b)).abs() <= self.lipschitz * d + tol
                    })
                })
        })
    }
}

/// `u -> (mu_{t+u}, sigma_{t+u})` on `[0, T - t]`; `L` and `K` unchanged.
pub fn shifted_diffusion(d: &DiffusionSpec, t: f64) -> Result<DiffusionSpec> {
    if !(0.0..=d.horizon).contains(&t) {
        return Err(Error::ShiftOutOfRange { t, horizon: d.horizon });
    }
    Ok(DiffusionSpec {
        time_offset: d.time_offset + t,
        horizon: d.horizon - t,
        ..*d
    })
}
