use serde::{Deserialize, Serialize};

use crate::convexlab::{Axis, GridFunction};
use crate::error::{ConfigError, Error, Result};

/// Tensor grid of `(x, y, z)` probe points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeGrid3 {
    pub x: Axis,
    pub y: Axis,
    pub z: Axis,
}

impl ProbeGrid3 {
    pub fn len(&self) -> usize {
        self.x.n * self.y.n * self.z.n
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.y.n + j) * self.z.n + k
    }

    pub fn point(&self, m: usize) -> [f64; 3] {
        let k = m % self.z.n;
        let j = (m / self.z.n) % self.y.n;
        let i = m / (self.z.n * self.y.n);
        [self.x.node(i), self.y.node(j), self.z.node(k)]
    }

    pub fn on_edge(&self, m: usize) -> bool {
        let k = m % self.z.n;
        let j = (m / self.z.n) % self.y.n;
        let i = m / (self.z.n * self.y.n);
        i == 0 || i + 1 == self.x.n || j == 0 || j + 1 == self.y.n || k == 0 || k + 1 == self.z.n
    }
}

/// Generator sampled on a probe grid, trilinearly interpolated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledGenerator {
    pub grid: ProbeGrid3,
    pub values: Vec<f64>,
}

impl SampledGenerator {
    pub fn new(grid: ProbeGrid3, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid("sampled generator must be finite".into()));
        }
        Ok(SampledGenerator { grid, values })
    }

    pub fn from_fn(grid: ProbeGrid3, f: impl Fn(f64, f64, f64) -> f64) -> Result<Self> {
        let values = (0..grid.len())
            .map(|m| {
                let [x, y, z] = grid.point(m);
                f(x, y, z)
            })
            .collect();
        SampledGenerator::new(grid, values)
    }

    /// Trilinear interpolation, clamped to the grid box.
    pub fn eval(&self, x: f64, y: f64, z: f64) -> f64 {
        let g = &self.grid;
        let loc = |a: &Axis, v: f64| a.locate(v.clamp(a.lo, a.hi)).expect("clamped");
        let (i, u) = loc(&g.x, x);
        let (j, v) = loc(&g.y, y);
        let (k, w) = loc(&g.z, z);
        let at = |di: usize, dj: usize, dk: usize| self.values[g.index(i + di, j + dj, k + dk)];
        let mut acc = 0.0;
        for (di, wi) in [(0, 1.0 - u), (1, u)] {
            for (dj, wj) in [(0, 1.0 - v), (1, v)] {
                for (dk, wk) in [(0, 1.0 - w), (1, w)] {
                    let c = wi * wj * wk;
                    if c != 0.0 {
                        acc += c * at(di, dj, dk);
                    }
                }
            }
        }
        acc
    }
}

/// Registry generators and sampled tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GeneratorKind {
    Zero,
    /// `c |z|`
    AbsZ {
        c: f64,
    },
    /// `c z^2`
    QuadraticZ {
        c: f64,
    },
    /// `x^2 + z^2 / 2`
    SeparableX2Z2,
    /// `z^2 / 2`
    Entropic,
    /// `k y`
    LinearY {
        k: f64,
    },
    /// `(1 + x^2) |z|`
    WeightedAbsZ,
    /// `(1 + x^2) max(z, 0)`
    WeightedReluZ,
    Sampled {
        table: SampledGenerator,
    },
}

pub const REGISTRY_NAMES: &[&str] = &[
    "zero",
    "abs-z",
    "quadratic-z",
    "separable-x2-z2",
    "entropic",
    "linear-y",
    "weighted-abs-z",
    "weighted-relu-z",
    "sampled",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Monotonicity {
    Increasing,
    Decreasing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StructureFlags {
    pub positive: bool,
    pub convex_in_z: bool,
    pub monotone_in_y: Option<Monotonicity>,
    /// Jointly convex in `(y, z)` for each fixed `x`.
    pub jointly_convex: bool,
    /// Convex in `(x, y, z)`; what the conjugate ladder actually needs.
    pub convex_xyz: bool,
    /// `g = g1(x) + g2(y, z)`.
    pub separable: bool,
}

/// One-dimensional building block of a coordinate-separable generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Part {
    Zero,
    Abs(f64),
    Quad(f64),
    Linear(f64),
}

impl Part {
    pub(crate) fn eval(self, s: f64) -> f64 {
        match self {
            Part::Zero => 0.0,
            Part::Abs(c) => c * s.abs(),
            Part::Quad(c) => c * s * s,
            Part::Linear(k) => k * s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub flags: StructureFlags,
}

impl GeneratorSpec {
    /// Registry entry with its known structure flags.
    pub fn registry(kind: GeneratorKind) -> Result<Self> {
        let constant_y = Some(Monotonicity::Increasing);
        let all = StructureFlags {
            positive: true,
            convex_in_z: true,
            monotone_in_y: constant_y,
            jointly_convex: true,
            convex_xyz: true,
            separable: true,
        };
        let flags = match &kind {
            GeneratorKind::Zero | GeneratorKind::SeparableX2Z2 | GeneratorKind::Entropic => all,
            GeneratorKind::AbsZ { c } | GeneratorKind::QuadraticZ { c } => {
                if !(c.is_finite() && *c > 0.0) {
                    return Err(ConfigError::OutOfRange {
                        key: "generator.c".into(),
                        value: *c,
                        lo: f64::MIN_POSITIVE,
                        hi: f64::MAX,
                    }
                    .into());
                }
                all
            }
            GeneratorKind::LinearY { k } => {
                if !k.is_finite() {
                    return Err(Error::InvalidArgument("linear-y slope must be finite".into()));
                }
                StructureFlags {
                    positive: false,
                    monotone_in_y: Some(if *k >= 0.0 {
                        Monotonicity::Increasing
                    } else {
                        Monotonicity::Decreasing
                    }),
                    ..all
                }
            }
            GeneratorKind::WeightedAbsZ | GeneratorKind::WeightedReluZ => StructureFlags {
                convex_xyz: false,
                separable: false,
                ..all
            },
            GeneratorKind::Sampled { .. } => StructureFlags::default(),
        };
        Ok(GeneratorSpec { kind, flags })
    }

    pub fn zero() -> Self {
        GeneratorSpec::registry(GeneratorKind::Zero).expect("registry")
    }

    pub fn entropic() -> Self {
        GeneratorSpec::registry(GeneratorKind::Entropic).expect("registry")
    }

    /// Sampled generator with caller-declared flags; call [`GeneratorSpec::verify_flags`]
    /// to check them.
    pub fn sampled(table: SampledGenerator, flags: StructureFlags) -> Self {
        GeneratorSpec {
            kind: GeneratorKind::Sampled { table },
            flags,
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            GeneratorKind::Zero => "zero",
            GeneratorKind::AbsZ { .. } => "abs-z",
            GeneratorKind::QuadraticZ { .. } => "quadratic-z",
            GeneratorKind::SeparableX2Z2 => "separable-x2-z2",
            GeneratorKind::Entropic => "entropic",
            GeneratorKind::LinearY { .. } => "linear-y",
            GeneratorKind::WeightedAbsZ => "weighted-abs-z",
            GeneratorKind::WeightedReluZ => "weighted-relu-z",
            GeneratorKind::Sampled { .. } => "sampled",
        }
    }

    pub fn eval(&self, x: f64, y: f64, z: f64) -> f64 {
        match &self.kind {
            GeneratorKind::WeightedAbsZ => (1.0 + x * x) * z.abs(),
            GeneratorKind::WeightedReluZ => (1.0 + x * x) * z.max(0.0),
            GeneratorKind::Sampled { table } => table.eval(x, y, z),
            _ => {
                let [a, b, c] = self.parts().expect("registry kinds are separable");
                a.eval(x) + b.eval(y) + c.eval(z)
            }
        }
    }

    /// Coordinate-wise decomposition, when the generator is a sum of 1D parts.
    pub(crate) fn parts(&self) -> Option<[Part; 3]> {
        use Part::*;
        Some(match self.kind {
            GeneratorKind::Zero => [Zero, Zero, Zero],
            GeneratorKind::AbsZ { c } => [Zero, Zero, Abs(c)],
            GeneratorKind::QuadraticZ { c } => [Zero, Zero, Quad(c)],
            GeneratorKind::SeparableX2Z2 => [Quad(1.0), Zero, Quad(0.5)],
            GeneratorKind::Entropic => [Zero, Zero, Quad(0.5)],
            GeneratorKind::LinearY { k } => [Zero, Linear(k), Zero],
            _ => return None,
        })
    }

    /// Whether `g` depends on `y`.
    pub fn depends_on_y(&self) -> bool {
        match self.parts() {
            Some([_, b, _]) => b != Part::Zero,
            None => matches!(self.kind, GeneratorKind::Sampled { .. }),
        }
    }

    /// Checks the declared flags on `probe`; returns the names of flags that fail.
    pub fn verify_flags(&self, probe: &ProbeGrid3) -> Result<Vec<&'static str>> {
        let mut bad = Vec::new();
        let vals: Vec<f64> = (0..probe.len())
            .map(|m| {
                let [x, y, z] = probe.point(m);
                self.eval(x, y, z)
            })
            .collect();
        let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tol = 1e-9 * (1.0 + scale);
        if self.flags.positive && vals.iter().any(|&v| v < -tol) {
            bad.push("positive");
        }
        if self.flags.convex_in_z {
            let ok = (0..probe.x.n).all(|i| {
                (0..probe.y.n).all(|j| {
                    (1..probe.z.n - 1).all(|k| {
                        let v = |k| vals[probe.index(i, j, k)];
                        v(k - 1) - 2.0 * v(k) + v(k + 1) >= -tol
                    })
                })
            });
            if !ok {
                bad.push("convex_in_z");
            }
        }
        if let Some(dir) = self.flags.monotone_in_y {
            let sign = if dir == Monotonicity::Increasing { 1.0 } else { -1.0 };
            let ok = (0..probe.x.n).all(|i| {
                (0..probe.z.n).all(|k| {
                    (1..probe.y.n).all(|j| sign * (vals[probe.index(i, j, k)] - vals[probe.index(i, j - 1, k)]) >= -tol)
                })
            });
            if !ok {
                bad.push("monotone_in_y");
            }
        }
        if self.flags.jointly_convex {
            for i in 0..probe.x.n {
                let slice = GridFunction::new(
                    vec![probe.y, probe.z],
                    (0..probe.y.n * probe.z.n)
                        .map(|m| vals[probe.index(i, m / probe.z.n, m % probe.z.n)])
                        .collect(),
                )?;
                if !slice.check_convex(tol)? {
                    bad.push("jointly_convex");
                    break;
                }
            }
        }
        if self.flags.convex_xyz && !second_differences_nonnegative(probe, &vals, tol) {
            bad.push("convex_xyz");
        }
        Ok(bad)
    }
}

/// Second differences along the 13 lattice directions; a necessary condition for
/// convexity in `(x, y, z)`.
fn second_differences_nonnegative(p: &ProbeGrid3, vals: &[f64], tol: f64) -> bool {
    let dirs: Vec<[i64; 3]> = (-1..=1)
        .flat_map(|a| (-1..=1).flat_map(move |b| (-1..=1).map(move |c| [a, b, c])))
        .filter(|d| *d > [0, 0, 0])
        .collect();
    let n = [p.x.n as i64, p.y.n as i64, p.z.n as i64];
    let idx = |i: i64, j: i64, k: i64| -> Option<usize> {
        (i >= 0 && j >= 0 && k >= 0 && i < n[0] && j < n[1] && k < n[2])
            .then(|| p.index(i as usize, j as usize, k as usize))
    };
    for i in 0..n[0] {
        for j in 0..n[1] {
            for k in 0..n[2] {
                let c = vals[idx(i, j, k).unwrap()];
                for d in &dirs {
                    if let (Some(a), Some(b)) = (idx(i - d[0], j - d[1], k - d[2]), idx(i + d[0], j + d[1], k + d[2])) {
                        if vals[a] - 2.0 * c + vals[b] < -tol {
                            return false;
                        }
                    }
                }
            }
        }
    }
    true
}
