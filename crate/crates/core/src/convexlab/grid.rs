use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A uniform axis `lo, lo + h, ..., hi` with `n` nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidGrid(format!("axis needs >= 3 nodes, got {n}")));
        }
        if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
            return Err(Error::InvalidGrid(format!(
                "axis bounds [{lo}, {hi}] are not increasing"
            )));
        }
        Ok(Axis { lo, hi, n })
    }

    /// Axis with spacing `h` centred so that `lo` and `hi` are both nodes.
    pub fn with_spacing(lo: f64, hi: f64, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::InvalidGrid(format!("spacing must be positive, got {h}")));
        }
        let n = ((hi - lo) / h).round() as usize + 1;
        Axis::new(lo, hi, n)
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.n - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.hi
        } else {
            self.lo + i as f64 * self.spacing()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    /// Cell index `i` and weight `w` with `x = (1-w) node(i) + w node(i+1)`.
    pub fn locate(&self, x: f64) -> Option<(usize, f64)> {
        if !self.contains(x) {
            return None;
        }
        let s = (x - self.lo) / self.spacing();
        let i = (s.floor() as usize).min(self.n - 2);
        Some((i, (s - i as f64).clamp(0.0, 1.0)))
    }

    /// Index of the node equal to `x` up to a relative tolerance.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let s = (x - self.lo) / self.spacing();
        let i = s.round();
        if i < 0.0 || i as usize >= self.n {
            return None;
        }
        let tol = 1e-9 * (1.0 + x.abs());
        ((self.node(i as usize) - x).abs() <= tol).then_some(i as usize)
    }
}

/// Extended-real function sampled on a 1D or 2D uniform grid.
///
/// `+inf` is stored as `f64::INFINITY`. Values are row-major with axis 0 outer.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    axes: Vec<Axis>,
    values: Vec<f64>,
    pub is_convex: bool,
    pub is_lsc: bool,
    /// Nodes whose value was produced by a sup or limit that hit the box edge.
    pub saturated: Vec<bool>,
}

impl GridFunction {
    pub fn new(axes: Vec<Axis>, values: Vec<f64>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(Error::InvalidGrid(format!("dimension {} not in {{1, 2}}", axes.len())));
        }
        for a in &axes {
            Axis::new(a.lo, a.hi, a.n)?;
        }
        let len: usize = axes.iter().map(|a| a.n).product();
        if values.len() != len {
            return Err(Error::InvalidGrid(format!(
                "expected {len} values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| v.is_nan() || *v == f64::NEG_INFINITY) {
            return Err(Error::InvalidGrid("values must be finite or +inf".into()));
        }
        Ok(GridFunction {
            axes,
            saturated: vec![false; len],
            values,
            is_convex: false,
            is_lsc: false,
        })
    }

    pub fn from_fn_1d(axis: Axis, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = axis.nodes().into_iter().map(f).collect();
        GridFunction::new(vec![axis], values)
    }

    pub fn from_fn_2d(a0: Axis, a1: Axis, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(a0.n * a1.n);
        for i in 0..a0.n {
            for j in 0..a1.n {
                values.push(f(a0.node(i), a1.node(j)));
            }
        }
        GridFunction::new(vec![a0, a1], values)
    }

    /// Same grid, new values; flags reset.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        GridFunction::new(self.axes.clone(), values)
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_proper(&self) -> bool {
        self.values.iter().any(|v| v.is_finite())
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        match idx {
            [i] => *i,
            [i, j] => i * self.axes[1].n + j,
            _ => panic!("index dimension mismatch"),
        }
    }

    pub fn multi_index(&self, k: usize) -> Vec<usize> {
        match self.axes.len() {
            1 => vec![k],
            _ => vec![k / self.axes[1].n, k % self.axes[1].n],
        }
    }

    pub fn point(&self, k: usize) -> Vec<f64> {
        self.multi_index(k)
            .iter()
            .zip(&self.axes)
            .map(|(&i, a)| a.node(i))
            .collect()
    }

    pub fn at(&self, idx: &[usize]) -> f64 {
        self.values[self.flat_index(idx)]
    }

    /// True when node `k` lies on the boundary of the grid box.
    pub fn on_box_edge(&self, k: usize) -> bool {
        self.multi_index(k)
            .iter()
            .zip(&self.axes)
            .any(|(&i, a)| i == 0 || i + 1 == a.n)
    }

    /// Piecewise-(bi)linear interpolation; `+inf` if any corner of the cell is `+inf`
    /// with nonzero weight, `None` outside the box.
    pub fn interpolate(&self, p: &[f64]) -> Option<f64> {
        match (self.axes.as_slice(), p) {
            ([a], [x]) => {
                let (i, w) = a.locate(*x)?;
                Some(lerp(self.values[i], self.values[i + 1], w))
            }
            ([a, b], [x, y]) => {
                let (i, u) = a.locate(*x)?;
                let (j, w) = b.locate(*y)?;
                let lo = lerp(self.at(&[i, j]), self.at(&[i, j + 1]), w);
                let hi = lerp(self.at(&[i + 1, j]), self.at(&[i + 1, j + 1]), w);
                Some(lerp(lo, hi, u))
            }
            _ => None,
        }
    }

    /// Largest absolute difference between adjacent finite nodes along any axis.
    pub fn grid_modulus(&self) -> f64 {
        let mut m: f64 = 0.0;
        for k in 0..self.values.len() {
            let v = self.values[k];
            if !v.is_finite() {
                continue;
            }
            for nb in self.forward_neighbours(k) {
                let w = self.values[nb];
                if w.is_finite() {
                    m = m.max((w - v).abs());
                }
            }
        }
        m
    }

    /// Neighbours at index +1 along each axis.
    pub(crate) fn forward_neighbours(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        let idx = self.multi_index(k);
        let dims = self.axes.len();
        (0..dims).filter_map(move |d| {
            let mut i = idx.clone();
            i[d] += 1;
            (i[d] < self.axes[d].n).then(|| self.flat_index(&i))
        })
    }

    /// Whether the finite values satisfy discrete convexity within `tol`.
    ///
    /// 1D uses second differences at interior finite nodes; 2D checks that the function
    /// lies on its own lower convex envelope.
    pub fn check_convex(&self, tol: f64) -> Result<bool> {
        match self.axes.len() {
            1 => {
                let v = &self.values;
                Ok((1..v.len() - 1).all(|i| {
                    let (a, b, c) = (v[i - 1], v[i], v[i + 1]);
                    !(a.is_finite() && b.is_finite() && c.is_finite()) || a - 2.0 * b + c >= -tol
                }) && finite_domain_is_interval(v))
            }
            _ => {
                let hull = super::envelope::convexify(self)?;
                Ok(self
                    .values
                    .iter()
                    .zip(hull.values())
                    .all(|(a, b)| (a.is_infinite() && b.is_infinite()) || (a - b).abs() <= tol))
            }
        }
    }

    /// Default convexity tolerance relative to the value scale.
    pub fn convexity_tol(&self) -> f64 {
        let scale = self
            .values
            .iter()
            .filter(|v| v.is_finite())
            .fold(0.0f64, |m, v| m.max(v.abs()));
        1e-9 * (1.0 + scale)
    }

    /// CSV with header `axis0[,axis1],value`; `+inf` written as `inf`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<String> = (0..self.axes.len()).map(|d| format!("axis{d}")).collect();
        header.push("value".into());
        out.write_record(&header)?;
        for k in 0..self.values.len() {
            let mut rec: Vec<String> = self.point(k).iter().map(|x| fmt_f64(*x)).collect();
            rec.push(fmt_f64(self.values[k]));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Parses the format written by [`GridFunction::write_csv`]. Rows must enumerate a
    /// uniform grid in row-major order.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let header = rdr.headers()?.clone();
        let dim = match header.iter().collect::<Vec<_>>().as_slice() {
            ["axis0", "value"] => 1,
            ["axis0", "axis1", "value"] => 2,
            _ => return Err(Error::InvalidGrid("header must be axis0[,axis1],value".into())),
        };
        let mut coords: Vec<Vec<f64>> = vec![Vec::new(); dim];
        let mut values = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() != dim + 1 {
                return Err(Error::InvalidGrid(format!("row has {} fields", rec.len())));
            }
            for d in 0..dim {
                coords[d].push(parse_f64(&rec[d])?);
            }
            values.push(parse_f64(&rec[dim])?);
        }
        let axes = infer_axes(&coords)?;
        let g = GridFunction::new(axes, values)?;
        for (k, _) in g.values.iter().enumerate() {
            let p = g.point(k);
            for d in 0..dim {
                let tol = 1e-9 * (1.0 + p[d].abs()) + 1e-9 * g.axes[d].spacing();
                if (p[d] - coords[d][k]).abs() > tol {
                    return Err(Error::InvalidGrid(format!(
                        "row {k} coordinate {} does not match a uniform row-major grid",
                        coords[d][k]
                    )));
                }
            }
        }
        Ok(g)
    }
}

fn infer_axes(coords: &[Vec<f64>]) -> Result<Vec<Axis>> {
    let len = coords.first().map_or(0, |c| c.len());
    if len == 0 {
        return Err(Error::InvalidGrid("no rows".into()));
    }
    match coords {
        [c0] => Ok(vec![axis_from_sorted(c0)?]),
        [c0, c1] => {
            let n1 = c0.iter().take_while(|&&x| x == c0[0]).count();
            if n1 == 0 || !len.is_multiple_of(n1) {
                return Err(Error::InvalidGrid("rows are not a full 2D grid".into()));
            }
            let a0: Vec<f64> = c0.iter().step_by(n1).copied().collect();
            Ok(vec![axis_from_sorted(&a0)?, axis_from_sorted(&c1[..n1])?])
        }
        _ => Err(Error::InvalidGrid("dimension must be 1 or 2".into())),
    }
}

fn axis_from_sorted(c: &[f64]) -> Result<Axis> {
    let (lo, hi) = (c[0], c[c.len() - 1]);
    if c.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidGrid("axis coordinates must be finite".into()));
    }
    Axis::new(lo, hi, c.len())
}

fn parse_f64(s: &str) -> Result<f64> {
    match s.trim() {
        "inf" | "+inf" => Ok(f64::INFINITY),
        t => t
            .parse::<f64>()
            .map_err(|_| Error::InvalidGrid(format!("bad number '{t}'"))),
    }
}

/// Shortest round-trip representation.
pub(crate) fn fmt_f64(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else {
        format!("{x:?}")
    }
}

pub(crate) fn lerp(a: f64, b: f64, w: f64) -> f64 {
    if w == 0.0 {
        a
    } else if w == 1.0 {
        b
    } else if a.is_infinite() || b.is_infinite() {
        f64::INFINITY
    } else {
        a + w * (b - a)
    }
}

fn finite_domain_is_interval(v: &[f64]) -> bool {
    let first = v.iter().position(|x| x.is_finite());
    let last = v.iter().rposition(|x| x.is_finite());
    match (first, last) {
        (Some(a), Some(b)) => v[a..=b].iter().all(|x| x.is_finite()),
        _ => true,
    }
}
