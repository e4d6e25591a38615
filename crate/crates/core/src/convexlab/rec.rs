use serde::{Deserialize, Serialize};

use super::envelope::convexify;
use super::grid::{Axis, GridFunction};
use super::horizon::horizon_unchecked;
use crate::error::{Error, Result};
use crate::ladder::GeneratorSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecCase {
    I,
    Ii,
    Iii,
    Iv,
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecVerdict {
    Pass,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecReport {
    pub verdict: RecVerdict,
    /// Case that established the condition, or the last one tried.
    pub case_used: RecCase,
    pub max_gap: f64,
    /// Largest distance from the box centre reached by a probed sublevel set.
    pub level_set_radius: f64,
    pub notes: Vec<String>,
}

/// Probe box in `(y, z)` and tolerances for [`rec_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecConfig {
    pub y: Axis,
    pub z: Axis,
    pub directions: Axis,
    /// Fraction of each half-width treated as the margin band.
    pub margin: f64,
    pub tol: f64,
}

impl Default for RecConfig {
    fn default() -> Self {
        RecConfig {
            y: Axis::new(-8.0, 8.0, 33).expect("static axis"),
            z: Axis::new(-8.0, 8.0, 33).expect("static axis"),
            directions: Axis::new(-1.0, 1.0, 5).expect("static axis"),
            margin: 0.1,
            tol: 1e-6,
        }
    }
}

struct Outcome {
    pass: bool,
    gap: f64,
    radius: f64,
    note: String,
}

/// Tests a sufficient condition for (REC) along `x_sequence`, whose last entry is taken
/// as the limit. Never reports (REC) as violated: failure of every tested case is
/// `Inconclusive`.
pub fn rec_check(g: &GeneratorSpec, x_sequence: &[f64], case: RecCase, cfg: &RecConfig) -> Result<RecReport> {
    if x_sequence.is_empty() {
        return Err(Error::EmptySequence);
    }
    if let Some((index, &value)) = x_sequence
        .iter()
        .enumerate()
        .find(|(_, x)| !x.is_finite() || x.abs() > 1e6)
    {
        return Err(Error::UnboundedSequence { index, value });
    }
    let cases: &[RecCase] = match case {
        RecCase::Auto => &[RecCase::I, RecCase::Ii, RecCase::Iii, RecCase::Iv],
        RecCase::I => &[RecCase::I],
        RecCase::Ii => &[RecCase::Ii],
        RecCase::Iii => &[RecCase::Iii],
        RecCase::Iv => &[RecCase::Iv],
    };
    let mut notes = Vec::new();
    let mut last = (case, 0.0, 0.0);
    for &c in cases {
        let out = match c {
            RecCase::I => case_i(g, x_sequence, cfg),
            RecCase::Ii => case_ii(g, x_sequence, cfg)?,
            RecCase::Iii => case_iii(g, x_sequence, cfg)?,
            RecCase::Iv => case_iv(g, x_sequence, cfg),
            RecCase::Auto => unreachable!(),
        };
        notes.push(format!("case {c:?}: {}", out.note));
        last = (c, out.gap, out.radius);
        if out.pass {
            return Ok(RecReport {
                verdict: RecVerdict::Pass,
                case_used: c,
                max_gap: out.gap,
                level_set_radius: out.radius,
                notes,
            });
        }
    }
    Ok(RecReport {
        verdict: RecVerdict::Inconclusive,
        case_used: last.0,
        max_gap: last.1,
        level_set_radius: last.2,
        notes,
    })
}

fn slice(g: &GeneratorSpec, x: f64, cfg: &RecConfig) -> Result<GridFunction> {
    GridFunction::from_fn_2d(cfg.y, cfg.z, |y, z| g.eval(x, y, z))
}

fn skip(note: &str) -> Outcome {
    Outcome {
        pass: false,
        gap: 0.0,
        radius: 0.0,
        note: note.into(),
    }
}

/// Separable split `g(x,y,z) = g1(x) + g2(y,z)` on the probes, and `g1` lower
/// semicontinuous along the sequence.
fn case_i(g: &GeneratorSpec, xs: &[f64], cfg: &RecConfig) -> Outcome {
    if !g.flags.separable {
        return skip("generator not declared separable");
    }
    let x0 = *xs.last().expect("non-empty");
    let g00 = g.eval(x0, 0.0, 0.0);
    let mut gap: f64 = 0.0;
    for &x in xs {
        let g1 = g.eval(x, 0.0, 0.0) - g00;
        for y in cfg.y.nodes() {
            for z in cfg.z.nodes() {
                gap = gap.max((g.eval(x, y, z) - g1 - g.eval(x0, y, z)).abs());
            }
        }
    }
    let scale = 1.0 + g00.abs();
    if gap > cfg.tol * scale {
        return Outcome {
            pass: false,
            gap,
            radius: 0.0,
            note: format!("declared split fails on probes (gap {gap:e})"),
        };
    }
    let (lsc, drop) = g1_lsc_along(g, xs, cfg.tol * scale);
    lsc_outcome(lsc, gap.max(drop.max(0.0)), drop)
}

fn lsc_outcome(lsc: bool, gap: f64, drop: f64) -> Outcome {
    Outcome {
        pass: lsc,
        gap,
        radius: 0.0,
        note: if lsc {
            "split verified, g1 lsc along the sequence".into()
        } else {
            format!("g1 drop {drop:e} below its limit value does not vanish")
        },
    }
}

/// Drops `g1(x) - g1(x_n)` must shrink at least linearly in `|x_n - x|` over the tail:
/// the drop at the entry closest to the limit is bounded by the first-half rate.
fn g1_lsc_along(g: &GeneratorSpec, xs: &[f64], tol: f64) -> (bool, f64) {
    let x0 = *xs.last().expect("non-empty");
    let body = &xs[..xs.len() - 1];
    if body.is_empty() {
        return (true, 0.0);
    }
    let g1 = |x: f64| g.eval(x, 0.0, 0.0);
    let drop = |x: f64| g1(x0) - g1(x);
    let half = &body[..body.len().div_ceil(2)];
    let rate = half
        .iter()
        .filter(|&&x| x != x0)
        .map(|&x| drop(x).max(0.0) / (x - x0).abs())
        .fold(0.0, f64::max);
    let xl = body[body.len() - 1];
    let dl = drop(xl);
    (dl <= tol + rate * (xl - x0).abs(), dl)
}

/// Horizon functions of each `g(x_n, ., .)` agree with that of the closed convex hull of
/// the family, compared only where neither is boundary-saturated.
fn case_ii(g: &GeneratorSpec, xs: &[f64], cfg: &RecConfig) -> Result<Outcome> {
    if !g.flags.jointly_convex {
        return Ok(skip("requires (y,z)-joint convexity"));
    }
    let members: Vec<GridFunction> = xs.iter().map(|&x| slice(g, x, cfg)).collect::<Result<_>>()?;
    let mut inf = members[0].values().to_vec();
    for m in &members[1..] {
        for (a, b) in inf.iter_mut().zip(m.values()) {
            *a = a.min(*b);
        }
    }
    let h = convexify(&members[0].with_values(inf)?)?;
    let dirs = [cfg.directions, cfg.directions];
    let hh = horizon_unchecked(&h, &dirs)?;
    let mut gap: f64 = 0.0;
    let mut compared = 0usize;
    for m in &members {
        let fh = horizon_unchecked(m, &dirs)?;
        for k in 0..fh.len() {
            if fh.saturated[k] || hh.saturated[k] {
                continue;
            }
            let (a, b) = (fh.values()[k], hh.values()[k]);
            if a.is_infinite() && b.is_infinite() {
                continue;
            }
            compared += 1;
            gap = gap.max((a - b).abs());
        }
    }
    let tol = cfg.tol.max(1e-3);
    let pass = gap
        <= tol
            * (1.0
                + hh.values()
                    .iter()
                    .filter(|v| v.is_finite())
                    .fold(0.0f64, |s, v| s.max(v.abs())));
    Ok(Outcome {
        pass,
        gap,
        radius: 0.0,
        note: format!("{compared} unsaturated horizon comparisons, max gap {gap:e}"),
    })
}

fn sublevel_levels(min: f64) -> [f64; 3] {
    [min + 1.0, min + 2.0, min + 4.0]
}

fn in_band(a: &Axis, v: f64, margin: f64) -> bool {
    let c = 0.5 * (a.lo + a.hi);
    let half = 0.5 * (a.hi - a.lo);
    (v - c).abs() > (1.0 - margin) * half
}

/// Sublevel sets `{(y,z) : g(x_n,y,z) <= gamma}` avoid the margin band of the box.
fn case_iii(g: &GeneratorSpec, xs: &[f64], cfg: &RecConfig) -> Result<Outcome> {
    if !g.flags.jointly_convex {
        return Ok(skip("requires (y,z)-joint convexity"));
    }
    let mut radius: f64 = 0.0;
    for &x in xs {
        let s = slice(g, x, cfg)?;
        let min = s.values().iter().copied().fold(f64::INFINITY, f64::min);
        for gamma in sublevel_levels(min) {
            for k in 0..s.len() {
                if s.values()[k] > gamma {
                    continue;
                }
                let p = s.point(k);
                radius = radius.max(p[0].abs().max(p[1].abs()));
                if in_band(&cfg.y, p[0], cfg.margin) || in_band(&cfg.z, p[1], cfg.margin) {
                    return Ok(Outcome {
                        pass: false,
                        gap: 0.0,
                        radius,
                        note: format!("sublevel set at gamma={gamma} reaches the box margin at x={x}"),
                    });
                }
            }
        }
    }
    Ok(Outcome {
        pass: true,
        gap: 0.0,
        radius,
        note: "all (y,z) sublevel sets inside the box".into(),
    })
}

/// Same as case iii, in `z` only, for each probe `y`; needs monotonicity in `y`.
fn case_iv(g: &GeneratorSpec, xs: &[f64], cfg: &RecConfig) -> Outcome {
    if g.flags.monotone_in_y.is_none() {
        return skip("requires monotonicity in y");
    }
    let zs = cfg.z.nodes();
    let mut radius: f64 = 0.0;
    for &x in xs {
        for y in cfg.y.nodes() {
            let vals: Vec<f64> = zs.iter().map(|&z| g.eval(x, y, z)).collect();
            let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
            for gamma in sublevel_levels(min) {
                for (z, v) in zs.iter().zip(&vals) {
                    if *v > gamma {
                        continue;
                    }
                    radius = radius.max(z.abs());
                    if in_band(&cfg.z, *z, cfg.margin) {
                        return Outcome {
                            pass: false,
                            gap: 0.0,
                            radius,
                            note: format!("z-sublevel set at gamma={gamma} reaches the box margin at (x,y)=({x},{y})"),
                        };
                    }
                }
            }
        }
    }
    Outcome {
        pass: true,
        gap: 0.0,
        radius,
        note: "all z-sublevel sets inside the box".into(),
    }
}
