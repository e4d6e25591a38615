use serde::{Deserialize, Serialize};

use super::envelope::{convexify, convexify_z, lsc_envelope};
use super::grid::GridFunction;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EpiMode {
    /// Painlevé–Kuratowski: lsc envelope of the tail infimum.
    Pk,
    /// Closed-convex: closed convex envelope of the tail infimum.
    Cc,
    /// Closed-convex in `z` only, slice by slice.
    Ccz,
}

/// Which suffixes of a finite list stand in for the tails `n -> inf`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TailPolicy {
    /// The whole list is the tail window: only the start index 0 counts.
    #[default]
    Full,
    /// Only the last `k` members count as the tail.
    LastK(usize),
}

#[derive(Debug, Clone)]
pub struct EpiSequence {
    members: Vec<GridFunction>,
    pub tail: TailPolicy,
}

impl EpiSequence {
    pub fn new(members: Vec<GridFunction>, tail: TailPolicy) -> Result<Self> {
        let first = members.first().ok_or(Error::EmptySequence)?;
        if let Some(bad) = members.iter().position(|m| m.axes() != first.axes()) {
            return Err(Error::GridMismatch(format!("member {bad} has different axes")));
        }
        if let TailPolicy::LastK(0) = tail {
            return Err(Error::InvalidArgument("tail length must be >= 1".into()));
        }
        Ok(EpiSequence { members, tail })
    }

    pub fn members(&self) -> &[GridFunction] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// First index of the tail window.
    pub fn tail_start(&self) -> usize {
        match self.tail {
            TailPolicy::Full => 0,
            TailPolicy::LastK(k) => self.members.len().saturating_sub(k),
        }
    }

    /// Pointwise `inf_{j >= n} f_j`.
    pub fn tail_infimum(&self, n: usize) -> Result<GridFunction> {
        let mut v = self.members[n].values().to_vec();
        for m in &self.members[n + 1..] {
            for (a, b) in v.iter_mut().zip(m.values()) {
                *a = a.min(*b);
            }
        }
        self.members[0].with_values(v)
    }
}

fn envelope(f: &GridFunction, mode: EpiMode) -> Result<GridFunction> {
    match mode {
        EpiMode::Pk => lsc_envelope(f),
        EpiMode::Cc => convexify(f),
        EpiMode::Ccz => convexify_z(f),
    }
}

/// `E(inf_{j >= n} f_j)` for every start index `n`, in order.
pub fn tail_envelopes(seq: &EpiSequence, mode: EpiMode) -> Result<Vec<GridFunction>> {
    if mode == EpiMode::Ccz && seq.members[0].dim() != 2 {
        return Err(Error::RequiresYzGrid);
    }
    (0..seq.len()).map(|n| envelope(&seq.tail_infimum(n)?, mode)).collect()
}

/// `sup_n E(inf_{j >= n} f_j)` over tail starts `n` up to the first index of the
/// policy's tail window.
pub fn epi_liminf(seq: &EpiSequence, mode: EpiMode) -> Result<GridFunction> {
    if mode == EpiMode::Ccz && seq.members[0].dim() != 2 {
        return Err(Error::RequiresYzGrid);
    }
    let last = seq.tail_start();
    let mut acc: Option<Vec<f64>> = None;
    for n in 0..=last {
        let e = envelope(&seq.tail_infimum(n)?, mode)?;
        acc = Some(match acc {
            None => e.values().to_vec(),
            Some(mut a) => {
                for (x, y) in a.iter_mut().zip(e.values()) {
                    *x = x.max(*y);
                }
                a
            }
        });
    }
    let mut g = seq.members[0].with_values(acc.expect("non-empty"))?;
    g.is_lsc = true;
    g.is_convex = mode == EpiMode::Cc;
    Ok(g)
}
