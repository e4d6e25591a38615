use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepDirection {
    Below,
    Nearest,
}

/// Step function `sum_k 1_{A_k} x_k` over paths.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    /// Distinct levels in increasing order.
    pub levels: Vec<f64>,
    /// Index into `levels` for each path.
    pub cell: Vec<usize>,
}

impl Partition {
    pub fn mask(&self, k: usize) -> Vec<bool> {
        self.cell.iter().map(|&c| c == k).collect()
    }

    pub fn masks(&self) -> Vec<(Vec<bool>, f64)> {
        (0..self.levels.len()).map(|k| (self.mask(k), self.levels[k])).collect()
    }

    /// Level assigned to each path.
    pub fn values(&self) -> Vec<f64> {
        self.cell.iter().map(|&c| self.levels[c]).collect()
    }
}

/// Rounds each value to the grid `delta * Z`, downward (`level <= v`) or to nearest.
pub fn step_approximation(values: &[f64], delta: f64, direction: StepDirection) -> Result<Partition> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("step approximation of an empty sample".into()));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "level spacing must be positive, got {delta}"
        )));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite value {v}")));
    }
    let level = |v: f64| -> f64 {
        match direction {
            StepDirection::Below => {
                let l = delta * (v / delta).floor();
                if l > v {
                    delta * ((v / delta).floor() - 1.0)
                } else {
                    l
                }
            }
            StepDirection::Nearest => delta * (v / delta).round(),
        }
    };
    // `+ 0.0` folds -0.0 into 0.0 so dedup and the total-order search agree
    let per_path: Vec<f64> = values.iter().map(|&v| level(v) + 0.0).collect();
    let mut levels = per_path.clone();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let cell = per_path
        .iter()
        .map(|l| levels.binary_search_by(|x| x.total_cmp(l)).expect("level present"))
        .collect();
    Ok(Partition { levels, cell })
}
