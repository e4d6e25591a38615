use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

/// Outcome of one harness check.
///
/// Every entry of `gaps` has a tolerance under the same key; `measured` holds
/// informational quantities that are not compared against anything.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub scenario: String,
    pub verdict: Verdict,
    pub gaps: BTreeMap<String, f64>,
    pub tolerances: BTreeMap<String, f64>,
    pub measured: BTreeMap<String, f64>,
    pub fingerprint: Value,
    pub notes: Vec<String>,
}

impl CheckReport {
    pub fn new(name: &str, fingerprint: Value) -> Self {
        CheckReport {
            name: name.into(),
            scenario: String::new(),
            verdict: Verdict::Pass,
            gaps: BTreeMap::new(),
            tolerances: BTreeMap::new(),
            measured: BTreeMap::new(),
            fingerprint,
            notes: Vec::new(),
        }
    }

    pub fn gap(&mut self, key: &str, value: f64, tol: f64) -> &mut Self {
        self.gaps.insert(key.into(), value);
        self.tolerances.insert(key.into(), tol);
        self
    }

    pub fn measure(&mut self, key: &str, value: f64) -> &mut Self {
        self.measured.insert(key.into(), value);
        self
    }

    pub fn note(&mut self, note: impl Into<String>) -> &mut Self {
        self.notes.push(note.into());
        self
    }

    /// Keys whose gap exceeds its tolerance (a `NaN` gap counts as exceeding).
    pub fn exceeded(&self) -> Vec<&str> {
        self.gaps
            .iter()
            .filter(|(k, v)| !(**v <= self.tolerances[*k]))
            .map(|(k, _)| k.as_str())
            .collect()
    }

    /// Sets the verdict from the gaps. Exceedances are failures only when the
    /// hypotheses of the claim were established.
    pub fn conclude(mut self, established: bool) -> Self {
        self.verdict = match (self.exceeded().is_empty(), established) {
            (true, _) => Verdict::Pass,
            (false, true) => Verdict::Fail,
            (false, false) => Verdict::Inconclusive,
        };
        self
    }

    pub fn inconclusive(mut self, why: impl Into<String>) -> Self {
        self.notes.push(why.into());
        self.verdict = Verdict::Inconclusive;
        self
    }

    /// Gap with the largest ratio to its tolerance, as `(gap, tolerance)`.
    pub fn headline(&self) -> (f64, f64) {
        let ratio = |g: f64, t: f64| {
            if t > 0.0 {
                g / t
            } else if g > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        };
        self.gaps
            .iter()
            .map(|(k, &g)| (g, self.tolerances[k]))
            .fold(None, |best: Option<(f64, f64)>, (g, t)| match best {
                Some((bg, bt)) if !(ratio(g, t) > ratio(bg, bt)) => Some((bg, bt)),
                _ => Some((g, t)),
            })
            .unwrap_or((0.0, 0.0))
    }

    pub fn with_scenario(mut self, scenario: &str) -> Self {
        self.scenario = scenario.into();
        self
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }
}

/// CSV `check,scenario,verdict,max_gap,tolerance`, one row per report.
pub fn write_summary<W: Write>(reports: &[CheckReport], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["check", "scenario", "verdict", "max_gap", "tolerance"])?;
    for r in reports {
        let (g, t) = r.headline();
        out.write_record([
            r.name.as_str(),
            r.scenario.as_str(),
            r.verdict.as_str(),
            &crate::convexlab::fmt_f64(g),
            &crate::convexlab::fmt_f64(t),
        ])?;
    }
    out.flush()?;
    Ok(())
}
