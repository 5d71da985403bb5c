//! Next-turn laughter prediction: a 3x3 count table with a symmetric
//! Dirichlet prior, conditioned on the system's current laughter. The
//! self-correction loop is exact Bayesian updating.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::LaughterType;

pub const DEFAULT_PRIOR_ALPHA: f64 = 1.0;

/// Counts indexed `[system laughter][user laughter]`, row order none, social, mirthful.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaughterContagionTable {
    pub counts: [[f64; 3]; 3],
    pub prior_alpha: f64,
}

impl LaughterContagionTable {
    pub fn new(prior_alpha: f64) -> Self {
        Self { counts: [[0.0; 3]; 3], prior_alpha }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.prior_alpha > 0.0) || !self.prior_alpha.is_finite() {
            return Err(Error::invalid("prior_alpha must be finite and > 0"));
        }
        if self.counts.iter().flatten().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::invalid("counts must be finite and >= 0"));
        }
        Ok(())
    }

    /// Posterior predictive over the user's laughter given the system's.
    /// Returns the distribution (order none, social, mirthful) and its max.
    pub fn predict(&self, la_cur: LaughterType) -> ([f64; 3], f64) {
        let row = &self.counts[la_cur.index()];
        let total: f64 = row.iter().sum::<f64>() + 3.0 * self.prior_alpha;
        let mut dist = [0.0; 3];
        for (d, c) in dist.iter_mut().zip(row) {
            *d = (c + self.prior_alpha) / total;
        }
        let confidence = dist.iter().cloned().fold(0.0, f64::max);
        (dist, confidence)
    }

    /// Increment exactly one cell.
    pub fn update(&mut self, la_cur: LaughterType, la_true: LaughterType) {
        self.counts[la_cur.index()][la_true.index()] += 1.0;
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let table: Self = serde_json::from_str(s)?;
        table.validate()?;
        Ok(table)
    }
}

impl Default for LaughterContagionTable {
    fn default() -> Self {
        Self::new(DEFAULT_PRIOR_ALPHA)
    }
}
