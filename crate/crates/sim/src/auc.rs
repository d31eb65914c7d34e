//! ROC AUC of per-individual infection marginals against the ground truth.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How a tied (infected, healthy) score pair is counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieRule {
    /// Ties count one half (Mann-Whitney convention).
    #[default]
    Half,
    /// Only strictly larger infected scores count.
    Strict,
}

/// Fraction of (infected, healthy) pairs ranked correctly by `scores`.
pub fn auc(scores: &[f64], infected: &[bool], ties: TieRule) -> Result<f64> {
    if scores.len() != infected.len() {
        return Err(gt_core::Error::Dimension {
            expected: infected.len(),
            actual: scores.len(),
        }
        .into());
    }
    let pos: Vec<f64> = scores
        .iter()
        .zip(infected)
        .filter(|(_, &y)| y)
        .map(|(s, _)| *s)
        .collect();
    let neg: Vec<f64> = scores
        .iter()
        .zip(infected)
        .filter(|(_, &y)| !y)
        .map(|(s, _)| *s)
        .collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::UndefinedAuc);
    }
    let tie = match ties {
        TieRule::Half => 0.5,
        TieRule::Strict => 0.0,
    };
    let mut hits = 0.0;
    for &p in &pos {
        for &n in &neg {
            if p > n {
                hits += 1.0;
            } else if p == n {
                hits += tie;
            }
        }
    }
    Ok(hits / (pos.len() * neg.len()) as f64)
}
