use serde::Serialize;

use super::run::EpisodeLog;
use crate::error::{Error, Result};

/// Per-vehicle rate statistics over the steps that earned a reward.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FairnessReport {
    pub steps: usize,
    pub per_vu_mean: Vec<f64>,
    pub per_vu_min: Vec<f64>,
    /// Jain's index of the per-vehicle means.
    pub jain_index: f64,
}

pub fn fairness_report(log: &EpisodeLog) -> Result<FairnessReport> {
    let rows: Vec<_> = log.rows.iter().filter(|r| r.reward > 0.0).collect();
    if rows.is_empty() {
        return Err(Error::EmptyLog("no nonzero-reward steps in the log".into()));
    }
    let u = log.vu_count;
    let n = rows.len() as f64;
    let per_vu_mean: Vec<f64> = (0..u).map(|i| rows.iter().map(|r| r.rate[i]).sum::<f64>() / n).collect();
    let per_vu_min = (0..u)
        .map(|i| rows.iter().map(|r| r.rate[i]).fold(f64::INFINITY, f64::min))
        .collect();
    let sum: f64 = per_vu_mean.iter().sum();
    let sq: f64 = per_vu_mean.iter().map(|m| m * m).sum();
    Ok(FairnessReport {
        steps: rows.len(),
        per_vu_mean,
        per_vu_min,
        jain_index: sum * sum / (u as f64 * sq),
    })
}
