use serde::{Deserialize, Serialize};

use super::state::AttemptOutcome;
use crate::error::{ImrlError, Result};

/// Attempts summed into AFS by default.
pub const AFS_WINDOW: usize = 10;
pub const SUCCESS_THRESHOLD: f64 = 0.02;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    /// Scooping success rate.
    pub sur: f64,
    /// Spillage-or-failure rate; always `1 - sur`.
    pub sfr: f64,
    /// Amount of food scooped over the first `AFS_WINDOW` attempts.
    pub afs: f64,
    pub attempts: usize,
}

/// An attempt succeeds when it delivered at least `threshold` without
/// spilling or touching the bowl; anything else is a spill or a failure.
pub fn is_success(outcome: &AttemptOutcome, threshold: f64) -> bool {
    !outcome.spilled && !outcome.collided_with_bowl && outcome.scooped_amount >= threshold
}

pub fn episode_metrics(outcomes: &[AttemptOutcome]) -> Result<EpisodeMetrics> {
    episode_metrics_with(outcomes, SUCCESS_THRESHOLD, AFS_WINDOW)
}

pub fn episode_metrics_with(outcomes: &[AttemptOutcome], threshold: f64, window: usize) -> Result<EpisodeMetrics> {
    if outcomes.is_empty() {
        return Err(ImrlError::Metrics("no attempts to score".into()));
    }
    let n = outcomes.len();
    let successes = outcomes.iter().filter(|o| is_success(o, threshold)).count();
    let afs = outcomes.iter().take(window).map(|o| o.scooped_amount).sum();
    Ok(EpisodeMetrics {
        sur: successes as f64 / n as f64,
        sfr: (n - successes) as f64 / n as f64,
        afs,
        attempts: n,
    })
}
