//! Removal of disengaged participants by a pooled response-time percentile.

use serde::Serialize;

use super::{EstimationError, Sequence};

#[derive(Debug, Clone, Serialize)]
pub struct FilterReport {
    /// RT percentile of the pooled trials (seconds).
    pub threshold: f64,
    pub kept: Vec<Sequence>,
    /// Removed participant ids, in order of first appearance.
    pub removed: Vec<String>,
}

/// Linear-interpolation percentile of sorted data, `q` in [0, 1].
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Drop every participant with any RT strictly above the pooled
/// `percentile` of all RTs. The threshold is computed once, on the full pool.
pub fn filter_outlier_participants(
    sessions: &[Sequence],
    percentile: f64,
) -> Result<FilterReport, EstimationError> {
    if !(percentile > 0.0 && percentile < 1.0) {
        return Err(EstimationError::Argument(format!(
            "percentile must lie strictly between 0 and 1 (got {percentile})"
        )));
    }
    let mut rts: Vec<f64> = sessions
        .iter()
        .flat_map(|s| s.trials.iter().map(|t| t.observation.response_time()))
        .collect();
    if rts.is_empty() {
        return Err(EstimationError::EmptyData);
    }
    rts.sort_by(f64::total_cmp);
    let threshold = percentile_sorted(&rts, percentile);

    let mut removed: Vec<String> = Vec::new();
    for s in sessions {
        let over = s
            .trials
            .iter()
            .any(|t| t.observation.response_time() > threshold);
        if over && !removed.contains(&s.participant_id) {
            removed.push(s.participant_id.clone());
        }
    }
    let kept = sessions
        .iter()
        .filter(|s| !removed.contains(&s.participant_id))
        .cloned()
        .collect();
    Ok(FilterReport {
        threshold,
        kept,
        removed,
    })
}
