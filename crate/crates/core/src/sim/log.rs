//! Trial records, session logs, metrics and log validation.

use serde::{Deserialize, Serialize};

use super::controller::filter_step;
use super::mission::MissionConfig;
use super::{invalid, SimError};
use crate::estimation::SessionRow;
use crate::model::{
    ActionTriple, Belief, Compliance, Experience, ObservationPair, ProductState, Stimulus,
    Transparency, TrustWorkloadModel,
};
use crate::policy::{compliance_to_inference, DecisionRewardTable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_index: usize,
    pub truth: Stimulus,
    pub recommendation: Stimulus,
    pub experience: Experience,
    pub transparency: Transparency,
    pub compliance: Compliance,
    pub rt_seconds: f64,
    pub inference: Stimulus,
    pub decision_reward: f64,
    /// Controller belief marginals before the decision.
    pub p_trust_high: f64,
    pub p_workload_high: f64,
    pub flags: Vec<String>,
    /// True hidden state of a synthetic human; never shown to the controller
    /// and not written to CSV.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden: Option<ProductState>,
}

impl TrialRecord {
    pub fn action(&self) -> ActionTriple {
        ActionTriple::new(self.recommendation, self.experience, self.transparency)
    }

    pub fn observation(&self) -> Result<ObservationPair, SimError> {
        ObservationPair::new(self.compliance, self.rt_seconds)
            .map_err(|e| invalid("rt_seconds", e.to_string()))
    }

    pub fn to_row(&self, participant_id: &str, mission_id: &str) -> SessionRow {
        SessionRow {
            participant_id: participant_id.into(),
            mission_id: mission_id.into(),
            trial_index: self.trial_index,
            transparency: self.transparency,
            recommendation: self.recommendation,
            experience: self.experience,
            truth: self.truth,
            compliance: self.compliance,
            rt_seconds: self.rt_seconds,
            inference: Some(self.inference),
            decision_reward: Some(self.decision_reward),
            p_trust_high: Some(self.p_trust_high),
            p_workload_high: Some(self.p_workload_high),
            flags: self.flags.join(";"),
        }
    }

    /// Rebuild from a CSV row; the optional log columns must be present.
    pub fn from_row(row: &SessionRow) -> Result<Self, SimError> {
        let need = |v: Option<f64>, field: &'static str| {
            v.ok_or_else(|| invalid(field, format!("missing in trial {}", row.trial_index)))
        };
        Ok(Self {
            trial_index: row.trial_index,
            truth: row.truth,
            recommendation: row.recommendation,
            experience: row.experience,
            transparency: row.transparency,
            compliance: row.compliance,
            rt_seconds: row.rt_seconds,
            inference: row
                .inference
                .ok_or_else(|| invalid("inference", format!("missing in trial {}", row.trial_index)))?,
            decision_reward: need(row.decision_reward, "decision_reward")?,
            p_trust_high: need(row.p_trust_high, "p_trust_high")?,
            p_workload_high: need(row.p_workload_high, "p_workload_high")?,
            flags: row
                .flags
                .split(';')
                .filter(|s| !s.is_empty())
                .map(String::from)
                .collect(),
            hidden: None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParticipantKind {
    Synthetic,
    Live,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionLog {
    pub participant_id: String,
    pub mission_id: String,
    pub participant: ParticipantKind,
    pub config: MissionConfig,
    pub records: Vec<TrialRecord>,
    pub total_decision_reward: f64,
    /// Minus the summed response times.
    pub total_rt_reward: f64,
}

impl SessionLog {
    pub fn new(
        participant_id: impl Into<String>,
        mission_id: impl Into<String>,
        config: MissionConfig,
        participant: ParticipantKind,
        records: Vec<TrialRecord>,
    ) -> Self {
        let (d, r) = compute_metrics(&records);
        Self {
            participant_id: participant_id.into(),
            mission_id: mission_id.into(),
            participant,
            config,
            records,
            total_decision_reward: d,
            total_rt_reward: r,
        }
    }

    pub fn rows(&self) -> Vec<SessionRow> {
        self.records
            .iter()
            .map(|r| r.to_row(&self.participant_id, &self.mission_id))
            .collect()
    }
}

/// (total decision reward, total response-time reward).
pub fn compute_metrics(records: &[TrialRecord]) -> (f64, f64) {
    let decision = records.iter().map(|r| r.decision_reward).sum();
    let rt: f64 = records.iter().map(|r| r.rt_seconds).sum();
    (decision, -rt)
}

/// Check the per-trial accounting of a log. Returns one message per problem.
pub fn validate_session_log(records: &[TrialRecord], table: &DecisionRewardTable) -> Vec<String> {
    let mut problems = Vec::new();
    for (k, r) in records.iter().enumerate() {
        if r.trial_index != k {
            problems.push(format!("row {k}: trial_index {} out of sequence", r.trial_index));
        }
        let g = compliance_to_inference(r.recommendation, r.compliance);
        if r.inference != g {
            problems.push(format!("trial {k}: inference {} but mapping gives {g}", r.inference));
        }
        let expected = table.get(r.truth, r.inference);
        if r.decision_reward != expected {
            problems.push(format!(
                "trial {k}: decision reward {} but table gives {expected}",
                r.decision_reward
            ));
        }
        let exp = if k == 0 {
            Experience::Reliable
        } else {
            let p = &records[k - 1];
            Experience::from_outcome(p.recommendation, p.truth)
        };
        if r.experience != exp {
            problems.push(format!("trial {k}: experience {} but expected {exp}", r.experience));
        }
        if !(r.rt_seconds.is_finite() && r.rt_seconds > 0.0) {
            problems.push(format!("trial {k}: response time {} not positive", r.rt_seconds));
        }
    }
    problems
}

/// Re-run the filter over the logged action/observation stream and return
/// the (P(trust high), P(workload high)) snapshot before each trial.
pub fn replay_beliefs(
    records: &[TrialRecord],
    model: &TrustWorkloadModel,
) -> Result<Vec<(f64, f64)>, SimError> {
    let mut b = Belief::prior(model);
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        out.push((b.p_trust_high(), b.p_workload_high()));
        let (next, _) = filter_step(&b, r.action(), &r.observation()?, model)
            .map_err(|e| invalid("belief", e.to_string()))?;
        b = next;
    }
    Ok(out)
}

/// Indices of trials whose logged snapshot differs from the replay in any bit.
pub fn replay_mismatches(
    records: &[TrialRecord],
    model: &TrustWorkloadModel,
) -> Result<Vec<usize>, SimError> {
    let replay = replay_beliefs(records, model)?;
    Ok(records
        .iter()
        .zip(replay)
        .enumerate()
        .filter(|(_, (r, (t, w)))| {
            r.p_trust_high.to_bits() != t.to_bits() || r.p_workload_high.to_bits() != w.to_bits()
        })
        .map(|(k, _)| k)
        .collect())
}
