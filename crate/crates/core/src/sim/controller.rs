//! Per-mission state machine: issue a trial, accept the response, update
//! the belief, choose the next transparency. Shared by the simulator and
//! the live session service.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::log::TrialRecord;
use super::mission::MissionTrial;
use super::{SimError, TransparencyPolicy};
use crate::model::{
    belief_update, ActionTriple, Belief, BeliefError, Experience, ObservationPair, ProductState,
    Stimulus, Transparency, TrustWorkloadModel,
};
use crate::policy::{
    compliance_to_inference, select_transparency, solve_qmdp, DecisionRewardTable, QTable,
    ReliabilitySpec, RewardSpec, STUDY_GAMMA,
};

pub const ZERO_LIKELIHOOD_FLAG: &str = "zero_likelihood";

/// A resolved transparency policy.
#[derive(Debug, Clone)]
pub enum TransparencyRule {
    Fixed(Transparency),
    QMdp(Arc<QTable>),
}

impl TransparencyRule {
    /// Solve the Q table for closed-loop policies.
    pub fn resolve(
        policy: &TransparencyPolicy,
        model: &TrustWorkloadModel,
        reliability: &ReliabilitySpec,
        table: &DecisionRewardTable,
    ) -> Result<Self, SimError> {
        Ok(match (policy.fixed(), policy) {
            (Some(t), _) => TransparencyRule::Fixed(t),
            (None, TransparencyPolicy::ClosedLoop { zeta }) => {
                let spec = RewardSpec {
                    decision_table: *table,
                    zeta: *zeta,
                    gamma: STUDY_GAMMA,
                };
                TransparencyRule::QMdp(Arc::new(solve_qmdp(model, &spec, reliability)?))
            }
            (None, _) => unreachable!("only closed-loop policies lack a fixed level"),
        })
    }

    pub fn choose(&self, b: &Belief, rec: Stimulus, exp: Experience) -> Transparency {
        match self {
            TransparencyRule::Fixed(t) => *t,
            TransparencyRule::QMdp(q) => select_transparency(b, q, rec, exp),
        }
    }
}

/// One filter step with the zero-likelihood fallback: on failure the
/// predicted belief is kept and the second value is true.
pub fn filter_step(
    b: &Belief,
    a: ActionTriple,
    obs: &ObservationPair,
    m: &TrustWorkloadModel,
) -> Result<(Belief, bool), BeliefError> {
    match belief_update(b, a, obs, m) {
        Ok(next) => Ok((next, false)),
        Err(BeliefError::ZeroLikelihood { predicted, .. }) => Ok((predicted, true)),
        Err(e) => Err(e),
    }
}

/// A trial shown to the participant and awaiting a response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IssuedTrial {
    pub trial_index: usize,
    pub truth: Stimulus,
    pub recommendation: Stimulus,
    pub experience: Experience,
    pub transparency: Transparency,
    /// Controller belief when the transparency was chosen.
    pub belief: Belief,
}

impl IssuedTrial {
    pub fn action(&self) -> ActionTriple {
        ActionTriple::new(self.recommendation, self.experience, self.transparency)
    }
}

#[derive(Debug, Clone)]
pub struct MissionController {
    model: TrustWorkloadModel,
    rule: TransparencyRule,
    table: DecisionRewardTable,
    trials: Vec<MissionTrial>,
    belief: Belief,
    /// Experience carried into the next trial; the first trial counts as
    /// following a reliable recommendation.
    experience: Experience,
    pending: Option<IssuedTrial>,
    records: Vec<TrialRecord>,
}

impl MissionController {
    pub fn new(
        model: TrustWorkloadModel,
        rule: TransparencyRule,
        table: DecisionRewardTable,
        trials: Vec<MissionTrial>,
    ) -> Self {
        let belief = Belief::prior(&model);
        Self {
            model,
            rule,
            table,
            trials,
            belief,
            experience: Experience::Reliable,
            pending: None,
            records: Vec::new(),
        }
    }

    pub fn is_complete(&self) -> bool {
        self.pending.is_none() && self.records.len() >= self.trials.len()
    }

    pub fn pending(&self) -> Option<&IssuedTrial> {
        self.pending.as_ref()
    }

    pub fn belief(&self) -> &Belief {
        &self.belief
    }

    pub fn records(&self) -> &[TrialRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<TrialRecord> {
        self.records
    }

    pub fn total_trials(&self) -> usize {
        self.trials.len()
    }

    /// Present the next trial.
    pub fn issue(&mut self) -> Result<IssuedTrial, SimError> {
        if let Some(p) = &self.pending {
            return Err(SimError::AwaitingResponse(p.trial_index));
        }
        let k = self.records.len();
        let trial = *self.trials.get(k).ok_or(SimError::Complete)?;
        let transparency = self
            .rule
            .choose(&self.belief, trial.recommendation, self.experience);
        let issued = IssuedTrial {
            trial_index: k,
            truth: trial.truth,
            recommendation: trial.recommendation,
            experience: self.experience,
            transparency,
            belief: self.belief,
        };
        self.pending = Some(issued);
        Ok(issued)
    }

    /// Record the response to the pending trial and update the belief.
    /// `hidden` is the true state for synthetic humans; `flags` are extra
    /// markers to log with the trial.
    pub fn respond(
        &mut self,
        obs: ObservationPair,
        hidden: Option<ProductState>,
        flags: &[&str],
    ) -> Result<&TrialRecord, SimError> {
        let issued = self.pending.take().ok_or(SimError::NotAwaiting)?;
        let (next, fell_back) = match filter_step(&self.belief, issued.action(), &obs, &self.model) {
            Ok(v) => v,
            Err(e) => {
                self.pending = Some(issued);
                return Err(super::invalid("belief", e.to_string()));
            }
        };
        let mut all_flags: Vec<String> = flags.iter().map(|s| s.to_string()).collect();
        if fell_back {
            log::warn!(
                "trial {}: observation has zero likelihood; keeping predicted belief",
                issued.trial_index
            );
            all_flags.push(ZERO_LIKELIHOOD_FLAG.into());
        }
        let inference = compliance_to_inference(issued.recommendation, obs.compliance);
        self.records.push(TrialRecord {
            trial_index: issued.trial_index,
            truth: issued.truth,
            recommendation: issued.recommendation,
            experience: issued.experience,
            transparency: issued.transparency,
            compliance: obs.compliance,
            rt_seconds: obs.response_time(),
            inference,
            decision_reward: self.table.get(issued.truth, inference),
            p_trust_high: issued.belief.p_trust_high(),
            p_workload_high: issued.belief.p_workload_high(),
            flags: all_flags,
            hidden,
        });
        self.belief = next;
        self.experience = Experience::from_outcome(issued.recommendation, issued.truth);
        Ok(self.records.last().expect("just pushed"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::reference::reference_model;
    use crate::model::Compliance;

    fn trials() -> Vec<MissionTrial> {
        vec![
            MissionTrial { truth: Stimulus::Present, recommendation: Stimulus::Absent },
            MissionTrial { truth: Stimulus::Absent, recommendation: Stimulus::Absent },
            MissionTrial { truth: Stimulus::Present, recommendation: Stimulus::Present },
        ]
    }

    #[test]
    fn state_machine_rejects_out_of_order_calls() {
        let mut c = MissionController::new(
            reference_model(),
            TransparencyRule::Fixed(Transparency::High),
            DecisionRewardTable::STUDY,
            trials(),
        );
        let obs = ObservationPair::new(Compliance::Agree, 1.2).unwrap();
        assert!(matches!(c.respond(obs, None, &[]), Err(SimError::NotAwaiting)));
        let first = c.issue().unwrap();
        assert_eq!(first.experience, Experience::Reliable);
        assert!(matches!(c.issue(), Err(SimError::AwaitingResponse(0))));
        let rec = c.respond(obs, None, &[]).unwrap().clone();
        // rec absent + agree -> inferred absent, truth present -> -23
        assert_eq!(rec.inference, Stimulus::Absent);
        assert_eq!(rec.decision_reward, -23.0);
        let second = c.issue().unwrap();
        assert_eq!(second.experience, Experience::Faulty);
        c.respond(obs, None, &[]).unwrap();
        assert_eq!(c.issue().unwrap().experience, Experience::Reliable);
        c.respond(obs, None, &["slow_rt"]).unwrap();
        assert!(c.is_complete());
        assert!(matches!(c.issue(), Err(SimError::Complete)));
        assert_eq!(c.records()[2].flags, vec!["slow_rt".to_string()]);
    }

    #[test]
    fn zero_likelihood_keeps_predicted_belief() {
        let mut m = reference_model();
        m.trust.emission = [[1.0, 0.0], [1.0, 0.0]]; // agreeing is impossible
        let mut c = MissionController::new(
            m.clone(),
            TransparencyRule::Fixed(Transparency::Low),
            DecisionRewardTable::STUDY,
            trials(),
        );
        let issued = c.issue().unwrap();
        let obs = ObservationPair::new(Compliance::Agree, 1.0).unwrap();
        let rec = c.respond(obs, None, &[]).unwrap().clone();
        assert_eq!(rec.flags, vec![ZERO_LIKELIHOOD_FLAG.to_string()]);
        let predicted = crate::model::predict(&issued.belief, issued.action(), &m);
        assert_eq!(c.belief(), &predicted);
    }
}
