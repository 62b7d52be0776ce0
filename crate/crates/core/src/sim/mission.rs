//! Mission configuration and generation, and the synthetic human.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::controller::{MissionController, TransparencyRule};
use super::log::{ParticipantKind, SessionLog};
use super::{invalid, SimError};
use crate::model::{
    sample_initial_state, sample_next_state, sample_observation, ActionTriple, ObservationPair,
    ProductState, Stimulus, Transparency, TrustWorkloadModel,
};
use crate::policy::{DecisionRewardTable, ReliabilitySpec};

/// Seconds spent searching a building in each armor, and the recovery
/// penalty for meeting a threat in light armor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmorTimings {
    pub light: f64,
    pub heavy: f64,
    pub injury: f64,
}

impl Default for ArmorTimings {
    fn default() -> Self {
        Self {
            light: 3.0,
            heavy: 7.0,
            injury: 20.0,
        }
    }
}

impl ArmorTimings {
    pub fn decision_table(&self) -> Result<DecisionRewardTable, SimError> {
        Ok(DecisionRewardTable::from_timings(self.light, self.heavy, self.injury)?)
    }
}

/// How transparency is chosen during a mission.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransparencyPolicy {
    FixedLow,
    FixedMedium,
    FixedHigh,
    ClosedLoop { zeta: f64 },
}

impl TransparencyPolicy {
    /// The six policies compared in the standard experiment.
    pub fn standard() -> Vec<TransparencyPolicy> {
        let mut v = vec![
            TransparencyPolicy::FixedLow,
            TransparencyPolicy::FixedMedium,
            TransparencyPolicy::FixedHigh,
        ];
        v.extend(
            crate::policy::ZETA_PRESETS
                .iter()
                .map(|&zeta| TransparencyPolicy::ClosedLoop { zeta }),
        );
        v
    }

    pub fn fixed(&self) -> Option<Transparency> {
        match self {
            TransparencyPolicy::FixedLow => Some(Transparency::Low),
            TransparencyPolicy::FixedMedium => Some(Transparency::Medium),
            TransparencyPolicy::FixedHigh => Some(Transparency::High),
            TransparencyPolicy::ClosedLoop { .. } => None,
        }
    }
}

impl fmt::Display for TransparencyPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransparencyPolicy::FixedLow => f.write_str("fixed_low"),
            TransparencyPolicy::FixedMedium => f.write_str("fixed_medium"),
            TransparencyPolicy::FixedHigh => f.write_str("fixed_high"),
            TransparencyPolicy::ClosedLoop { zeta } => write!(f, "closed_loop_{zeta:.2}"),
        }
    }
}

impl FromStr for TransparencyPolicy {
    type Err = String;

    /// Accepts `fixed_low|fixed_medium|fixed_high|L|M|H` and
    /// `closed_loop_<zeta>` or `closed_loop:<zeta>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().to_ascii_lowercase();
        match t.as_str() {
            "fixed_low" | "l" | "low" => return Ok(TransparencyPolicy::FixedLow),
            "fixed_medium" | "m" | "medium" => return Ok(TransparencyPolicy::FixedMedium),
            "fixed_high" | "h" | "high" => return Ok(TransparencyPolicy::FixedHigh),
            _ => {}
        }
        let zeta = t
            .strip_prefix("closed_loop_")
            .or_else(|| t.strip_prefix("closed_loop:"))
            .ok_or_else(|| format!("unknown policy `{s}`"))?;
        let zeta: f64 = zeta
            .parse()
            .map_err(|_| format!("bad zeta in policy `{s}`"))?;
        if !(0.0..=1.0).contains(&zeta) {
            return Err(format!("zeta must lie in [0, 1] in policy `{s}`"));
        }
        Ok(TransparencyPolicy::ClosedLoop { zeta })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionConfig {
    pub trials_per_mission: usize,
    pub reliability: ReliabilitySpec,
    pub timings: ArmorTimings,
    pub policy: TransparencyPolicy,
    pub seed: u64,
}

impl Default for MissionConfig {
    fn default() -> Self {
        Self {
            trials_per_mission: 15,
            reliability: ReliabilitySpec::STUDY,
            timings: ArmorTimings::default(),
            policy: TransparencyPolicy::FixedMedium,
            seed: 0,
        }
    }
}

impl MissionConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.trials_per_mission == 0 {
            return Err(invalid("trials_per_mission", "must be >= 1"));
        }
        self.reliability.validate()?;
        self.timings.decision_table()?;
        Ok(())
    }
}

/// Ground truth and the aid's recommendation for one building.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissionTrial {
    pub truth: Stimulus,
    pub recommendation: Stimulus,
}

impl MissionTrial {
    pub fn correct(&self) -> bool {
        self.truth == self.recommendation
    }
}

/// I.i.d. truths with prior `d`; the recommendation errs with probability
/// `alpha` on absent truths and `beta` on present ones.
pub fn generate_mission<R: Rng + ?Sized>(cfg: &MissionConfig, rng: &mut R) -> Vec<MissionTrial> {
    let r = &cfg.reliability;
    (0..cfg.trials_per_mission)
        .map(|_| {
            let truth = if rng.random_bool(r.d) {
                Stimulus::Present
            } else {
                Stimulus::Absent
            };
            let err = match truth {
                Stimulus::Absent => r.alpha,
                Stimulus::Present => r.beta,
            };
            let recommendation = if rng.random_bool(err) {
                Stimulus::ALL[1 - truth.index()]
            } else {
                truth
            };
            MissionTrial {
                truth,
                recommendation,
            }
        })
        .collect()
}

/// Move the hidden state with `a`, then emit from the new state.
pub fn synthetic_human_step<R: Rng + ?Sized>(
    state: ProductState,
    a: ActionTriple,
    m: &TrustWorkloadModel,
    rng: &mut R,
) -> (ProductState, ObservationPair) {
    let next = sample_next_state(state, a, m, rng);
    let obs = sample_observation(next, m, rng);
    (next, obs)
}

/// Run one mission against a synthetic human. The controller filters with
/// `controller_model`; the human is sampled from `human_model`.
pub fn run_mission<R: Rng + ?Sized>(
    cfg: &MissionConfig,
    controller_model: &TrustWorkloadModel,
    rule: &TransparencyRule,
    human_model: &TrustWorkloadModel,
    rng: &mut R,
) -> Result<SessionLog, SimError> {
    cfg.validate()?;
    let trials = generate_mission(cfg, rng);
    let mut ctrl = MissionController::new(
        controller_model.clone(),
        rule.clone(),
        cfg.timings.decision_table()?,
        trials,
    );
    let mut state = sample_initial_state(human_model, rng);
    while !ctrl.is_complete() {
        let issued = ctrl.issue()?;
        let (next, obs) = synthetic_human_step(state, issued.action(), human_model, rng);
        state = next;
        ctrl.respond(obs, Some(next), &[])?;
    }
    Ok(SessionLog::new(
        "synthetic",
        "mission",
        cfg.clone(),
        ParticipantKind::Synthetic,
        ctrl.into_records(),
    ))
}
