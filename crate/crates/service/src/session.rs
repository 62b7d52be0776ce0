//! One live mission: wraps the shared mission controller, adds display cues
//! and an append-only CSV log.

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use trustwork_core::estimation::sessions::append_session_rows;
use trustwork_core::model::{Compliance, ObservationPair, Stimulus, Transparency};
use trustwork_core::sim::{compute_metrics, IssuedTrial, MissionController, SimError};

use crate::cues::{generate_cues, CueConfig, Cues};
use crate::{ServiceError, SCHEMA_VERSION};

/// Response times above this are kept but flagged.
pub const SLOW_RT_SECONDS: f64 = 120.0;
pub const SLOW_RT_FLAG: &str = "slow_rt";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    AwaitingResponse,
    BetweenTrials,
    Finished,
}

/// The recommendation as the participant sees it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArmorAdvice {
    LightArmor,
    HeavyArmor,
}

impl From<Stimulus> for ArmorAdvice {
    fn from(s: Stimulus) -> Self {
        match s {
            Stimulus::Absent => ArmorAdvice::LightArmor,
            Stimulus::Present => ArmorAdvice::HeavyArmor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialPayload {
    pub schema_version: u32,
    pub trial_index: usize,
    pub total_trials: usize,
    pub recommendation: ArmorAdvice,
    pub transparency: Transparency,
    #[serde(flatten)]
    pub cues: Cues,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub schema_version: u32,
    pub session_id: String,
    pub participant_id: String,
    pub policy: String,
    pub state: SessionState,
    pub trials_completed: usize,
    pub total_trials: usize,
    pub total_decision_reward: f64,
    /// Minus the summed response times.
    pub total_rt_reward: f64,
    pub log_file: String,
    /// The trial awaiting a response, so a reloaded client can resume.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pending_trial: Option<TrialPayload>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseRequest {
    /// Trial being answered; when given it must match the pending trial.
    #[serde(default)]
    pub trial_index: Option<usize>,
    pub compliance: Compliance,
    pub rt_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseReply {
    pub schema_version: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trial: Option<TrialPayload>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<SessionSummary>,
}

pub struct LiveSession {
    pub id: String,
    pub participant_id: String,
    pub policy: String,
    controller: MissionController,
    cue_rng: ChaCha8Rng,
    cue_cfg: CueConfig,
    pending: Option<TrialPayload>,
    state: SessionState,
    log_path: PathBuf,
}

impl LiveSession {
    /// Issue the first trial. `seed` drives the display cues; the mission
    /// itself is already baked into `controller`.
    pub fn start(
        id: String,
        participant_id: String,
        policy: String,
        controller: MissionController,
        cue_cfg: CueConfig,
        seed: u64,
        log_path: PathBuf,
    ) -> Result<(Self, TrialPayload), ServiceError> {
        let mut cue_rng = ChaCha8Rng::seed_from_u64(seed);
        cue_rng.set_stream(1);
        let mut s = Self {
            id,
            participant_id,
            policy,
            controller,
            cue_rng,
            cue_cfg,
            pending: None,
            state: SessionState::BetweenTrials,
            log_path,
        };
        let first = s.issue_next()?;
        Ok((s, first))
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    pub fn pending(&self) -> Option<&TrialPayload> {
        self.pending.as_ref()
    }

    fn issue_next(&mut self) -> Result<TrialPayload, ServiceError> {
        let issued: IssuedTrial = self.controller.issue().map_err(internal)?;
        let cues = generate_cues(issued.truth, issued.transparency, &self.cue_cfg, &mut self.cue_rng);
        let payload = TrialPayload {
            schema_version: SCHEMA_VERSION,
            trial_index: issued.trial_index,
            total_trials: self.controller.total_trials(),
            recommendation: issued.recommendation.into(),
            transparency: issued.transparency,
            cues,
        };
        self.pending = Some(payload.clone());
        self.state = SessionState::AwaitingResponse;
        Ok(payload)
    }

    /// Record a response. Every rejection leaves the session untouched.
    pub fn respond(&mut self, req: &ResponseRequest) -> Result<ResponseReply, ServiceError> {
        let pending = match (self.state, &self.pending) {
            (SessionState::AwaitingResponse, Some(p)) => p.trial_index,
            (SessionState::Finished, _) => {
                return Err(ServiceError::Conflict("session is finished".into()))
            }
            _ => return Err(ServiceError::Conflict("no trial is awaiting a response".into())),
        };
        if let Some(k) = req.trial_index {
            if k != pending {
                return Err(ServiceError::Conflict(format!(
                    "response for trial {k} but trial {pending} is pending"
                )));
            }
        }
        let obs = ObservationPair::new(req.compliance, req.rt_seconds).map_err(|e| {
            ServiceError::Validation {
                field: "rt_seconds".into(),
                message: e.to_string(),
            }
        })?;
        let flags: &[&str] = if req.rt_seconds > SLOW_RT_SECONDS {
            &[SLOW_RT_FLAG]
        } else {
            &[]
        };
        let row = self
            .controller
            .respond(obs, None, flags)
            .map_err(internal)?
            .to_row(&self.participant_id, &self.id);
        self.pending = None;
        self.state = SessionState::BetweenTrials;
        // the record is in memory either way; a failed write is reported but
        // the mission can continue
        if let Err(e) = append_session_rows(&self.log_path, &[row]) {
            log::error!("session {}: {e}", self.id);
        }
        if self.controller.is_complete() {
            self.state = SessionState::Finished;
            log::info!("session {} finished", self.id);
            return Ok(ResponseReply {
                schema_version: SCHEMA_VERSION,
                trial: None,
                summary: Some(self.summary()),
            });
        }
        let next = self.issue_next()?;
        Ok(ResponseReply {
            schema_version: SCHEMA_VERSION,
            trial: Some(next),
            summary: None,
        })
    }

    pub fn summary(&self) -> SessionSummary {
        let records = self.controller.records();
        let (decision, rt) = compute_metrics(records);
        SessionSummary {
            schema_version: SCHEMA_VERSION,
            session_id: self.id.clone(),
            participant_id: self.participant_id.clone(),
            policy: self.policy.clone(),
            state: self.state,
            trials_completed: records.len(),
            total_trials: self.controller.total_trials(),
            total_decision_reward: decision,
            total_rt_reward: rt,
            log_file: self.log_path.display().to_string(),
            pending_trial: self.pending.clone(),
        }
    }
}

fn internal(e: SimError) -> ServiceError {
    ServiceError::Internal(e.to_string())
}
