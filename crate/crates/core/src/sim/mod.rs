//! Reconnaissance missions, synthetic humans, closed-loop execution,
//! session logs and batch experiments.

pub mod controller;
pub mod corpus;
pub mod experiment;
pub mod log;
pub mod mission;

use thiserror::Error;

use crate::estimation::EstimationError;
use crate::policy::PolicyError;

pub use controller::{filter_step, IssuedTrial, MissionController, TransparencyRule};
pub use corpus::{simulate_corpus, CorpusConfig};
pub use experiment::{run_experiment, summary_csv, ExperimentConfig, ExperimentResult, PolicySummary};
pub use log::{
    compute_metrics, replay_beliefs, replay_mismatches, validate_session_log, ParticipantKind, SessionLog, TrialRecord,
};
pub use mission::{
    generate_mission, run_mission, synthetic_human_step, ArmorTimings, MissionConfig, MissionTrial,
    TransparencyPolicy,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid {field}: {message}")]
    Invalid { field: &'static str, message: String },
    #[error("mission is complete; no further trials")]
    Complete,
    #[error("trial {0} was issued and is awaiting a response")]
    AwaitingResponse(usize),
    #[error("no trial is awaiting a response")]
    NotAwaiting,
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
}

pub(crate) fn invalid(field: &'static str, message: impl Into<String>) -> SimError {
    SimError::Invalid {
        field,
        message: message.into(),
    }
}
