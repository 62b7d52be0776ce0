//! Maximum-likelihood estimation of the trust and workload chains from
//! action/observation sequences, plus session-log ingestion and participant
//! filtering.

pub mod baum_welch;
pub mod config;
pub mod filter;
pub mod genetic;
pub mod likelihood;
mod refine;
pub mod sessions;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ActionTriple, ModelViolation, ObservationPair};

pub use baum_welch::fit_trust_model;
pub use config::{FitConfig, GaConfig, WorkloadBounds};
pub use filter::{filter_outlier_participants, FilterReport};
pub use genetic::fit_workload_model;
pub use likelihood::{log_likelihood, sequence_log_likelihood};
pub use sessions::{load_sessions, read_session_rows, SessionFormat, SessionRow};

#[derive(Debug, Error)]
pub enum EstimationError {
    #[error("no sequences supplied")]
    EmptyData,
    #[error("sequence {index} ({participant}/{mission}) has no trials")]
    EmptySequence {
        index: usize,
        participant: String,
        mission: String,
    },
    #[error("model is invalid: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidModel(Vec<ModelViolation>),
    #[error("invalid fit configuration: {0}")]
    Config(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("line {line}, field `{field}`: {message}")]
    Schema {
        line: usize,
        field: String,
        message: String,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub action: ActionTriple,
    pub observation: ObservationPair,
}

/// Trials of one mission by one participant, in presentation order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sequence {
    pub participant_id: String,
    pub mission_id: String,
    pub trials: Vec<Trial>,
}

impl Sequence {
    pub fn new(participant_id: impl Into<String>, mission_id: impl Into<String>) -> Self {
        Self {
            participant_id: participant_id.into(),
            mission_id: mission_id.into(),
            trials: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }
}

pub(crate) fn check_data(data: &[Sequence]) -> Result<(), EstimationError> {
    if data.is_empty() {
        return Err(EstimationError::EmptyData);
    }
    if let Some((index, s)) = data.iter().enumerate().find(|(_, s)| s.is_empty()) {
        return Err(EstimationError::EmptySequence {
            index,
            participant: s.participant_id.clone(),
            mission: s.mission_id.clone(),
        });
    }
    Ok(())
}

/// Result of a fit: the canonicalized model and its optimization history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport<M> {
    pub model: M,
    pub log_likelihood: f64,
    /// Per-iteration (EM) or per-generation best-so-far (GA) log-likelihood
    /// of the winning run.
    pub trace: Vec<f64>,
    pub converged: bool,
    pub restarts_used: usize,
    /// Final log-likelihood of every restart, in restart order.
    pub restart_log_likelihoods: Vec<f64>,
    pub warnings: Vec<String>,
}

/// True when no step of `trace` drops by more than `slack` relative to the
/// magnitude of the previous value (floored at 1).
pub fn trace_is_non_decreasing(trace: &[f64], slack: f64) -> bool {
    trace
        .windows(2)
        .all(|w| w[1] - w[0] >= -slack * w[0].abs().max(1.0))
}
