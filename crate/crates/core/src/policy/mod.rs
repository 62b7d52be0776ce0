//! Reward construction, Q-MDP solution and transparency selection.

pub mod grid;
pub mod io;
pub mod qmdp;
pub mod reward;

use thiserror::Error;

use crate::model::{ModelViolation, Stimulus};

pub use grid::{export_policy_grid, grid_to_csv, GridCell};
pub use io::{load_policy, policy_from_json, policy_to_json, save_policy, PolicyFile};
pub use qmdp::{
    product_transition, select_transparency, solve_qmdp, solve_qmdp_raw, ProductTransition, QTable,
    RewardSpec, STUDY_GAMMA, VALUE_TOLERANCE, ZETA_PRESETS,
};
pub use reward::{
    combined_reward, compliance_to_inference, expected_trust_reward, expected_workload_reward,
    situation_posterior, uncontrollable_distribution, ChainReward, DecisionRewardTable,
    ProductReward, ReliabilitySpec,
};

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("invalid {field}: {message}")]
    Invalid { field: &'static str, message: String },
    #[error("recommendation `{0}` has zero probability under the reliability spec")]
    ZeroProbability(Stimulus),
    #[error("value iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("model is invalid: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidModel(Vec<ModelViolation>),
    #[error("unsupported policy format_version {0}")]
    Version(u32),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub(crate) fn invalid(field: &'static str, message: impl Into<String>) -> PolicyError {
    PolicyError::Invalid {
        field,
        message: message.into(),
    }
}
