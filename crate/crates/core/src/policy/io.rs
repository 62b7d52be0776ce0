//! Policy files: solved Q tables plus the inputs that produced them.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::qmdp::{QTable, RewardSpec};
use super::reward::ReliabilitySpec;
use super::PolicyError;
use crate::model::{io::action_order_labels, NUM_ACTIONS, NUM_STATES};
use crate::util::write_atomic;

pub const POLICY_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyFile {
    pub format_version: u32,
    pub reward: RewardSpec,
    pub reliability: ReliabilitySpec,
    /// SHA-256 of the canonical JSON of the model the policy was solved for.
    pub model_hash: String,
    pub iterations: usize,
    pub residual: f64,
    pub action_order: Vec<String>,
    pub q_mdp: [[f64; NUM_ACTIONS]; NUM_STATES],
    pub q_tau: [[f64; 3]; NUM_STATES],
    pub value: [f64; NUM_STATES],
}

impl PolicyFile {
    pub fn new(q: &QTable, reward: RewardSpec, reliability: ReliabilitySpec, model_hash: String) -> Self {
        Self {
            format_version: POLICY_FORMAT_VERSION,
            reward,
            reliability,
            model_hash,
            iterations: q.iterations,
            residual: q.residual,
            action_order: action_order_labels(),
            q_mdp: q.q_mdp,
            q_tau: q.q_tau,
            value: q.value,
        }
    }

    pub fn q_table(&self) -> QTable {
        QTable {
            q_mdp: self.q_mdp,
            q_tau: self.q_tau,
            value: self.value,
            zeta: Some(self.reward.zeta),
            gamma: self.reward.gamma,
            iterations: self.iterations,
            residual: self.residual,
            residual_trace: Vec::new(),
        }
    }
}

pub fn policy_to_json(p: &PolicyFile) -> String {
    let mut s = serde_json::to_string_pretty(p).expect("policy serializes");
    s.push('\n');
    s
}

pub fn policy_from_json(text: &str) -> Result<PolicyFile, PolicyError> {
    let p: PolicyFile = serde_json::from_str(text)?;
    if p.format_version != POLICY_FORMAT_VERSION {
        return Err(PolicyError::Version(p.format_version));
    }
    if p.action_order != action_order_labels() {
        return Err(super::invalid("action_order", "does not match this build's action indexing"));
    }
    p.reward.validate()?;
    p.reliability.validate()?;
    if !p.q_mdp.iter().flatten().chain(p.q_tau.iter().flatten()).all(|x| x.is_finite()) {
        return Err(super::invalid("q_mdp", "entries must be finite"));
    }
    Ok(p)
}

pub fn save_policy(p: &PolicyFile, path: &Path) -> Result<(), PolicyError> {
    write_atomic(path, policy_to_json(p).as_bytes()).map_err(|e| PolicyError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

pub fn load_policy(path: &Path) -> Result<PolicyFile, PolicyError> {
    let text = std::fs::read_to_string(path).map_err(|e| PolicyError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    policy_from_json(&text)
}
