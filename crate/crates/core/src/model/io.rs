//! Versioned JSON document for [`TrustWorkloadModel`].
//!
//! The document lists the action labels in index order so a reader can
//! check that the 12-action layout matches its own.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::chains::{ModelViolation, TrustModel, TrustWorkloadModel, WorkloadModel};
use super::types::ActionTriple;
use crate::util::write_atomic;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed model document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported format_version {found} (expected {MODEL_FORMAT_VERSION})")]
    Version { found: u32 },
    #[error("action_order[{position}] is `{found}`, expected `{expected}`")]
    ActionOrder {
        position: usize,
        found: String,
        expected: String,
    },
    #[error("model violates {} invariant(s): {}", .0.len(), .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<ModelViolation>),
}

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    format_version: u32,
    action_order: Vec<String>,
    trust: TrustModel,
    workload: WorkloadModel,
}

pub fn action_order_labels() -> Vec<String> {
    ActionTriple::all().map(|a| a.label()).collect()
}

pub fn model_to_json(m: &TrustWorkloadModel) -> String {
    let doc = ModelDocument {
        format_version: MODEL_FORMAT_VERSION,
        action_order: action_order_labels(),
        trust: m.trust.clone(),
        workload: m.workload.clone(),
    };
    serde_json::to_string_pretty(&doc).expect("model serializes")
}

pub fn model_from_json(text: &str) -> Result<TrustWorkloadModel, ModelIoError> {
    let doc: ModelDocument = serde_json::from_str(text)?;
    if doc.format_version != MODEL_FORMAT_VERSION {
        return Err(ModelIoError::Version {
            found: doc.format_version,
        });
    }
    let expected = action_order_labels();
    for position in 0..expected.len().max(doc.action_order.len()) {
        let found = doc.action_order.get(position).cloned().unwrap_or_default();
        let want = expected.get(position).cloned().unwrap_or_default();
        if found != want {
            return Err(ModelIoError::ActionOrder {
                position,
                found,
                expected: want,
            });
        }
    }
    let model = TrustWorkloadModel {
        trust: doc.trust,
        workload: doc.workload,
    };
    model.validate().map_err(ModelIoError::Invalid)?;
    Ok(model)
}

/// SHA-256 of the canonical document, hex encoded.
pub fn model_hash(m: &TrustWorkloadModel) -> String {
    let digest = Sha256::digest(model_to_json(m).as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn export_model(m: &TrustWorkloadModel, path: &Path) -> Result<(), ModelIoError> {
    let mut text = model_to_json(m);
    text.push('\n');
    write_atomic(path, text.as_bytes()).map_err(|source| ModelIoError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_model(path: &Path) -> Result<TrustWorkloadModel, ModelIoError> {
    let text = fs::read_to_string(path).map_err(|source| ModelIoError::Io {
        path: path.display().to_string(),
        source,
    })?;
    model_from_json(&text)
}
