//! Trust-workload POMDP model: alphabets, parameters, density utilities,
//! sampling and the belief filter.

pub mod belief;
pub mod chains;
pub mod exgauss;
pub mod io;
pub mod reference;
pub mod sampling;
pub mod types;

pub use belief::{belief_update, predict, Belief, BeliefError};
pub use chains::{
    validate_model, HiddenChain, ModelViolation, TransitionTable, TrustModel, TrustWorkloadModel,
    WorkloadModel,
};
pub use exgauss::{exgauss_log_pdf, exgauss_pdf, ExGaussianParams, ParamDomainError};
pub use io::{export_model, load_model, model_from_json, model_hash, model_to_json, ModelIoError};
pub use reference::reference_model;
pub use sampling::{sample_initial_state, sample_next_state, sample_observation};
pub use types::{
    ActionTriple, Compliance, Experience, ObservationPair, ProductState, Stimulus, Transparency,
    TrustState, WorkloadState, NUM_ACTIONS, NUM_STATES,
};
