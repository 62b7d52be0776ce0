//! Recursive Bayes filter over the joint (trust, workload) state.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::chains::{HiddenChain, TrustWorkloadModel};
use super::types::{ActionTriple, ObservationPair, ProductState, NUM_STATES};

/// Observations whose total likelihood is at or below this are treated as
/// impossible under the model.
pub const MIN_NORMALIZER: f64 = 1e-300;

const SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BeliefError {
    #[error("belief entries must be finite, non-negative and sum to 1 (got {0:?})")]
    Invalid([f64; NUM_STATES]),
    #[error("observation has zero likelihood under every state (log normalizer {log_normalizer})")]
    ZeroLikelihood {
        /// Prediction step result, before the failed correction.
        predicted: Belief,
        log_normalizer: f64,
    },
}

/// Probability vector over the four product states, indexed by
/// [`ProductState::index`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Belief {
    p: [f64; NUM_STATES],
}

impl Belief {
    pub fn new(p: [f64; NUM_STATES]) -> Result<Self, BeliefError> {
        let ok = p.iter().all(|x| x.is_finite() && *x >= 0.0)
            && (p.iter().sum::<f64>() - 1.0).abs() <= SUM_TOL;
        if ok {
            Ok(Self { p })
        } else {
            Err(BeliefError::Invalid(p))
        }
    }

    /// Product of independent trust and workload marginals.
    pub fn from_marginals(p_trust_high: f64, p_workload_high: f64) -> Self {
        let t = [1.0 - p_trust_high, p_trust_high];
        let w = [1.0 - p_workload_high, p_workload_high];
        let mut p = [0.0; NUM_STATES];
        for s in ProductState::all() {
            p[s.index()] = t[s.trust.index()] * w[s.workload.index()];
        }
        Self { p }
    }

    /// Initial belief: outer product of the two chain priors.
    pub fn prior(model: &TrustWorkloadModel) -> Self {
        let t = model.trust.prior;
        let w = model.workload.prior;
        let mut p = [0.0; NUM_STATES];
        for s in ProductState::all() {
            p[s.index()] = t[s.trust.index()] * w[s.workload.index()];
        }
        Self { p }
    }

    /// Point mass on one state.
    pub fn vertex(state: ProductState) -> Self {
        let mut p = [0.0; NUM_STATES];
        p[state.index()] = 1.0;
        Self { p }
    }

    #[inline]
    pub fn probs(&self) -> &[f64; NUM_STATES] {
        &self.p
    }

    #[inline]
    pub fn get(&self, s: ProductState) -> f64 {
        self.p[s.index()]
    }

    pub fn p_trust_high(&self) -> f64 {
        self.p[2] + self.p[3]
    }

    pub fn p_workload_high(&self) -> f64 {
        self.p[1] + self.p[3]
    }

    pub fn trust_marginal(&self) -> [f64; 2] {
        [self.p[0] + self.p[1], self.p[2] + self.p[3]]
    }

    pub fn workload_marginal(&self) -> [f64; 2] {
        [self.p[0] + self.p[2], self.p[1] + self.p[3]]
    }

    /// Largest deviation of the joint from the outer product of its marginals.
    pub fn factorization_error(&self) -> f64 {
        let t = self.trust_marginal();
        let w = self.workload_marginal();
        ProductState::all()
            .map(|s| (self.get(s) - t[s.trust.index()] * w[s.workload.index()]).abs())
            .fold(0.0, f64::max)
    }
}

/// Joint transition probability `T(s' | s, a)`; the chains move independently.
#[inline]
pub fn joint_transition(
    model: &TrustWorkloadModel,
    from: ProductState,
    to: ProductState,
    action: ActionTriple,
) -> f64 {
    let tt = model.trust.transition(action);
    let tw = model.workload.transition(action);
    tt[from.trust.index()][to.trust.index()] * tw[from.workload.index()][to.workload.index()]
}

/// Prediction step only.
pub fn predict(b: &Belief, action: ActionTriple, model: &TrustWorkloadModel) -> Belief {
    let mut out = [0.0; NUM_STATES];
    for to in ProductState::all() {
        out[to.index()] = ProductState::all()
            .map(|from| joint_transition(model, from, to, action) * b.get(from))
            .sum();
    }
    let total: f64 = out.iter().sum();
    for x in &mut out {
        *x /= total;
    }
    Belief { p: out }
}

/// Log-likelihood of `obs` in each destination state; emission factorizes
/// into compliance-given-trust times RT-density-given-workload.
pub fn log_observation_likelihood(
    obs: &ObservationPair,
    model: &TrustWorkloadModel,
) -> [f64; NUM_STATES] {
    let lt = [
        model.trust.log_emission(0, obs),
        model.trust.log_emission(1, obs),
    ];
    let lw = [
        model.workload.log_emission(0, obs),
        model.workload.log_emission(1, obs),
    ];
    let mut out = [0.0; NUM_STATES];
    for s in ProductState::all() {
        out[s.index()] = lt[s.trust.index()] + lw[s.workload.index()];
    }
    out
}

/// One predict-correct step of the Bayes filter.
///
/// Fails with [`BeliefError::ZeroLikelihood`] when the observation's total
/// probability is at or below [`MIN_NORMALIZER`]; the error carries the
/// predicted belief.
pub fn belief_update(
    b: &Belief,
    action: ActionTriple,
    obs: &ObservationPair,
    model: &TrustWorkloadModel,
) -> Result<Belief, BeliefError> {
    let predicted = predict(b, action, model);
    let log_lik = log_observation_likelihood(obs, model);

    let peak = ProductState::all()
        .filter(|s| predicted.get(*s) > 0.0)
        .map(|s| log_lik[s.index()])
        .fold(f64::NEG_INFINITY, f64::max);
    let zero = |log_normalizer| BeliefError::ZeroLikelihood {
        predicted,
        log_normalizer,
    };
    if !peak.is_finite() {
        return Err(zero(f64::NEG_INFINITY));
    }

    let mut w = [0.0; NUM_STATES];
    for s in 0..NUM_STATES {
        w[s] = predicted.p[s] * (log_lik[s] - peak).exp();
    }
    let total: f64 = w.iter().sum();
    let log_normalizer = total.ln() + peak;
    if !(log_normalizer > MIN_NORMALIZER.ln()) {
        return Err(zero(log_normalizer));
    }
    for x in &mut w {
        *x /= total;
    }
    Ok(Belief { p: w })
}
