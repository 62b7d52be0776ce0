//! Action-conditioned forward and forward-backward passes.
//!
//! The chain starts in a prior state, and every trial first moves the chain
//! with the trial's action and then emits the trial's observation. Each step
//! is rescaled by its own normalizer, so the log-likelihood is the sum of the
//! log normalizers.

use rayon::prelude::*;

use super::{check_data, EstimationError, Sequence};
use crate::model::HiddenChain;

/// Emission floor applied inside the forward pass so a single outlier can
/// not zero out a sequence.
pub const LOG_EMISSION_FLOOR: f64 = -690.775_527_898_213_7; // ln(1e-300)

#[inline]
fn floored(le: [f64; 2]) -> [f64; 2] {
    [le[0].max(LOG_EMISSION_FLOOR), le[1].max(LOG_EMISSION_FLOOR)]
}

/// Log-likelihood of one sequence.
pub fn sequence_log_likelihood<C: HiddenChain>(chain: &C, seq: &Sequence) -> f64 {
    let score = chain.emission_scorer();
    let mut alpha = chain.prior();
    let mut ll = 0.0;
    for trial in &seq.trials {
        let t = chain.transition(trial.action);
        let le = floored(score(&trial.observation));
        let peak = le[0].max(le[1]);
        let mut w = [0.0; 2];
        for (j, wj) in w.iter_mut().enumerate() {
            let pred = alpha[0] * t[0][j] + alpha[1] * t[1][j];
            *wj = pred * (le[j] - peak).exp();
        }
        let c = w[0] + w[1];
        ll += c.ln() + peak;
        alpha = [w[0] / c, w[1] / c];
    }
    ll
}

/// Total log-likelihood of `data` under `chain`.
pub fn log_likelihood<C: HiddenChain + Sync>(
    chain: &C,
    data: &[Sequence],
) -> Result<f64, EstimationError> {
    check_data(data)?;
    let v = chain.violations();
    if !v.is_empty() {
        return Err(EstimationError::InvalidModel(v));
    }
    Ok(total_log_likelihood(chain, data))
}

/// Unchecked total; per-sequence terms are reduced in input order.
pub(crate) fn total_log_likelihood<C: HiddenChain + Sync>(chain: &C, data: &[Sequence]) -> f64 {
    let parts: Vec<f64> = data
        .par_iter()
        .map(|s| sequence_log_likelihood(chain, s))
        .collect();
    parts.iter().sum()
}

/// Smoothed posteriors of one sequence.
#[derive(Debug, Clone)]
pub struct Posterior {
    pub log_likelihood: f64,
    /// State posterior before the first action.
    pub initial: [f64; 2],
    /// State posterior after each trial's transition.
    pub states: Vec<[f64; 2]>,
    /// Joint posterior of (state before, state after) for each trial.
    pub pairs: Vec<[[f64; 2]; 2]>,
}

pub fn forward_backward<C: HiddenChain>(chain: &C, seq: &Sequence) -> Posterior {
    let n = seq.trials.len();
    let mut alphas = Vec::with_capacity(n + 1);
    let mut scales = Vec::with_capacity(n);
    let mut emis = Vec::with_capacity(n);
    let mut ll = 0.0;

    let score = chain.emission_scorer();
    let mut alpha = chain.prior();
    alphas.push(alpha);
    for trial in &seq.trials {
        let t = chain.transition(trial.action);
        let le = floored(score(&trial.observation));
        let peak = le[0].max(le[1]);
        let e = [(le[0] - peak).exp(), (le[1] - peak).exp()];
        let mut w = [0.0; 2];
        for j in 0..2 {
            w[j] = (alpha[0] * t[0][j] + alpha[1] * t[1][j]) * e[j];
        }
        let c = w[0] + w[1];
        ll += c.ln() + peak;
        alpha = [w[0] / c, w[1] / c];
        alphas.push(alpha);
        scales.push(c);
        emis.push(e);
    }

    let mut states = vec![[0.0; 2]; n];
    let mut pairs = vec![[[0.0; 2]; 2]; n];
    let mut beta = [1.0, 1.0];
    for k in (0..n).rev() {
        let t = chain.transition(seq.trials[k].action);
        let e = emis[k];
        let c = scales[k];
        let a_prev = alphas[k];
        let a_here = alphas[k + 1];
        states[k] = [a_here[0] * beta[0], a_here[1] * beta[1]];
        for i in 0..2 {
            for j in 0..2 {
                pairs[k][i][j] = a_prev[i] * t[i][j] * e[j] * beta[j] / c;
            }
        }
        let mut prev = [0.0; 2];
        for (i, p) in prev.iter_mut().enumerate() {
            *p = (t[i][0] * e[0] * beta[0] + t[i][1] * e[1] * beta[1]) / c;
        }
        beta = prev;
    }
    let initial = [alphas[0][0] * beta[0], alphas[0][1] * beta[1]];

    Posterior {
        log_likelihood: ll,
        initial,
        states,
        pairs,
    }
}
