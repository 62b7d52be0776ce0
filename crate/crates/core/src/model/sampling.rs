//! Generative draws from a [`TrustWorkloadModel`].
//!
//! All draws consume the caller's random source in a fixed order, so a
//! seeded source reproduces trajectories exactly.

use rand::Rng;

use super::chains::{HiddenChain, TrustWorkloadModel};
use super::types::{
    ActionTriple, Compliance, ObservationPair, ProductState, TrustState, WorkloadState,
};

#[inline]
fn draw_binary<R: Rng + ?Sized>(p: &[f64; 2], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    if u < p[0] {
        0
    } else {
        1
    }
}

pub fn sample_initial_state<R: Rng + ?Sized>(m: &TrustWorkloadModel, rng: &mut R) -> ProductState {
    let t = draw_binary(&m.trust.prior, rng);
    let w = draw_binary(&m.workload.prior, rng);
    ProductState::new(TrustState::ALL[t], WorkloadState::ALL[w])
}

pub fn sample_next_state<R: Rng + ?Sized>(
    s: ProductState,
    a: ActionTriple,
    m: &TrustWorkloadModel,
    rng: &mut R,
) -> ProductState {
    let t = draw_binary(&m.trust.transition(a)[s.trust.index()], rng);
    let w = draw_binary(&m.workload.transition(a)[s.workload.index()], rng);
    ProductState::new(TrustState::ALL[t], WorkloadState::ALL[w])
}

/// Compliance from the trust emission, RT from the workload state's
/// ex-Gaussian with non-positive draws rejected.
pub fn sample_observation<R: Rng + ?Sized>(
    s: ProductState,
    m: &TrustWorkloadModel,
    rng: &mut R,
) -> ObservationPair {
    let c = draw_binary(&m.trust.emission[s.trust.index()], rng);
    let rt = m.workload.emission[s.workload.index()].sample_positive(rng);
    ObservationPair::new(Compliance::ALL[c], rt).expect("positive finite draw")
}
