#![allow(dead_code)]

use rand::Rng;
use trustwork_core::estimation::{Sequence, Trial};
use trustwork_core::model::{
    ActionTriple, Compliance, ExGaussianParams, ObservationPair, TrustModel, TrustWorkloadModel,
    WorkloadModel, NUM_ACTIONS,
};

pub fn row<R: Rng>(rng: &mut R) -> [f64; 2] {
    let p = rng.random_range(0.05..0.95);
    [1.0 - p, p]
}

pub fn random_trust<R: Rng>(rng: &mut R) -> TrustModel {
    TrustModel {
        prior: row(rng),
        transition: std::array::from_fn(|_| [row(rng), row(rng)]),
        emission: [row(rng), row(rng)],
    }
}

pub fn random_exgauss<R: Rng>(rng: &mut R) -> ExGaussianParams {
    ExGaussianParams {
        mu: rng.random_range(0.1..1.5),
        sigma: rng.random_range(0.1..0.6),
        tau: rng.random_range(0.1..2.5),
    }
}

pub fn random_workload<R: Rng>(rng: &mut R) -> WorkloadModel {
    WorkloadModel {
        prior: row(rng),
        transition: std::array::from_fn(|_| [row(rng), row(rng)]),
        emission: [random_exgauss(rng), random_exgauss(rng)],
    }
}

pub fn random_model<R: Rng>(rng: &mut R) -> TrustWorkloadModel {
    TrustWorkloadModel {
        trust: random_trust(rng),
        workload: random_workload(rng),
    }
}

pub fn random_action<R: Rng>(rng: &mut R) -> ActionTriple {
    ActionTriple::from_index(rng.random_range(0..NUM_ACTIONS)).unwrap()
}

pub fn random_observation<R: Rng>(rng: &mut R) -> ObservationPair {
    let c = if rng.random_bool(0.5) {
        Compliance::Agree
    } else {
        Compliance::Disagree
    };
    ObservationPair::new(c, rng.random_range(0.05..6.0)).unwrap()
}

pub fn random_sequence<R: Rng>(rng: &mut R, len: usize, id: usize) -> Sequence {
    let mut seq = Sequence::new(format!("p{id:03}"), "m1");
    for _ in 0..len {
        seq.trials.push(Trial {
            action: random_action(rng),
            observation: random_observation(rng),
        });
    }
    seq
}
