//! Bundled reference model.
//!
//! Priors and emissions are the published estimates from the 196-participant
//! reconnaissance study. Per-action transition probabilities were only ever
//! published as diagram annotations, so the tables below are a hand-built
//! stand-in. They keep the published direction of the effects (more
//! transparency never lowers trust or workload) but every entry sits near 0
//! or 1 and every (action, from-state) cell is visited often in a
//! study-sized corpus, so the tables can be recovered from 600 simulated
//! missions.
//!
//! Trust follows the advice being judged: a reliable last experience with
//! light-armour advice keeps it high and a faulty one breaks it, whatever the
//! display shows. For heavy-armour advice the display matters: medium or high
//! transparency carries trust after a reliable experience, only high does
//! after a faulty one. Workload persists from trial to trial, is raised by
//! the high-transparency display and drops after a faulty light-armour call.

use super::chains::{TransitionTable, TrustModel, TrustWorkloadModel, WorkloadModel};
use super::exgauss::ExGaussianParams;
use super::types::{ActionTriple, Experience, Stimulus, Transparency, NUM_ACTIONS};

pub const TRUST_PRIOR_HIGH: f64 = 0.8714;
pub const TRUST_P_AGREE_LOW: f64 = 0.0029;
pub const TRUST_P_AGREE_HIGH: f64 = 0.9787;
pub const WORKLOAD_PRIOR_HIGH: f64 = 0.6903;

pub const WORKLOAD_LOW: ExGaussianParams = ExGaussianParams {
    mu: 0.2701,
    sigma: 0.2964,
    tau: 0.4325,
};

pub const WORKLOAD_HIGH: ExGaussianParams = ExGaussianParams {
    mu: 0.7184,
    sigma: 0.2689,
    tau: 2.2502,
};

/// P(next = high | from, action) for the trust chain.
fn trust_to_high(rec: Stimulus, exp: Experience, tau: Transparency, _from_high: bool) -> f64 {
    use Experience::*;
    use Stimulus::*;
    use Transparency::*;
    match (rec, exp, tau) {
        (Absent, Reliable, _) => HI,
        (Absent, Faulty, _) => LO,
        (Present, Reliable, Low) => LO,
        (Present, Reliable, _) => HI,
        (Present, Faulty, High) => HI,
        (Present, Faulty, _) => LO,
    }
}

/// P(next = high | from, action) for the workload chain.
fn workload_to_high(rec: Stimulus, exp: Experience, tau: Transparency, from_high: bool) -> f64 {
    match (rec, exp, tau) {
        (Stimulus::Absent, Experience::Faulty, _) => LO,
        (_, _, Transparency::High) => HI,
        _ if from_high => HI,
        _ => LO,
    }
}

const LO: f64 = 0.02;
const HI: f64 = 0.98;

fn table(f: fn(Stimulus, Experience, Transparency, bool) -> f64) -> TransitionTable {
    let mut t = [[[0.0; 2]; 2]; NUM_ACTIONS];
    for a in ActionTriple::all() {
        for (from, row) in t[a.index()].iter_mut().enumerate() {
            let up = f(a.recommendation, a.experience, a.transparency, from == 1);
            *row = [1.0 - up, up];
        }
    }
    t
}

pub fn reference_trust_model() -> TrustModel {
    TrustModel {
        prior: [1.0 - TRUST_PRIOR_HIGH, TRUST_PRIOR_HIGH],
        transition: table(trust_to_high),
        emission: [
            [1.0 - TRUST_P_AGREE_LOW, TRUST_P_AGREE_LOW],
            [1.0 - TRUST_P_AGREE_HIGH, TRUST_P_AGREE_HIGH],
        ],
    }
}

pub fn reference_workload_model() -> WorkloadModel {
    WorkloadModel {
        prior: [1.0 - WORKLOAD_PRIOR_HIGH, WORKLOAD_PRIOR_HIGH],
        transition: table(workload_to_high),
        emission: [WORKLOAD_LOW, WORKLOAD_HIGH],
    }
}

pub fn reference_model() -> TrustWorkloadModel {
    TrustWorkloadModel {
        trust: reference_trust_model(),
        workload: reference_workload_model(),
    }
}
