//! Decision and response-time rewards in POMDP standard form.

use serde::{Deserialize, Serialize};

use super::{invalid, PolicyError};
use crate::model::{
    ActionTriple, Compliance, ExGaussianParams, Stimulus, NUM_ACTIONS, NUM_STATES,
};

/// Reward per chain, indexed `[from][to][action]`.
pub type ChainReward = [[[f64; NUM_ACTIONS]; 2]; 2];

/// Reward on the product state space, indexed `[from][to][action]` with
/// product index `trust * 2 + workload`.
pub type ProductReward = [[[f64; NUM_ACTIONS]; NUM_STATES]; NUM_STATES];

/// Error rates of the decision aid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReliabilitySpec {
    /// P(recommend present | truth absent).
    pub alpha: f64,
    /// P(recommend absent | truth present).
    pub beta: f64,
    /// Prior P(truth present).
    pub d: f64,
}

impl ReliabilitySpec {
    pub const STUDY: ReliabilitySpec = ReliabilitySpec {
        alpha: 0.3,
        beta: 0.3,
        d: 0.5,
    };

    pub fn validate(&self) -> Result<(), PolicyError> {
        for (field, v) in [("alpha", self.alpha), ("beta", self.beta), ("d", self.d)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(field, format!("must lie in [0, 1] (got {v})")));
            }
        }
        Ok(())
    }

    /// P(recommendation | truth).
    pub fn likelihood(&self, recommendation: Stimulus, truth: Stimulus) -> f64 {
        let p_present = match truth {
            Stimulus::Absent => self.alpha,
            Stimulus::Present => 1.0 - self.beta,
        };
        match recommendation {
            Stimulus::Present => p_present,
            Stimulus::Absent => 1.0 - p_present,
        }
    }

    pub fn truth_prior(&self) -> [f64; 2] {
        [1.0 - self.d, self.d]
    }
}

impl Default for ReliabilitySpec {
    fn default() -> Self {
        Self::STUDY
    }
}

/// P(truth | recommendation), indexed by truth.
pub fn situation_posterior(
    r: &ReliabilitySpec,
    recommendation: Stimulus,
) -> Result<[f64; 2], PolicyError> {
    r.validate()?;
    let prior = r.truth_prior();
    let joint = [
        prior[0] * r.likelihood(recommendation, Stimulus::Absent),
        prior[1] * r.likelihood(recommendation, Stimulus::Present),
    ];
    let z = joint[0] + joint[1];
    if !(z > 0.0) {
        return Err(PolicyError::ZeroProbability(recommendation));
    }
    Ok([joint[0] / z, joint[1] / z])
}

/// The human's inferred situation: agreeing adopts the recommendation,
/// disagreeing adopts its opposite.
pub fn compliance_to_inference(recommendation: Stimulus, compliance: Compliance) -> Stimulus {
    match (recommendation, compliance) {
        (rec, Compliance::Agree) => rec,
        (Stimulus::Absent, Compliance::Disagree) => Stimulus::Present,
        (Stimulus::Present, Compliance::Disagree) => Stimulus::Absent,
    }
}

/// Time-equivalent penalty for each (truth, inference) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionRewardTable {
    /// Indexed `[truth][inference]`.
    pub rewards: [[f64; 2]; 2],
}

impl DecisionRewardTable {
    pub const STUDY: DecisionRewardTable = DecisionRewardTable {
        rewards: [[-3.0, -7.0], [-23.0, -7.0]],
    };

    /// Search with light gear costs `light` seconds, heavy gear `heavy`, and
    /// going in light against a present threat adds `injury`.
    pub fn from_timings(light: f64, heavy: f64, injury: f64) -> Result<Self, PolicyError> {
        for (field, v) in [("light", light), ("heavy", heavy), ("injury", injury)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(field, format!("timing must be finite and > 0 (got {v})")));
            }
        }
        Ok(Self {
            rewards: [[-light, -heavy], [-(light + injury), -heavy]],
        })
    }

    pub fn get(&self, truth: Stimulus, inference: Stimulus) -> f64 {
        self.rewards[truth.index()][inference.index()]
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        if self.rewards.iter().flatten().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(invalid("decision_table", "entries must be finite"))
        }
    }
}

impl Default for DecisionRewardTable {
    fn default() -> Self {
        Self::STUDY
    }
}

/// Expected decision reward of landing in trust state `to` when the aid
/// recommended `recommendation`, averaging over the compliance emitted from
/// `to` and the truth given the recommendation.
fn trust_reward_entry(
    emission_to: &[f64; 2],
    posterior: &[f64; 2],
    recommendation: Stimulus,
    table: &DecisionRewardTable,
) -> f64 {
    let mut total = 0.0;
    for c in Compliance::ALL {
        let inference = compliance_to_inference(recommendation, *c);
        let inner: f64 = Stimulus::ALL
            .iter()
            .map(|t| posterior[t.index()] * table.get(*t, inference))
            .sum();
        total += emission_to[c.index()] * inner;
    }
    total
}

/// R_T over `[from][to][action]`; only `to` and the recommendation matter.
pub fn expected_trust_reward(
    trust_emission: &[[f64; 2]; 2],
    r: &ReliabilitySpec,
    table: &DecisionRewardTable,
) -> Result<ChainReward, PolicyError> {
    table.validate()?;
    let mut by_rec = [[0.0; 2]; 2]; // [rec][to]
    for rec in Stimulus::ALL {
        let post = situation_posterior(r, *rec)?;
        for to in 0..2 {
            by_rec[rec.index()][to] = trust_reward_entry(&trust_emission[to], &post, *rec, table);
        }
    }
    let mut out = [[[0.0; NUM_ACTIONS]; 2]; 2];
    for rows in out.iter_mut() {
        for (to, cells) in rows.iter_mut().enumerate() {
            for (a, cell) in cells.iter_mut().enumerate() {
                let rec = ActionTriple::from_index(a).expect("action index").recommendation;
                *cell = by_rec[rec.index()][to];
            }
        }
    }
    Ok(out)
}

/// R_W over `[from][to][action]`: minus the mean response time of `to`.
pub fn expected_workload_reward(emission: &[ExGaussianParams; 2]) -> ChainReward {
    let mut out = [[[0.0; NUM_ACTIONS]; 2]; 2];
    for rows in out.iter_mut() {
        for (to, cells) in rows.iter_mut().enumerate() {
            *cells = [-emission[to].mean(); NUM_ACTIONS];
        }
    }
    out
}

/// `zeta * R_T + (1 - zeta) * R_W` lifted to the product state space.
pub fn combined_reward(
    rt: &ChainReward,
    rw: &ChainReward,
    zeta: f64,
) -> Result<ProductReward, PolicyError> {
    if !(0.0..=1.0).contains(&zeta) {
        return Err(invalid("zeta", format!("must lie in [0, 1] (got {zeta})")));
    }
    let mut out = [[[0.0; NUM_ACTIONS]; NUM_STATES]; NUM_STATES];
    for s in 0..NUM_STATES {
        for s2 in 0..NUM_STATES {
            let (t, w, t2, w2) = (s / 2, s % 2, s2 / 2, s2 % 2);
            for a in 0..NUM_ACTIONS {
                out[s][s2][a] = zeta * rt[t][t2][a] + (1.0 - zeta) * rw[w][w2][a];
            }
        }
    }
    Ok(out)
}

/// Joint distribution of (recommendation, experience), indexed
/// `[recommendation][experience]`. The two are treated as independent.
pub fn uncontrollable_distribution(r: &ReliabilitySpec) -> Result<[[f64; 2]; 2], PolicyError> {
    r.validate()?;
    let p_rec_absent = r.beta * r.d + (1.0 - r.alpha) * (1.0 - r.d);
    let p_faulty = r.alpha * (1.0 - r.d) + r.beta * r.d;
    let rec = [p_rec_absent, 1.0 - p_rec_absent];
    let exp = [p_faulty, 1.0 - p_faulty];
    Ok([
        [rec[0] * exp[0], rec[0] * exp[1]],
        [rec[1] * exp[0], rec[1] * exp[1]],
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::reference::{reference_model, WORKLOAD_HIGH, WORKLOAD_LOW};
    use crate::model::{Experience, Transparency};

    #[test]
    fn posterior_examples() {
        let p = situation_posterior(&ReliabilitySpec::STUDY, Stimulus::Absent).unwrap();
        assert!((p[0] - 0.7).abs() < 1e-15 && (p[1] - 0.3).abs() < 1e-15);
        for d in [0.1, 0.5, 0.9] {
            let r = ReliabilitySpec { alpha: 0.0, beta: 0.0, d };
            assert_eq!(situation_posterior(&r, Stimulus::Present).unwrap(), [0.0, 1.0]);
        }
        let r = ReliabilitySpec { alpha: 0.5, beta: 0.5, d: 0.5 };
        for rec in Stimulus::ALL {
            assert_eq!(situation_posterior(&r, *rec).unwrap(), [0.5, 0.5]);
        }
        // a perfect aid never says present when the threat is never there
        let r = ReliabilitySpec { alpha: 0.0, beta: 0.0, d: 0.0 };
        assert!(matches!(
            situation_posterior(&r, Stimulus::Present),
            Err(PolicyError::ZeroProbability(Stimulus::Present))
        ));
    }

    #[test]
    fn inference_mapping() {
        use Compliance::*;
        use Stimulus::*;
        assert_eq!(compliance_to_inference(Absent, Disagree), Present);
        assert_eq!(compliance_to_inference(Absent, Agree), Absent);
        assert_eq!(compliance_to_inference(Present, Disagree), Absent);
        assert_eq!(compliance_to_inference(Present, Agree), Present);
        for rec in Stimulus::ALL {
            assert_ne!(
                compliance_to_inference(*rec, Agree),
                compliance_to_inference(*rec, Disagree)
            );
        }
    }

    #[test]
    fn timings_reproduce_study_table() {
        assert_eq!(
            DecisionRewardTable::from_timings(3.0, 7.0, 20.0).unwrap(),
            DecisionRewardTable::STUDY
        );
        assert!(DecisionRewardTable::from_timings(0.0, 7.0, 20.0).is_err());
    }

    #[test]
    fn trust_reward_hand_values() {
        let m = reference_model();
        let rt = expected_trust_reward(
            &m.trust.emission,
            &ReliabilitySpec::STUDY,
            &DecisionRewardTable::STUDY,
        )
        .unwrap();
        let present = ActionTriple::new(Stimulus::Present, Experience::Reliable, Transparency::Low).index();
        let absent = ActionTriple::new(Stimulus::Absent, Experience::Faulty, Transparency::High).index();
        let hand_high_present = 0.9787 * -7.0 + 0.0213 * (0.3 * -3.0 + 0.7 * -23.0);
        let hand_low_absent = 0.9971 * -7.0 + 0.0029 * (0.7 * -3.0 + 0.3 * -23.0);
        assert!((rt[0][1][present] - hand_high_present).abs() < 1e-12);
        assert!((rt[0][1][present] - -7.2130).abs() < 1e-4);
        assert!((rt[1][0][absent] - hand_low_absent).abs() < 1e-12);
        assert!((rt[1][0][absent] - -7.0058).abs() < 1e-4);
    }

    #[test]
    fn trust_reward_depends_only_on_destination_and_recommendation() {
        let m = reference_model();
        let rt = expected_trust_reward(
            &m.trust.emission,
            &ReliabilitySpec::STUDY,
            &DecisionRewardTable::STUDY,
        )
        .unwrap();
        for to in 0..2 {
            for a in ActionTriple::all() {
                let base = ActionTriple::new(a.recommendation, Experience::Faulty, Transparency::Low);
                assert_eq!(rt[0][to][a.index()], rt[1][to][base.index()]);
            }
        }
        let flat = expected_trust_reward(
            &[[0.4, 0.6], [0.4, 0.6]],
            &ReliabilitySpec::STUDY,
            &DecisionRewardTable::STUDY,
        )
        .unwrap();
        for a in 0..NUM_ACTIONS {
            assert_eq!(flat[0][0][a], flat[0][1][a]);
        }
    }

    #[test]
    fn complying_beats_not_complying_on_present() {
        let post = situation_posterior(&ReliabilitySpec::STUDY, Stimulus::Present).unwrap();
        let t = DecisionRewardTable::STUDY;
        let agree = trust_reward_entry(&[0.0, 1.0], &post, Stimulus::Present, &t);
        let disagree = trust_reward_entry(&[1.0, 0.0], &post, Stimulus::Present, &t);
        assert!((agree - -7.0).abs() < 1e-12);
        assert!((disagree - -17.0).abs() < 1e-12);
    }

    #[test]
    fn workload_reward_values() {
        let rw = expected_workload_reward(&[WORKLOAD_LOW, WORKLOAD_HIGH]);
        assert!((rw[1][0][5] - -0.7026).abs() < 1e-12);
        assert!((rw[0][1][0] - -2.9686).abs() < 1e-12);
        let g = ExGaussianParams { mu: 1.3, sigma: 0.2, tau: 1e-12 };
        let rw = expected_workload_reward(&[g, g]);
        assert!((rw[0][0][0] - -1.3).abs() < 1e-9);
    }

    #[test]
    fn combination_examples() {
        let m = reference_model();
        let rt = expected_trust_reward(
            &m.trust.emission,
            &ReliabilitySpec::STUDY,
            &DecisionRewardTable::STUDY,
        )
        .unwrap();
        let rw = expected_workload_reward(&m.workload.emission);
        let one = combined_reward(&rt, &rw, 1.0).unwrap();
        let zero = combined_reward(&rt, &rw, 0.0).unwrap();
        for s in 0..4 {
            for s2 in 0..4 {
                for a in 0..NUM_ACTIONS {
                    assert_eq!(one[s][s2][a], rt[s / 2][s2 / 2][a]);
                    assert_eq!(zero[s][s2][a], rw[s % 2][s2 % 2][a]);
                }
            }
        }
        let half = combined_reward(&rt, &rw, 0.5).unwrap();
        let present = ActionTriple::new(Stimulus::Present, Experience::Reliable, Transparency::Medium).index();
        assert!((half[0][3][present] - -5.0908).abs() < 1e-4);
        assert!(combined_reward(&rt, &rw, 1.1).is_err());
    }

    #[test]
    fn uncontrollable_examples() {
        let p = uncontrollable_distribution(&ReliabilitySpec::STUDY).unwrap();
        assert!((p[0][0] + p[0][1] - 0.5).abs() < 1e-15);
        assert!((p[0][0] + p[1][0] - 0.3).abs() < 1e-15);
        assert!((p[0][1] + p[1][1] - 0.7).abs() < 1e-15);
        let perfect = uncontrollable_distribution(&ReliabilitySpec { alpha: 0.0, beta: 0.0, d: 0.3 }).unwrap();
        assert_eq!(perfect[0][0] + perfect[1][0], 0.0);
        let total: f64 = p.iter().flatten().sum();
        assert!((total - 1.0).abs() < 1e-15);
    }
}
