//! Q-MDP value iteration with the uncontrollable action components
//! marginalized out, and belief-weighted transparency selection.

use serde::{Deserialize, Serialize};

use super::reward::{
    combined_reward, expected_trust_reward, expected_workload_reward,
    uncontrollable_distribution, DecisionRewardTable, ProductReward, ReliabilitySpec,
};
use super::{invalid, PolicyError};
use crate::model::{
    belief::joint_transition, ActionTriple, Belief, Experience, ProductState, Stimulus,
    Transparency, TrustWorkloadModel, NUM_ACTIONS, NUM_STATES,
};

/// Product-state transitions indexed `[action][from][to]`.
pub type ProductTransition = [[[f64; NUM_STATES]; NUM_STATES]; NUM_ACTIONS];

pub const STUDY_GAMMA: f64 = 15.0 / 16.0;
pub const ZETA_PRESETS: [f64; 3] = [0.50, 0.91, 0.95];
pub const VALUE_TOLERANCE: f64 = 1e-10;
pub const MAX_VALUE_ITERATIONS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardSpec {
    pub decision_table: DecisionRewardTable,
    /// Weight of the decision reward against the response-time reward.
    pub zeta: f64,
    pub gamma: f64,
}

impl RewardSpec {
    pub fn study(zeta: f64) -> Self {
        Self {
            decision_table: DecisionRewardTable::STUDY,
            zeta,
            gamma: STUDY_GAMMA,
        }
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        if !(0.0..=1.0).contains(&self.zeta) {
            return Err(invalid("zeta", format!("must lie in [0, 1] (got {})", self.zeta)));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(invalid("gamma", format!("must lie in (0, 1) (got {})", self.gamma)));
        }
        self.decision_table.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    /// Indexed `[state][action]`.
    pub q_mdp: [[f64; NUM_ACTIONS]; NUM_STATES],
    /// Indexed `[state][transparency]`.
    pub q_tau: [[f64; 3]; NUM_STATES],
    pub value: [f64; NUM_STATES],
    pub zeta: Option<f64>,
    pub gamma: f64,
    pub iterations: usize,
    pub residual: f64,
    /// max |V_k - V_{k-1}| per iteration.
    #[serde(skip)]
    pub residual_trace: Vec<f64>,
}

impl QTable {
    /// Belief-weighted Q for each transparency at a known uncontrollable pair.
    pub fn weighted(&self, b: &Belief, rec: Stimulus, exp: Experience) -> [f64; 3] {
        let mut out = [0.0; 3];
        for tau in Transparency::ALL {
            let a = ActionTriple::new(rec, exp, *tau).index();
            out[tau.index()] = ProductState::all()
                .map(|s| b.get(s) * self.q_mdp[s.index()][a])
                .sum();
        }
        out
    }
}

pub fn product_transition(m: &TrustWorkloadModel) -> ProductTransition {
    let mut t = [[[0.0; NUM_STATES]; NUM_STATES]; NUM_ACTIONS];
    for a in ActionTriple::all() {
        for from in ProductState::all() {
            for to in ProductState::all() {
                t[a.index()][from.index()][to.index()] = joint_transition(m, from, to, a);
            }
        }
    }
    t
}

/// Value iteration on explicit tables. `p_unc` is indexed
/// `[recommendation][experience]`.
pub fn solve_qmdp_raw(
    transition: &ProductTransition,
    reward: &ProductReward,
    p_unc: &[[f64; 2]; 2],
    gamma: f64,
) -> Result<QTable, PolicyError> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(invalid("gamma", format!("must lie in (0, 1) (got {gamma})")));
    }
    let mut value = [0.0; NUM_STATES];
    let mut q_mdp = [[0.0; NUM_ACTIONS]; NUM_STATES];
    let mut q_tau = [[0.0; 3]; NUM_STATES];
    let mut trace = Vec::new();
    for iter in 1..=MAX_VALUE_ITERATIONS {
        for s in 0..NUM_STATES {
            for a in 0..NUM_ACTIONS {
                q_mdp[s][a] = (0..NUM_STATES)
                    .map(|s2| transition[a][s][s2] * (reward[s][s2][a] + gamma * value[s2]))
                    .sum();
            }
            for tau in Transparency::ALL {
                let mut acc = 0.0;
                for rec in Stimulus::ALL {
                    for exp in Experience::ALL {
                        let a = ActionTriple::new(*rec, *exp, *tau).index();
                        acc += p_unc[rec.index()][exp.index()] * q_mdp[s][a];
                    }
                }
                q_tau[s][tau.index()] = acc;
            }
        }
        let next: [f64; NUM_STATES] =
            std::array::from_fn(|s| q_tau[s].iter().copied().fold(f64::NEG_INFINITY, f64::max));
        let residual = (0..NUM_STATES)
            .map(|s| (next[s] - value[s]).abs())
            .fold(0.0, f64::max);
        value = next;
        trace.push(residual);
        if !residual.is_finite() {
            return Err(PolicyError::NotConverged {
                iterations: iter,
                residual,
            });
        }
        if residual < VALUE_TOLERANCE {
            return Ok(QTable {
                q_mdp,
                q_tau,
                value,
                zeta: None,
                gamma,
                iterations: iter,
                residual,
                residual_trace: trace,
            });
        }
    }
    Err(PolicyError::NotConverged {
        iterations: MAX_VALUE_ITERATIONS,
        residual: *trace.last().unwrap_or(&f64::NAN),
    })
}

/// Build rewards from the model and solve.
pub fn solve_qmdp(
    m: &TrustWorkloadModel,
    spec: &RewardSpec,
    r: &ReliabilitySpec,
) -> Result<QTable, PolicyError> {
    m.validate().map_err(PolicyError::InvalidModel)?;
    spec.validate()?;
    let rt = expected_trust_reward(&m.trust.emission, r, &spec.decision_table)?;
    let rw = expected_workload_reward(&m.workload.emission);
    let reward = combined_reward(&rt, &rw, spec.zeta)?;
    let p_unc = uncontrollable_distribution(r)?;
    let mut q = solve_qmdp_raw(&product_transition(m), &reward, &p_unc, spec.gamma)?;
    q.zeta = Some(spec.zeta);
    Ok(q)
}

/// Belief-weighted argmax over transparency; ties go to the lowest level.
pub fn select_transparency(b: &Belief, q: &QTable, rec: Stimulus, exp: Experience) -> Transparency {
    let w = q.weighted(b, rec, exp);
    let mut best = 0;
    for k in 1..3 {
        if w[k] > w[best] {
            best = k;
        }
    }
    Transparency::ALL[best]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::reference::reference_model;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn const_reward(c: f64) -> ProductReward {
        [[[c; NUM_ACTIONS]; NUM_STATES]; NUM_STATES]
    }

    fn random_transition(rng: &mut ChaCha8Rng) -> ProductTransition {
        let mut t = [[[0.0; NUM_STATES]; NUM_STATES]; NUM_ACTIONS];
        for rows in t.iter_mut() {
            for row in rows.iter_mut() {
                for x in row.iter_mut() {
                    *x = rng.random_range(0.01..1.0);
                }
                let z: f64 = row.iter().sum();
                row.iter_mut().for_each(|x| *x /= z);
            }
        }
        t
    }

    #[test]
    fn constant_reward_is_geometric_series() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = random_transition(&mut rng);
        let p = uncontrollable_distribution(&ReliabilitySpec::STUDY).unwrap();
        let q = solve_qmdp_raw(&t, &const_reward(-2.0), &p, 0.9).unwrap();
        for s in 0..NUM_STATES {
            assert!((q.value[s] - -20.0).abs() < 1e-9);
            for a in 0..NUM_ACTIONS {
                assert!((q.q_mdp[s][a] - -20.0).abs() < 1e-9);
            }
        }
    }

    /// Policy iteration with an exact linear solve of (I - gamma P) V = r.
    fn mdp_oracle(
        t: &ProductTransition,
        r: &ProductReward,
        actions: &[usize; 3],
        gamma: f64,
    ) -> [f64; NUM_STATES] {
        let mut policy = [0usize; NUM_STATES];
        loop {
            let mut a_mat = [[0.0; NUM_STATES + 1]; NUM_STATES];
            for s in 0..NUM_STATES {
                let a = actions[policy[s]];
                for s2 in 0..NUM_STATES {
                    a_mat[s][s2] = if s == s2 { 1.0 } else { 0.0 } - gamma * t[a][s][s2];
                    a_mat[s][NUM_STATES] += t[a][s][s2] * r[s][s2][a];
                }
            }
            // Gauss-Jordan with partial pivoting
            for c in 0..NUM_STATES {
                let p = (c..NUM_STATES)
                    .max_by(|&i, &j| a_mat[i][c].abs().total_cmp(&a_mat[j][c].abs()))
                    .unwrap();
                a_mat.swap(c, p);
                for i in 0..NUM_STATES {
                    if i != c {
                        let f = a_mat[i][c] / a_mat[c][c];
                        for k in c..=NUM_STATES {
                            a_mat[i][k] -= f * a_mat[c][k];
                        }
                    }
                }
            }
            let v: [f64; NUM_STATES] = std::array::from_fn(|s| a_mat[s][NUM_STATES] / a_mat[s][s]);
            let mut changed = false;
            for s in 0..NUM_STATES {
                let q = |k: usize| -> f64 {
                    let a = actions[k];
                    (0..NUM_STATES)
                        .map(|s2| t[a][s][s2] * (r[s][s2][a] + gamma * v[s2]))
                        .sum()
                };
                let best = (0..3).fold(policy[s], |b, k| if q(k) > q(b) + 1e-12 { k } else { b });
                if best != policy[s] {
                    policy[s] = best;
                    changed = true;
                }
            }
            if !changed {
                return v;
            }
        }
    }

    #[test]
    fn single_uncontrollable_outcome_matches_mdp_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5 {
            let t = random_transition(&mut rng);
            let mut r = const_reward(0.0);
            for x in r.iter_mut().flatten().flatten() {
                *x = rng.random_range(-10.0..0.0);
            }
            let p = [[0.0, 0.0], [0.0, 1.0]]; // always present + reliable
            let q = solve_qmdp_raw(&t, &r, &p, 0.9375).unwrap();
            let actions = [9, 10, 11];
            let v = mdp_oracle(&t, &r, &actions, 0.9375);
            for s in 0..NUM_STATES {
                assert!((q.value[s] - v[s]).abs() < 1e-8, "{:?} vs {v:?}", q.value);
            }
        }
    }

    #[test]
    fn scaling_rewards_scales_q() {
        let m = reference_model();
        let r = ReliabilitySpec::STUDY;
        let q1 = solve_qmdp(&m, &RewardSpec::study(0.91), &r).unwrap();
        let mut spec = RewardSpec::study(0.91);
        spec.decision_table.rewards.iter_mut().flatten().for_each(|x| *x *= 3.0);
        let rt = expected_trust_reward(&m.trust.emission, &r, &spec.decision_table).unwrap();
        let mut rw = expected_workload_reward(&m.workload.emission);
        rw.iter_mut().flatten().flatten().for_each(|x| *x *= 3.0);
        let reward = combined_reward(&rt, &rw, 0.91).unwrap();
        let p = uncontrollable_distribution(&r).unwrap();
        let q3 = solve_qmdp_raw(&product_transition(&m), &reward, &p, STUDY_GAMMA).unwrap();
        for s in 0..NUM_STATES {
            for a in 0..NUM_ACTIONS {
                assert!((q3.q_mdp[s][a] - 3.0 * q1.q_mdp[s][a]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn consistency_and_contraction() {
        let m = reference_model();
        for zeta in ZETA_PRESETS {
            let q = solve_qmdp(&m, &RewardSpec::study(zeta), &ReliabilitySpec::STUDY).unwrap();
            assert!(q.residual < VALUE_TOLERANCE);
            for s in 0..NUM_STATES {
                let v = q.q_tau[s].iter().copied().fold(f64::NEG_INFINITY, f64::max);
                assert!((v - q.value[s]).abs() < 1e-9);
            }
            for w in q.residual_trace[1..].windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12), "{:?}", q.residual_trace);
            }
        }
    }

    #[test]
    fn selection_rules() {
        let mut q = QTable {
            q_mdp: [[0.0; NUM_ACTIONS]; NUM_STATES],
            q_tau: [[0.0; 3]; NUM_STATES],
            value: [0.0; NUM_STATES],
            zeta: None,
            gamma: 0.9,
            iterations: 0,
            residual: 0.0,
            residual_trace: vec![],
        };
        // exact ties everywhere -> Low
        let b = Belief::vertex(ProductState::from_index(3).unwrap());
        assert_eq!(
            select_transparency(&b, &q, Stimulus::Present, Experience::Reliable),
            Transparency::Low
        );
        // Low dominates in every state
        for a in ActionTriple::all() {
            for s in 0..NUM_STATES {
                q.q_mdp[s][a.index()] = if a.transparency == Transparency::Low { 1.0 } else { 0.0 };
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let b = Belief::from_marginals(rng.random(), rng.random());
            assert_eq!(
                select_transparency(&b, &q, Stimulus::Absent, Experience::Faulty),
                Transparency::Low
            );
        }
    }

    #[test]
    fn selection_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let mut q = solve_qmdp(&reference_model(), &RewardSpec::study(0.5), &ReliabilitySpec::STUDY).unwrap();
            for x in q.q_mdp.iter_mut().flatten() {
                *x = rng.random_range(-5.0..5.0);
            }
            let raw: [f64; 4] = std::array::from_fn(|_| rng.random_range(0.0..1.0));
            let z: f64 = raw.iter().sum();
            let b = Belief::new(raw.map(|x| x / z)).unwrap();
            let rec = Stimulus::ALL[rng.random_range(0..2)];
            let exp = Experience::ALL[rng.random_range(0..2)];
            let mut best = (f64::NEG_INFINITY, 0);
            for k in 0..3 {
                let a = rec.index() * 6 + exp.index() * 3 + k;
                let v: f64 = (0..4).map(|s| b.probs()[s] * q.q_mdp[s][a]).sum();
                if v > best.0 {
                    best = (v, k);
                }
            }
            assert_eq!(select_transparency(&b, &q, rec, exp).index(), best.1);
        }
    }

    #[test]
    fn bad_specs_rejected() {
        let m = reference_model();
        assert!(solve_qmdp(&m, &RewardSpec { gamma: 1.0, ..RewardSpec::study(0.5) }, &ReliabilitySpec::STUDY).is_err());
        assert!(solve_qmdp(&m, &RewardSpec::study(-0.1), &ReliabilitySpec::STUDY).is_err());
    }
}
