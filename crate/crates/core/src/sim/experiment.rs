//! Batch comparison of transparency policies.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::controller::TransparencyRule;
use super::log::SessionLog;
use super::mission::{run_mission, MissionConfig, TransparencyPolicy};
use super::{invalid, SimError};
use crate::model::TrustWorkloadModel;
use crate::util::fmt_f64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub policies: Vec<TransparencyPolicy>,
    pub replications: usize,
    /// Mission template; its `policy` field is replaced per policy.
    pub mission: MissionConfig,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            policies: TransparencyPolicy::standard(),
            replications: 100,
            mission: MissionConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub policy: String,
    pub n: usize,
    pub decision_mean: f64,
    pub decision_sem: f64,
    pub rt_mean: f64,
    pub rt_sem: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub summaries: Vec<PolicySummary>,
    /// Policy-major, replication-minor.
    pub logs: Vec<SessionLog>,
}

/// Sample mean and standard error of the mean.
pub fn mean_sem(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Random stream for one replication of one policy.
pub fn replication_rng(seed: u64, policy: usize, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((policy as u64) << 32) | rep as u64);
    rng
}

/// Run `replications` missions per policy. Replications run in parallel,
/// each on its own stream, so results do not depend on scheduling.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    controller_model: &TrustWorkloadModel,
    human_model: &TrustWorkloadModel,
) -> Result<ExperimentResult, SimError> {
    if cfg.replications < 2 {
        return Err(invalid("replications", "must be >= 2"));
    }
    if cfg.policies.is_empty() {
        return Err(invalid("policies", "at least one policy is required"));
    }
    cfg.mission.validate()?;
    let table = cfg.mission.timings.decision_table()?;

    let mut summaries = Vec::with_capacity(cfg.policies.len());
    let mut logs = Vec::with_capacity(cfg.policies.len() * cfg.replications);
    for (p, policy) in cfg.policies.iter().enumerate() {
        let rule = TransparencyRule::resolve(policy, controller_model, &cfg.mission.reliability, &table)?;
        let mission = MissionConfig {
            policy: *policy,
            seed: cfg.seed,
            ..cfg.mission.clone()
        };
        let batch: Vec<SessionLog> = (0..cfg.replications)
            .into_par_iter()
            .map(|rep| {
                let mut rng = replication_rng(cfg.seed, p, rep);
                run_mission(&mission, controller_model, &rule, human_model, &mut rng).map(|mut log| {
                    log.participant_id = format!("rep{rep:04}");
                    log.mission_id = policy.to_string();
                    log
                })
            })
            .collect::<Result<_, _>>()?;
        let d: Vec<f64> = batch.iter().map(|l| l.total_decision_reward).collect();
        let r: Vec<f64> = batch.iter().map(|l| l.total_rt_reward).collect();
        let (decision_mean, decision_sem) = mean_sem(&d);
        let (rt_mean, rt_sem) = mean_sem(&r);
        summaries.push(PolicySummary {
            policy: policy.to_string(),
            n: batch.len(),
            decision_mean,
            decision_sem,
            rt_mean,
            rt_sem,
        });
        logs.extend(batch);
    }
    Ok(ExperimentResult { summaries, logs })
}

pub fn summary_csv(summaries: &[PolicySummary]) -> String {
    let mut s = String::from("policy,n,decision_mean,decision_sem,rt_mean,rt_sem\n");
    for p in summaries {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            p.policy,
            p.n,
            fmt_f64(p.decision_mean),
            fmt_f64(p.decision_sem),
            fmt_f64(p.rt_mean),
            fmt_f64(p.rt_sem)
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::reference::reference_model;

    #[test]
    fn mean_sem_small_sample() {
        let (m, s) = mean_sem(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn counts_and_determinism() {
        let m = reference_model();
        let cfg = ExperimentConfig {
            replications: 20,
            ..ExperimentConfig::default()
        };
        let a = run_experiment(&cfg, &m, &m).unwrap();
        assert_eq!(a.logs.len(), 120);
        assert_eq!(a.summaries.len(), 6);
        let b = run_experiment(&cfg, &m, &m).unwrap();
        assert_eq!(summary_csv(&a.summaries), summary_csv(&b.summaries));
        assert_eq!(summary_csv(&a.summaries).lines().count(), 7);
    }

    #[test]
    fn too_few_replications_rejected() {
        let m = reference_model();
        let cfg = ExperimentConfig {
            replications: 1,
            ..ExperimentConfig::default()
        };
        assert!(run_experiment(&cfg, &m, &m).is_err());
    }
}
