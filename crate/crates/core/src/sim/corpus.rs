//! Synthetic study corpora: each participant flies three missions, one per
//! fixed transparency level, in random order.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::controller::TransparencyRule;
use super::log::SessionLog;
use super::mission::{run_mission, ArmorTimings, MissionConfig, TransparencyPolicy};
use super::{invalid, SimError};
use crate::estimation::SessionRow;
use crate::model::{Transparency, TrustWorkloadModel};
use crate::policy::ReliabilitySpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub participants: usize,
    pub trials_per_mission: usize,
    pub reliability: ReliabilitySpec,
    pub timings: ArmorTimings,
    pub seed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            participants: 200,
            trials_per_mission: 15,
            reliability: ReliabilitySpec::STUDY,
            timings: ArmorTimings::default(),
            seed: 0,
        }
    }
}

fn fixed_policy(t: Transparency) -> TransparencyPolicy {
    match t {
        Transparency::Low => TransparencyPolicy::FixedLow,
        Transparency::Medium => TransparencyPolicy::FixedMedium,
        Transparency::High => TransparencyPolicy::FixedHigh,
    }
}

/// Sessions ordered by participant, then by flown order. Participant `p`
/// draws from its own stream of the master seed.
pub fn simulate_corpus(
    cfg: &CorpusConfig,
    model: &TrustWorkloadModel,
) -> Result<Vec<SessionLog>, SimError> {
    if cfg.participants == 0 {
        return Err(invalid("participants", "must be >= 1"));
    }
    let per: Vec<Vec<SessionLog>> = (0..cfg.participants)
        .into_par_iter()
        .map(|p| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(p as u64);
            let mut order = Transparency::ALL.to_vec();
            order.shuffle(&mut rng);
            order
                .into_iter()
                .enumerate()
                .map(|(k, t)| {
                    let mission = MissionConfig {
                        trials_per_mission: cfg.trials_per_mission,
                        reliability: cfg.reliability,
                        timings: cfg.timings,
                        policy: fixed_policy(t),
                        seed: cfg.seed,
                    };
                    run_mission(&mission, model, &TransparencyRule::Fixed(t), model, &mut rng).map(
                        |mut log| {
                            log.participant_id = format!("p{:03}", p + 1);
                            log.mission_id = format!("mission{}", k + 1);
                            log
                        },
                    )
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;
    Ok(per.into_iter().flatten().collect())
}

pub fn corpus_rows(logs: &[SessionLog]) -> Vec<SessionRow> {
    logs.iter().flat_map(|l| l.rows()).collect()
}
