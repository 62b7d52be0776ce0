//! Baum-Welch for the trust chain with action-conditioned transitions.
//!
//! Expected transition counts are kept per action (12 separate 2x2
//! accumulators); prior and emission counts are pooled over all sequences
//! and steps.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;

use super::likelihood::forward_backward;
use super::{check_data, EstimationError, FitConfig, FitReport, Sequence};
use crate::model::{Compliance, TrustModel, NUM_ACTIONS};

#[derive(Debug, Clone)]
struct Counts {
    ll: f64,
    initial: [f64; 2],
    transition: [[[f64; 2]; 2]; NUM_ACTIONS],
    emission: [[f64; 2]; 2],
}

impl Counts {
    fn zero() -> Self {
        Self {
            ll: 0.0,
            initial: [0.0; 2],
            transition: [[[0.0; 2]; 2]; NUM_ACTIONS],
            emission: [[0.0; 2]; 2],
        }
    }

    fn add(&mut self, o: &Counts) {
        self.ll += o.ll;
        for i in 0..2 {
            self.initial[i] += o.initial[i];
            for c in 0..2 {
                self.emission[i][c] += o.emission[i][c];
            }
        }
        for (a, rows) in self.transition.iter_mut().enumerate() {
            for i in 0..2 {
                for j in 0..2 {
                    rows[i][j] += o.transition[a][i][j];
                }
            }
        }
    }
}

fn sequence_counts(model: &TrustModel, seq: &Sequence) -> Counts {
    let post = forward_backward(model, seq);
    let mut c = Counts::zero();
    c.ll = post.log_likelihood;
    c.initial = post.initial;
    for (k, trial) in seq.trials.iter().enumerate() {
        let a = trial.action.index();
        for i in 0..2 {
            for j in 0..2 {
                c.transition[a][i][j] += post.pairs[k][i][j];
            }
        }
        let o = trial.observation.compliance.index();
        for i in 0..2 {
            c.emission[i][o] += post.states[k][i];
        }
    }
    c
}

/// E-step over all data. Per-sequence counts are computed in parallel and
/// reduced in input order.
fn expected_counts(model: &TrustModel, data: &[Sequence]) -> Counts {
    let parts: Vec<Counts> = data
        .par_iter()
        .map(|s| sequence_counts(model, s))
        .collect();
    let mut total = Counts::zero();
    for p in &parts {
        total.add(p);
    }
    total
}

fn normalize(row: [f64; 2]) -> Option<[f64; 2]> {
    let s = row[0] + row[1];
    if s > 0.0 && s.is_finite() {
        Some([row[0] / s, row[1] / s])
    } else {
        None
    }
}

fn m_step(prev: &TrustModel, counts: &Counts, smoothing: f64) -> TrustModel {
    let mut next = prev.clone();
    if let Some(p) = normalize(counts.initial) {
        next.prior = p;
    }
    for (a, rows) in next.transition.iter_mut().enumerate() {
        for (i, row) in rows.iter_mut().enumerate() {
            let raw = counts.transition[a][i];
            if let Some(r) = normalize([raw[0] + smoothing, raw[1] + smoothing]) {
                *row = r;
            }
        }
    }
    for (i, row) in next.emission.iter_mut().enumerate() {
        if let Some(r) = normalize(counts.emission[i]) {
            *row = r;
        }
    }
    next
}

fn dirichlet_row(rng: &mut ChaCha8Rng, gamma: &Gamma<f64>) -> [f64; 2] {
    let a = gamma.sample(rng);
    let b = gamma.sample(rng);
    [a / (a + b), b / (a + b)]
}

fn random_start(rng: &mut ChaCha8Rng, concentration: f64) -> TrustModel {
    let gamma = Gamma::new(concentration, 1.0).expect("positive concentration");
    let prior = dirichlet_row(rng, &gamma);
    let mut transition = [[[0.0; 2]; 2]; NUM_ACTIONS];
    for rows in transition.iter_mut() {
        for row in rows.iter_mut() {
            *row = dirichlet_row(rng, &gamma);
        }
    }
    let emission = [dirichlet_row(rng, &gamma), dirichlet_row(rng, &gamma)];
    TrustModel {
        prior,
        transition,
        emission,
    }
}

struct Run {
    model: TrustModel,
    trace: Vec<f64>,
    converged: bool,
}

fn run_em(start: TrustModel, data: &[Sequence], cfg: &FitConfig) -> Run {
    let mut model = start;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut counts = expected_counts(&model, data);
    trace.push(counts.ll);
    for _ in 0..cfg.max_iterations {
        model = m_step(&model, &counts, cfg.smoothing);
        counts = expected_counts(&model, data);
        let prev = *trace.last().expect("trace seeded");
        trace.push(counts.ll);
        if ((counts.ll - prev) / prev.abs().max(f64::MIN_POSITIVE)).abs() < cfg.tolerance {
            converged = true;
            break;
        }
    }
    Run {
        model,
        trace,
        converged,
    }
}

/// Fit the trust chain by EM from `cfg.restarts` random starting points and
/// return the best run, with states ordered so that high trust agrees more.
pub fn fit_trust_model(
    data: &[Sequence],
    cfg: &FitConfig,
) -> Result<FitReport<TrustModel>, EstimationError> {
    check_data(data)?;
    cfg.validate()?;

    let mut warnings = Vec::new();
    let first = data[0].trials[0].observation.compliance;
    if data
        .iter()
        .flat_map(|s| s.trials.iter())
        .all(|t| t.observation.compliance == first)
    {
        warnings.push(format!(
            "every compliance observation is `{first}`; emission rows are not identifiable"
        ));
    }
    let mut seen = [false; NUM_ACTIONS];
    for t in data.iter().flat_map(|s| s.trials.iter()) {
        seen[t.action.index()] = true;
    }
    let unseen: Vec<String> = (0..NUM_ACTIONS)
        .filter(|a| !seen[*a])
        .map(|a| a.to_string())
        .collect();
    if !unseen.is_empty() {
        warnings.push(format!(
            "actions never observed (transitions set by smoothing): {}",
            unseen.join(",")
        ));
    }

    let mut best: Option<Run> = None;
    let mut finals = Vec::with_capacity(cfg.restarts);
    for r in 0..cfg.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(r as u64);
        let start = random_start(&mut rng, cfg.init_concentration);
        let run = run_em(start, data, cfg);
        let ll = *run.trace.last().expect("non-empty trace");
        log::debug!(
            "trust restart {r}: ll = {ll:.6} after {} iterations",
            run.trace.len() - 1
        );
        finals.push(ll);
        let better = best
            .as_ref()
            .is_none_or(|b| ll > *b.trace.last().expect("non-empty trace"));
        if better {
            best = Some(run);
        }
    }
    let best = best.expect("at least one restart");
    if !best.converged {
        warnings.push(format!(
            "EM stopped at max_iterations = {} before reaching tolerance",
            cfg.max_iterations
        ));
    }
    let ll = *best.trace.last().expect("non-empty trace");
    Ok(FitReport {
        model: best.model.canonicalized(),
        log_likelihood: ll,
        trace: best.trace,
        converged: best.converged,
        restarts_used: cfg.restarts,
        restart_log_likelihoods: finals,
        warnings,
    })
}

/// Share of `Agree` among all observations; handy for degenerate-data checks.
pub fn agree_rate(data: &[Sequence]) -> f64 {
    let (mut agree, mut n) = (0usize, 0usize);
    for t in data.iter().flat_map(|s| s.trials.iter()) {
        n += 1;
        if t.observation.compliance == Compliance::Agree {
            agree += 1;
        }
    }
    agree as f64 / n.max(1) as f64
}
