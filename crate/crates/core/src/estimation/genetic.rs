//! Real-coded genetic algorithm and the workload-chain fit built on it.
//!
//! The workload genome has 31 genes: one prior logit, two transition logits
//! per action (one per source state) and the three ex-Gaussian parameters of
//! each state. Probabilities are unconstrained logits mapped through the
//! logistic function, so every genome decodes to a valid model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::likelihood::sequence_log_likelihood;
use super::refine::refine_workload;
use super::{check_data, EstimationError, FitConfig, FitReport, GaConfig, Sequence};
use crate::model::{ExGaussianParams, WorkloadModel, NUM_ACTIONS};

pub const WORKLOAD_GENES: usize = 1 + 2 * NUM_ACTIONS + 6;
const EXG_OFFSET: usize = 1 + 2 * NUM_ACTIONS;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaOutcome {
    pub best: Vec<f64>,
    pub best_fitness: f64,
    /// Best-so-far fitness after each generation, starting with the initial
    /// population.
    pub trace: Vec<f64>,
    pub generations: usize,
    /// True when the run ended on the stall criterion rather than the
    /// generation cap.
    pub stalled: bool,
}

fn clamp(x: f64, (lo, hi): (f64, f64)) -> f64 {
    x.clamp(lo, hi)
}

fn evaluate<F>(population: &[Vec<f64>], objective: &F) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    population
        .par_iter()
        .map(|g| {
            let f = objective(g);
            if f.is_nan() {
                f64::NEG_INFINITY
            } else {
                f
            }
        })
        .collect()
}

fn tournament(rng: &mut ChaCha8Rng, fitness: &[f64], size: usize) -> usize {
    let mut best = rng.random_range(0..fitness.len());
    for _ in 1..size {
        let c = rng.random_range(0..fitness.len());
        if fitness[c] > fitness[best] {
            best = c;
        }
    }
    best
}

/// Maximize `objective` over the box `bounds`.
///
/// Tournament selection, BLX-alpha crossover, Gaussian mutation scaled to
/// each gene's box width, and elitism. Random decisions are drawn
/// sequentially from one seeded stream; only fitness evaluation runs in
/// parallel, so results do not depend on the thread schedule.
pub fn maximize<F>(
    bounds: &[(f64, f64)],
    cfg: &GaConfig,
    seed: u64,
    seeds: &[Vec<f64>],
    objective: F,
) -> GaOutcome
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let n = bounds.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");

    let mut population: Vec<Vec<f64>> = seeds
        .iter()
        .take(cfg.population)
        .map(|g| g.iter().zip(bounds).map(|(x, b)| clamp(*x, *b)).collect())
        .collect();
    while population.len() < cfg.population {
        population.push(bounds.iter().map(|&(lo, hi)| rng.random_range(lo..=hi)).collect());
    }
    let mut fitness = evaluate(&population, &objective);

    let best_of = |fit: &[f64]| {
        fit.iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &f)| if f > acc.1 { (i, f) } else { acc })
    };
    let (bi, bf) = best_of(&fitness);
    let mut best = population[bi].clone();
    let mut best_fitness = bf;
    let mut trace = vec![best_fitness];
    let mut stalled = false;
    let mut generations = 0;

    for gen in 1..=cfg.max_generations {
        generations = gen;
        let mut order: Vec<usize> = (0..population.len()).collect();
        order.sort_by(|&a, &b| fitness[b].total_cmp(&fitness[a]));

        let mut next: Vec<Vec<f64>> = Vec::with_capacity(cfg.population);
        let mut next_fit: Vec<f64> = Vec::with_capacity(cfg.population);
        for &i in order.iter().take(cfg.elitism) {
            next.push(population[i].clone());
            next_fit.push(fitness[i]);
        }
        let mut children = Vec::with_capacity(cfg.population - next.len());
        while next.len() + children.len() < cfg.population {
            let a = &population[tournament(&mut rng, &fitness, cfg.tournament_size)];
            let b = &population[tournament(&mut rng, &fitness, cfg.tournament_size)];
            let mut child = Vec::with_capacity(n);
            for k in 0..n {
                let (lo, hi) = (a[k].min(b[k]), a[k].max(b[k]));
                let ext = cfg.blend_alpha * (hi - lo);
                let mut x = if hi - lo > 0.0 || ext > 0.0 {
                    rng.random_range((lo - ext)..=(hi + ext))
                } else {
                    lo
                };
                if rng.random_bool(cfg.mutation_rate) {
                    let width = bounds[k].1 - bounds[k].0;
                    x += cfg.mutation_scale * width * unit.sample(&mut rng);
                }
                child.push(clamp(x, bounds[k]));
            }
            children.push(child);
        }
        let child_fit = evaluate(&children, &objective);
        next.extend(children);
        next_fit.extend(child_fit);
        population = next;
        fitness = next_fit;

        let (bi, bf) = best_of(&fitness);
        if bf > best_fitness {
            best_fitness = bf;
            best = population[bi].clone();
        }
        trace.push(best_fitness);

        if gen >= cfg.stall_generations {
            let before = trace[gen - cfg.stall_generations];
            if best_fitness - before < cfg.stall_tolerance {
                stalled = true;
                break;
            }
        }
    }

    GaOutcome {
        best,
        best_fitness,
        trace,
        generations,
        stalled,
    }
}

#[inline]
fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn row(p_high: f64) -> [f64; 2] {
    [1.0 - p_high, p_high]
}

/// Box bounds of the 31-gene workload genome.
pub fn workload_bounds(cfg: &GaConfig) -> Vec<(f64, f64)> {
    let b = cfg.bounds;
    let mut out = vec![b.logit; EXG_OFFSET];
    for _ in 0..2 {
        out.extend([b.mu, b.sigma, b.tau]);
    }
    out
}

pub fn decode_workload(genes: &[f64]) -> WorkloadModel {
    assert_eq!(genes.len(), WORKLOAD_GENES);
    let mut transition = [[[0.0; 2]; 2]; NUM_ACTIONS];
    for (a, rows) in transition.iter_mut().enumerate() {
        for (i, r) in rows.iter_mut().enumerate() {
            *r = row(logistic(genes[1 + 2 * a + i]));
        }
    }
    let exg = |k: usize| ExGaussianParams {
        mu: genes[EXG_OFFSET + 3 * k],
        sigma: genes[EXG_OFFSET + 3 * k + 1],
        tau: genes[EXG_OFFSET + 3 * k + 2],
    };
    WorkloadModel {
        prior: row(logistic(genes[0])),
        transition,
        emission: [exg(0), exg(1)],
    }
}

pub fn encode_workload(m: &WorkloadModel) -> Vec<f64> {
    let mut g = Vec::with_capacity(WORKLOAD_GENES);
    g.push(logit(m.prior[1]));
    for rows in &m.transition {
        for r in rows {
            g.push(logit(r[1]));
        }
    }
    for p in &m.emission {
        g.extend([p.mu, p.sigma, p.tau]);
    }
    g
}

fn sequential_log_likelihood(m: &WorkloadModel, data: &[Sequence]) -> f64 {
    data.iter().map(|s| sequence_log_likelihood(m, s)).sum()
}

/// Fit the workload chain by genetic maximization of the log-likelihood,
/// optionally polished by generalized EM (`cfg.refine_workload`).
///
/// Response times below the 50th percentile and above it seed two
/// individuals of the initial population (a crude low/high split); the rest
/// of the population is uniform in the box.
pub fn fit_workload_model(
    data: &[Sequence],
    cfg: &FitConfig,
) -> Result<FitReport<WorkloadModel>, EstimationError> {
    check_data(data)?;
    cfg.validate()?;

    let bounds = workload_bounds(&cfg.ga);
    let seeds = split_seeds(data, &bounds);
    let outcome = maximize(&bounds, &cfg.ga, cfg.seed, &seeds, |g| {
        sequential_log_likelihood(&decode_workload(g), data)
    });

    let mut model = decode_workload(&outcome.best);
    let mut trace = outcome.trace.clone();
    let mut log_likelihood = outcome.best_fitness;
    let mut converged = outcome.stalled;
    if cfg.refine_workload {
        let refined = refine_workload(model, data, cfg);
        trace.extend(refined.trace.iter().skip(1));
        log_likelihood = *refined.trace.last().expect("non-empty trace");
        model = refined.model;
        converged = refined.converged;
    }
    let model = model.canonicalized();
    let mut warnings = Vec::new();
    if !outcome.stalled {
        warnings.push(format!(
            "genetic search hit the generation cap ({}) before stalling",
            cfg.ga.max_generations
        ));
    }
    for (k, p) in model.emission.iter().enumerate() {
        let b = cfg.ga.bounds;
        for (name, v, (lo, hi)) in [("mu", p.mu, b.mu), ("sigma", p.sigma, b.sigma), ("tau", p.tau, b.tau)] {
            if v <= lo || v >= hi {
                warnings.push(format!("state {k} {name} = {v} sits on its bound"));
            }
        }
    }
    Ok(FitReport {
        model,
        log_likelihood,
        trace,
        converged,
        restarts_used: 1,
        restart_log_likelihoods: vec![outcome.best_fitness],
        warnings,
    })
}

/// Method-of-moments ex-Gaussian for a sample: tau from the skewness,
/// clamped into the box.
fn moment_params(xs: &[f64], bounds: &[(f64, f64)]) -> [f64; 3] {
    let n = xs.len().max(1) as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m3 = xs.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n;
    let sd = var.sqrt().max(1e-6);
    let skew = (m3 / sd.powi(3)).clamp(0.0, 1.99);
    let tau = sd * (skew / 2.0).cbrt();
    let sigma = (var - tau * tau).max(1e-6).sqrt();
    let mu = mean - tau;
    let o = EXG_OFFSET;
    [
        mu.clamp(bounds[o].0, bounds[o].1),
        sigma.clamp(bounds[o + 1].0, bounds[o + 1].1),
        tau.clamp(bounds[o + 2].0, bounds[o + 2].1),
    ]
}

fn split_seeds(data: &[Sequence], bounds: &[(f64, f64)]) -> Vec<Vec<f64>> {
    let mut rts: Vec<f64> = data
        .iter()
        .flat_map(|s| s.trials.iter().map(|t| t.observation.response_time()))
        .collect();
    rts.sort_by(f64::total_cmp);
    let half = rts.len() / 2;
    if half == 0 {
        return Vec::new();
    }
    let low = moment_params(&rts[..half], bounds);
    let high = moment_params(&rts[half..], bounds);
    let mut g = vec![0.0; WORKLOAD_GENES];
    g[EXG_OFFSET..EXG_OFFSET + 3].copy_from_slice(&low);
    g[EXG_OFFSET + 3..].copy_from_slice(&high);
    vec![g]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::trace_is_non_decreasing;
    use crate::model::reference::reference_workload_model;

    #[test]
    fn encode_decode_round_trip() {
        let m = reference_workload_model();
        let back = decode_workload(&encode_workload(&m));
        for a in 0..NUM_ACTIONS {
            for i in 0..2 {
                assert!((back.transition[a][i][1] - m.transition[a][i][1]).abs() < 1e-12);
            }
        }
        assert_eq!(back.emission, m.emission);
        assert!(back.violations().is_empty());
    }

    #[test]
    fn ga_finds_quadratic_peak_and_trace_never_drops() {
        let cfg = GaConfig {
            population: 40,
            max_generations: 300,
            ..GaConfig::default()
        };
        let bounds = vec![(-5.0, 5.0); 4];
        let target = [1.0, -2.0, 0.5, 3.0];
        let out = maximize(&bounds, &cfg, 7, &[], |x| {
            -x.iter().zip(target).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
        });
        assert!(trace_is_non_decreasing(&out.trace, 0.0));
        for (x, t) in out.best.iter().zip(target) {
            assert!((x - t).abs() < 0.05, "{:?}", out.best);
        }
    }

    #[test]
    fn ga_is_deterministic() {
        let cfg = GaConfig {
            population: 20,
            max_generations: 30,
            ..GaConfig::default()
        };
        let bounds = vec![(-1.0, 1.0); 3];
        let f = |x: &[f64]| -(x[0] * x[0] + (x[1] - 0.3).abs() + x[2].sin());
        let a = maximize(&bounds, &cfg, 1, &[], f);
        let b = maximize(&bounds, &cfg, 1, &[], f);
        assert_eq!(a, b);
    }

    #[test]
    fn seeds_are_clamped_into_box() {
        let cfg = GaConfig {
            population: 10,
            max_generations: 1,
            ..GaConfig::default()
        };
        let out = maximize(&[(0.0, 1.0)], &cfg, 0, &[vec![5.0]], |x| x[0]);
        assert!(out.best[0] <= 1.0);
    }
}
