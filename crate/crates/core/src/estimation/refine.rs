//! Generalized-EM refinement of a workload model found by the genetic
//! search. Transitions and prior get the closed-form Baum-Welch update; each
//! state's ex-Gaussian parameters are moved by a warm-started Nelder-Mead
//! search on the posterior-weighted log density. Every accepted step is a
//! non-decrease of the likelihood, so the trace stays monotone.

use argmin::core::{CostFunction, Error as ArgminError, Executor, State};
use argmin::solver::neldermead::NelderMead;
use rayon::prelude::*;

use super::likelihood::forward_backward;
use super::{FitConfig, Sequence, WorkloadBounds};
use crate::model::{ExGaussianParams, WorkloadModel, NUM_ACTIONS};

/// Nelder-Mead iterations per emission M-step.
const EMISSION_STEPS: u64 = 80;

struct Stats {
    ll: f64,
    initial: [f64; 2],
    transition: [[[f64; 2]; 2]; NUM_ACTIONS],
    /// (rt, posterior weight of each state) per trial.
    weights: Vec<(f64, [f64; 2])>,
}

fn e_step(model: &WorkloadModel, data: &[Sequence]) -> Stats {
    let parts: Vec<Stats> = data
        .par_iter()
        .map(|seq| {
            let post = forward_backward(model, seq);
            let mut transition = [[[0.0; 2]; 2]; NUM_ACTIONS];
            let mut weights = Vec::with_capacity(seq.len());
            for (k, trial) in seq.trials.iter().enumerate() {
                let a = trial.action.index();
                for i in 0..2 {
                    for j in 0..2 {
                        transition[a][i][j] += post.pairs[k][i][j];
                    }
                }
                weights.push((trial.observation.response_time(), post.states[k]));
            }
            Stats {
                ll: post.log_likelihood,
                initial: post.initial,
                transition,
                weights,
            }
        })
        .collect();
    let mut total = Stats {
        ll: 0.0,
        initial: [0.0; 2],
        transition: [[[0.0; 2]; 2]; NUM_ACTIONS],
        weights: Vec::new(),
    };
    for p in parts {
        total.ll += p.ll;
        for i in 0..2 {
            total.initial[i] += p.initial[i];
        }
        for a in 0..NUM_ACTIONS {
            for i in 0..2 {
                for j in 0..2 {
                    total.transition[a][i][j] += p.transition[a][i][j];
                }
            }
        }
        total.weights.extend(p.weights);
    }
    total
}

/// Negative weighted log density of positive RTs, over (mu, ln sigma, ln tau).
struct WeightedCost<'a> {
    weights: &'a [(f64, [f64; 2])],
    state: usize,
    bounds: WorkloadBounds,
}

impl WeightedCost<'_> {
    fn params(p: &[f64]) -> ExGaussianParams {
        ExGaussianParams {
            mu: p[0],
            sigma: p[1].exp(),
            tau: p[2].exp(),
        }
    }

    fn eval(&self, e: &ExGaussianParams) -> f64 {
        let b = self.bounds;
        let inside = |v: f64, (lo, hi): (f64, f64)| v >= lo && v <= hi;
        if !(inside(e.mu, b.mu) && inside(e.sigma, b.sigma) && inside(e.tau, b.tau)) {
            return f64::INFINITY;
        }
        let log_norm = match e.sf(0.0) {
            Ok(s) if s > 0.0 => s.ln(),
            _ => return f64::INFINITY,
        };
        let mut total = 0.0;
        for (x, w) in self.weights {
            let wj = w[self.state];
            if wj > 0.0 {
                match e.log_pdf(*x) {
                    Ok(lp) => total += wj * (lp - log_norm),
                    Err(_) => return f64::INFINITY,
                }
            }
        }
        if total.is_finite() {
            -total
        } else {
            f64::INFINITY
        }
    }
}

impl CostFunction for WeightedCost<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> Result<f64, ArgminError> {
        Ok(self.eval(&Self::params(p)))
    }
}

fn improve_emission(
    current: ExGaussianParams,
    weights: &[(f64, [f64; 2])],
    state: usize,
    bounds: WorkloadBounds,
) -> ExGaussianParams {
    let cost = WeightedCost {
        weights,
        state,
        bounds,
    };
    let start_cost = cost.eval(&current);
    let x0 = vec![current.mu, current.sigma.ln(), current.tau.ln()];
    let mut simplex = vec![x0.clone()];
    for (k, step) in [0.05, 0.05, 0.05].into_iter().enumerate() {
        let mut v = x0.clone();
        v[k] += step;
        simplex.push(v);
    }
    let solver = match NelderMead::new(simplex).with_sd_tolerance(1e-10) {
        Ok(s) => s,
        Err(_) => return current,
    };
    let best = Executor::new(cost, solver)
        .configure(|s| s.max_iters(EMISSION_STEPS))
        .run()
        .ok()
        .and_then(|r| {
            let c = r.state.get_best_cost();
            r.state.get_best_param().cloned().map(|p| (p, c))
        });
    match best {
        Some((p, c)) if c < start_cost => WeightedCost::params(&p),
        _ => current,
    }
}

fn normalize(row: [f64; 2]) -> Option<[f64; 2]> {
    let s = row[0] + row[1];
    (s > 0.0 && s.is_finite()).then(|| [row[0] / s, row[1] / s])
}

pub(crate) struct Refined {
    pub model: WorkloadModel,
    /// Log-likelihood before each update, then the final value.
    pub trace: Vec<f64>,
    pub converged: bool,
}

pub(crate) fn refine_workload(start: WorkloadModel, data: &[Sequence], cfg: &FitConfig) -> Refined {
    let mut model = start;
    let mut stats = e_step(&model, data);
    let mut trace = vec![stats.ll];
    let mut converged = false;
    for _ in 0..cfg.max_iterations {
        let mut next = model.clone();
        if let Some(p) = normalize(stats.initial) {
            next.prior = p;
        }
        for (a, rows) in next.transition.iter_mut().enumerate() {
            for (i, row) in rows.iter_mut().enumerate() {
                let c = stats.transition[a][i];
                if let Some(r) = normalize([c[0] + cfg.smoothing, c[1] + cfg.smoothing]) {
                    *row = r;
                }
            }
        }
        for k in 0..2 {
            next.emission[k] = improve_emission(model.emission[k], &stats.weights, k, cfg.ga.bounds);
        }
        let next_stats = e_step(&next, data);
        if !(next_stats.ll >= stats.ll) {
            // numerical noise at the optimum; keep the better model
            converged = true;
            break;
        }
        let prev = stats.ll;
        model = next;
        stats = next_stats;
        trace.push(stats.ll);
        if ((stats.ll - prev) / prev.abs().max(f64::MIN_POSITIVE)).abs() < cfg.tolerance {
            converged = true;
            break;
        }
    }
    Refined {
        model,
        trace,
        converged,
    }
}
