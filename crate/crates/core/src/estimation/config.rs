use serde::{Deserialize, Serialize};

use super::EstimationError;

/// Box bounds for the workload genome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorkloadBounds {
    /// Logit range for every probability gene.
    pub logit: (f64, f64),
    pub mu: (f64, f64),
    pub sigma: (f64, f64),
    pub tau: (f64, f64),
}

impl Default for WorkloadBounds {
    fn default() -> Self {
        Self {
            logit: (-8.0, 8.0),
            mu: (-1.0, 5.0),
            sigma: (0.01, 3.0),
            tau: (0.01, 10.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    pub population: usize,
    pub max_generations: usize,
    /// Stop once the best fitness has improved by less than
    /// `stall_tolerance` over this many generations.
    pub stall_generations: usize,
    pub stall_tolerance: f64,
    pub tournament_size: usize,
    pub elitism: usize,
    /// BLX-alpha crossover extension.
    pub blend_alpha: f64,
    /// Mutation standard deviation as a fraction of each gene's box width.
    pub mutation_scale: f64,
    /// Per-gene mutation probability.
    pub mutation_rate: f64,
    pub bounds: WorkloadBounds,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: 100,
            max_generations: 500,
            stall_generations: 50,
            stall_tolerance: 1e-6,
            tournament_size: 3,
            elitism: 2,
            blend_alpha: 0.5,
            mutation_scale: 0.05,
            mutation_rate: 0.1,
            bounds: WorkloadBounds::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub max_iterations: usize,
    /// Relative log-likelihood change that counts as converged.
    pub tolerance: f64,
    pub restarts: usize,
    /// Pseudo-count added to every transition cell per action.
    pub smoothing: f64,
    /// Dirichlet concentration of the random EM starting points.
    pub init_concentration: f64,
    pub ga: GaConfig,
    /// Polish the genetic search result with generalized EM.
    pub refine_workload: bool,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            tolerance: 1e-6,
            restarts: 10,
            smoothing: 1e-9,
            init_concentration: 5.0,
            ga: GaConfig::default(),
            refine_workload: true,
            seed: 0,
        }
    }
}

fn check_range(name: &str, (lo, hi): (f64, f64)) -> Result<(), EstimationError> {
    if lo.is_finite() && hi.is_finite() && lo < hi {
        Ok(())
    } else {
        Err(EstimationError::Config(format!(
            "bounds for {name} must satisfy lo < hi (got [{lo}, {hi}])"
        )))
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<(), EstimationError> {
        let bad = |m: String| Err(EstimationError::Config(m));
        if !(self.tolerance > 0.0) {
            return bad(format!("tolerance must be > 0 (got {})", self.tolerance));
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be >= 1".into());
        }
        if self.restarts == 0 {
            return bad("restarts must be >= 1".into());
        }
        if !(self.smoothing >= 0.0) {
            return bad(format!("smoothing must be >= 0 (got {})", self.smoothing));
        }
        if !(self.init_concentration > 0.0) {
            return bad("init_concentration must be > 0".into());
        }
        let ga = &self.ga;
        if ga.population < 10 {
            return bad(format!("population must be >= 10 (got {})", ga.population));
        }
        if ga.max_generations == 0 || ga.stall_generations == 0 {
            return bad("generation limits must be >= 1".into());
        }
        if ga.tournament_size == 0 || ga.tournament_size > ga.population {
            return bad("tournament_size must be in 1..=population".into());
        }
        if ga.elitism >= ga.population {
            return bad("elitism must be smaller than the population".into());
        }
        if !(ga.blend_alpha >= 0.0 && ga.mutation_scale >= 0.0) {
            return bad("blend_alpha and mutation_scale must be >= 0".into());
        }
        if !(0.0..=1.0).contains(&ga.mutation_rate) {
            return bad("mutation_rate must lie in [0, 1]".into());
        }
        let b = &ga.bounds;
        check_range("logit", b.logit)?;
        check_range("mu", b.mu)?;
        check_range("sigma", b.sigma)?;
        check_range("tau", b.tau)?;
        if b.sigma.0 <= 0.0 || b.tau.0 <= 0.0 {
            return bad("sigma and tau bounds must be strictly positive".into());
        }
        Ok(())
    }
}
