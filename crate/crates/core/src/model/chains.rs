//! Parameters of the two conditionally independent hidden chains.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::exgauss::ExGaussianParams;
use super::types::{ActionTriple, Compliance, ObservationPair, NUM_ACTIONS};

/// Row-sum tolerance for every stochastic vector in a model.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// `[action][from][to]`
pub type TransitionTable = [[[f64; 2]; 2]; NUM_ACTIONS];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustModel {
    /// Indexed by trust state (low, high).
    pub prior: [f64; 2],
    pub transition: TransitionTable,
    /// `[trust][compliance]`: rows are (low, high), columns (disagree, agree).
    pub emission: [[f64; 2]; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadModel {
    /// Indexed by workload state (low, high).
    pub prior: [f64; 2],
    pub transition: TransitionTable,
    /// Response-time distribution per workload state.
    pub emission: [ExGaussianParams; 2],
}

/// Trust and workload chains share the action but nothing else.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustWorkloadModel {
    pub trust: TrustModel,
    pub workload: WorkloadModel,
}

/// Common view of a two-state action-conditioned chain, used by the
/// likelihood and filtering code.
pub trait HiddenChain {
    fn prior(&self) -> [f64; 2];
    fn transition(&self, action: ActionTriple) -> &[[f64; 2]; 2];
    /// Log emission of `obs` from hidden state `state` (0 = low, 1 = high).
    fn log_emission(&self, state: usize, obs: &ObservationPair) -> f64;
    /// Scorer returning both states' log emissions; chains with per-state
    /// normalizers precompute them once here.
    fn emission_scorer(&self) -> impl Fn(&ObservationPair) -> [f64; 2] + '_ {
        move |o| [self.log_emission(0, o), self.log_emission(1, o)]
    }
    fn violations(&self) -> Vec<ModelViolation>;
}

impl HiddenChain for TrustModel {
    fn prior(&self) -> [f64; 2] {
        self.prior
    }

    fn transition(&self, action: ActionTriple) -> &[[f64; 2]; 2] {
        &self.transition[action.index()]
    }

    fn log_emission(&self, state: usize, obs: &ObservationPair) -> f64 {
        self.emission[state][obs.compliance.index()].ln()
    }

    fn violations(&self) -> Vec<ModelViolation> {
        TrustModel::violations(self)
    }
}

impl HiddenChain for WorkloadModel {
    fn prior(&self) -> [f64; 2] {
        self.prior
    }

    fn transition(&self, action: ActionTriple) -> &[[f64; 2]; 2] {
        &self.transition[action.index()]
    }

    fn log_emission(&self, state: usize, obs: &ObservationPair) -> f64 {
        self.emission[state]
            .log_pdf_positive(obs.response_time())
            .unwrap_or(f64::NEG_INFINITY)
    }

    fn emission_scorer(&self) -> impl Fn(&ObservationPair) -> [f64; 2] + '_ {
        let log_norm = self
            .emission
            .map(|p| p.sf(0.0).map(f64::ln).unwrap_or(f64::NAN));
        move |o| {
            let x = o.response_time();
            std::array::from_fn(|k| match self.emission[k].log_pdf(x) {
                Ok(lp) if log_norm[k].is_finite() => lp - log_norm[k],
                _ => f64::NEG_INFINITY,
            })
        }
    }

    fn violations(&self) -> Vec<ModelViolation> {
        WorkloadModel::violations(self)
    }
}

impl TrustModel {
    pub fn p_agree(&self, trust: usize) -> f64 {
        self.emission[trust][Compliance::Agree.index()]
    }

    /// Swap the labels of the two hidden states.
    pub fn relabelled(&self) -> Self {
        Self {
            prior: [self.prior[1], self.prior[0]],
            transition: swap_transition(&self.transition),
            emission: [self.emission[1], self.emission[0]],
        }
    }

    /// Order states so that high trust is the one more likely to agree.
    pub fn canonicalized(self) -> Self {
        if self.p_agree(0) > self.p_agree(1) {
            self.relabelled()
        } else {
            self
        }
    }
}

impl WorkloadModel {
    pub fn relabelled(&self) -> Self {
        Self {
            prior: [self.prior[1], self.prior[0]],
            transition: swap_transition(&self.transition),
            emission: [self.emission[1], self.emission[0]],
        }
    }

    /// Order states so that low workload has the smaller mean response time.
    pub fn canonicalized(self) -> Self {
        if self.emission[0].mean() > self.emission[1].mean() {
            self.relabelled()
        } else {
            self
        }
    }
}

fn swap_transition(t: &TransitionTable) -> TransitionTable {
    let mut out = *t;
    for (dst, src) in out.iter_mut().zip(t.iter()) {
        *dst = [[src[1][1], src[1][0]], [src[0][1], src[0][0]]];
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Chain {
    Trust,
    Workload,
}

impl fmt::Display for Chain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Chain::Trust => f.write_str("trust"),
            Chain::Workload => f.write_str("workload"),
        }
    }
}

/// One broken invariant. Validation collects all of them.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelViolation {
    ProbabilityRange {
        chain: Chain,
        field: String,
        value: f64,
    },
    PriorSum {
        chain: Chain,
        sum: f64,
    },
    TransitionRowSum {
        chain: Chain,
        action: usize,
        from: usize,
        sum: f64,
    },
    EmissionRowSum {
        state: usize,
        sum: f64,
    },
    ParameterDomain {
        state: usize,
        field: &'static str,
        value: f64,
    },
}

impl fmt::Display for ModelViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelViolation::ProbabilityRange {
                chain,
                field,
                value,
            } => write!(f, "{chain}: {field} = {value} is not a probability"),
            ModelViolation::PriorSum { chain, sum } => {
                write!(f, "{chain}: prior sums to {sum}")
            }
            ModelViolation::TransitionRowSum {
                chain,
                action,
                from,
                sum,
            } => write!(
                f,
                "{chain}: transition row from state {from} under action {action} ({}) sums to {sum}",
                ActionTriple::from_index(*action)
                    .map(|a| a.label())
                    .unwrap_or_default()
            ),
            ModelViolation::EmissionRowSum { state, sum } => {
                write!(f, "trust: emission row for state {state} sums to {sum}")
            }
            ModelViolation::ParameterDomain {
                state,
                field,
                value,
            } => write!(
                f,
                "workload: ex-Gaussian {field} = {value} out of domain for state {state}"
            ),
        }
    }
}

fn check_distribution(
    chain: Chain,
    field: &str,
    row: &[f64; 2],
    out: &mut Vec<ModelViolation>,
) -> bool {
    let mut ok = true;
    for (i, &p) in row.iter().enumerate() {
        if !(p.is_finite() && (0.0..=1.0).contains(&p)) {
            out.push(ModelViolation::ProbabilityRange {
                chain,
                field: format!("{field}[{i}]"),
                value: p,
            });
            ok = false;
        }
    }
    ok
}

fn row_sum_ok(row: &[f64; 2]) -> bool {
    let s = row[0] + row[1];
    s.is_finite() && (s - 1.0).abs() <= STOCHASTIC_TOL
}

fn validate_common(
    chain: Chain,
    prior: &[f64; 2],
    transition: &TransitionTable,
    out: &mut Vec<ModelViolation>,
) {
    check_distribution(chain, "prior", prior, out);
    if !row_sum_ok(prior) {
        out.push(ModelViolation::PriorSum {
            chain,
            sum: prior[0] + prior[1],
        });
    }
    for (a, rows) in transition.iter().enumerate() {
        for (from, row) in rows.iter().enumerate() {
            check_distribution(chain, &format!("transition[{a}][{from}]"), row, out);
            if !row_sum_ok(row) {
                out.push(ModelViolation::TransitionRowSum {
                    chain,
                    action: a,
                    from,
                    sum: row[0] + row[1],
                });
            }
        }
    }
}

impl TrustModel {
    pub fn violations(&self) -> Vec<ModelViolation> {
        let mut out = Vec::new();
        validate_common(Chain::Trust, &self.prior, &self.transition, &mut out);
        for (s, row) in self.emission.iter().enumerate() {
            check_distribution(Chain::Trust, &format!("emission[{s}]"), row, &mut out);
            if !row_sum_ok(row) {
                out.push(ModelViolation::EmissionRowSum {
                    state: s,
                    sum: row[0] + row[1],
                });
            }
        }
        out
    }
}

impl WorkloadModel {
    pub fn violations(&self) -> Vec<ModelViolation> {
        let mut out = Vec::new();
        validate_common(Chain::Workload, &self.prior, &self.transition, &mut out);
        for (s, p) in self.emission.iter().enumerate() {
            if let Err(e) = p.check() {
                out.push(ModelViolation::ParameterDomain {
                    state: s,
                    field: e.field,
                    value: e.value,
                });
            }
        }
        out
    }
}

/// Check every model invariant; returns all violations found.
pub fn validate_model(m: &TrustWorkloadModel) -> Result<(), Vec<ModelViolation>> {
    let mut v = m.trust.violations();
    v.extend(m.workload.violations());
    if v.is_empty() {
        Ok(())
    } else {
        Err(v)
    }
}

impl TrustWorkloadModel {
    pub fn validate(&self) -> Result<(), Vec<ModelViolation>> {
        validate_model(self)
    }
}
