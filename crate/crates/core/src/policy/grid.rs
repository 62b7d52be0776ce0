//! Transparency decisions over the factored belief grid, for plotting.

use serde::Serialize;

use super::qmdp::{select_transparency, QTable};
use super::{invalid, PolicyError};
use crate::model::{Belief, Experience, Stimulus, Transparency};
use crate::util::fmt_f64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridCell {
    pub p_trust_high: f64,
    pub p_workload_high: f64,
    pub transparency: Transparency,
}

/// Evaluate the policy at `resolution x resolution` evenly spaced points of
/// (P(trust high), P(workload high)) in [0, 1]^2, trust-major.
pub fn export_policy_grid(
    q: &QTable,
    rec: Stimulus,
    exp: Experience,
    resolution: usize,
) -> Result<Vec<GridCell>, PolicyError> {
    if resolution < 2 {
        return Err(invalid("resolution", format!("must be >= 2 (got {resolution})")));
    }
    let step = |k: usize| k as f64 / (resolution - 1) as f64;
    let mut out = Vec::with_capacity(resolution * resolution);
    for i in 0..resolution {
        for j in 0..resolution {
            let (pt, pw) = (step(i), step(j));
            let b = Belief::from_marginals(pt, pw);
            out.push(GridCell {
                p_trust_high: pt,
                p_workload_high: pw,
                transparency: select_transparency(&b, q, rec, exp),
            });
        }
    }
    Ok(out)
}

pub fn grid_to_csv(cells: &[GridCell]) -> String {
    let mut s = String::from("p_trust_high,p_workload_high,transparency\n");
    for c in cells {
        s.push_str(&format!(
            "{},{},{}\n",
            fmt_f64(c.p_trust_high),
            fmt_f64(c.p_workload_high),
            c.transparency.label()
        ));
    }
    s
}
