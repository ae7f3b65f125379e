//! Fuel-optimal traversal times for a fixed platoon configuration.
//!
//! Edges driven together by a platoon share one traversal-time variable, so
//! the program is
//!
//! ```text
//! minimize    sum_g c_g / T_g^2
//! subject to  T_g >= W_g / v_max                       (speed cap)
//!             sum_{edges of k} T <= deadline_k - start_k
//!             start_k + sum_{i<j} T_k[i] = start_p + sum_{i<jp} T_p[i]   (meet)
//! ```
//!
//! with `c_g = W_g^3 * (1 + eta * followers)`. The solver works in node
//! arrival times, where every meeting equality becomes a shared point, and
//! runs a primal log-barrier Newton method on what is left.

mod barrier;
mod nnls;
mod stn;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::feasibility::FeasibilityError;
use crate::platoon_config::{ConfigError, EdgeGroups, PlatoonConfiguration};
use crate::road_graph::Route;
use crate::scenario::Scenario;

pub use barrier::SolverOptions;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Feasibility(#[from] FeasibilityError),
    #[error("expected {expected} routes, got {got}")]
    RouteCount { expected: usize, got: usize },
}

/// Sparse linear row `sum coef * T[var] (op) rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearRow {
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl LinearRow {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * x[v]).sum()
    }
}

/// The convex program for one configuration, with platooned edges merged.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedProgram {
    /// Objective coefficient per variable.
    pub coeffs: Vec<f64>,
    /// Minimum traversal time per variable (hours).
    pub lower_bounds: Vec<f64>,
    /// One `sum T <= deadline - start` row per truck.
    pub deadline_rows: Vec<LinearRow>,
    /// Meeting-time equalities.
    pub equalities: Vec<LinearRow>,
    /// Maps variables back to (truck, edge).
    pub groups: EdgeGroups,
    pub starts: Vec<f64>,
    pub deadlines: Vec<f64>,
}

impl ReducedProgram {
    pub fn num_vars(&self) -> usize {
        self.coeffs.len()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().zip(x).map(|(c, t)| c / (t * t)).sum()
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.coeffs.iter().zip(x).map(|(c, t)| -2.0 * c / (t * t * t)).collect()
    }

    /// Largest violation of any constraint at `x`, in hours.
    pub fn primal_violation(&self, x: &[f64]) -> f64 {
        let bounds = x
            .iter()
            .zip(&self.lower_bounds)
            .map(|(t, lb)| (lb - t).max(0.0))
            .fold(0.0, f64::max);
        let deadlines = self
            .deadline_rows
            .iter()
            .map(|r| (r.eval(x) - r.rhs).max(0.0))
            .fold(0.0, f64::max);
        let eqs = self
            .equalities
            .iter()
            .map(|r| (r.eval(x) - r.rhs).abs())
            .fold(0.0, f64::max);
        bounds.max(deadlines).max(eqs)
    }

    /// Per-truck traversal times for a variable vector.
    pub fn unmerge(&self, x: &[f64]) -> Vec<Vec<f64>> {
        self.groups
            .group_of
            .iter()
            .map(|row| row.iter().map(|&g| x[g]).collect())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolverStatus {
    Optimal,
    Infeasible,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverResult {
    pub status: SolverStatus,
    /// Traversal times per truck per edge (hours); empty when infeasible.
    pub traversal_h: Vec<Vec<f64>>,
    /// Value per merged variable; empty when infeasible.
    pub variables: Vec<f64>,
    pub objective: f64,
    /// Scaled stationarity residual (infinity norm).
    pub stationarity: f64,
    /// Largest constraint violation in hours.
    pub primal_violation: f64,
    /// Scaled complementarity gap.
    pub complementarity: f64,
    pub iterations: usize,
}

impl SolverResult {
    pub fn is_optimal(&self) -> bool {
        self.status == SolverStatus::Optimal
    }
}

/// Builds the merged program for `config`.
///
/// Meeting equalities are emitted only where a follower joins its
/// predecessor; on consecutive platooned edges the meeting is implied by the
/// previous meeting and the shared traversal time.
pub fn build_reduced_program(
    config: &PlatoonConfiguration,
    routes: &[Route],
    scenario: &Scenario,
) -> Result<ReducedProgram, SolverError> {
    if routes.len() != scenario.num_trucks() {
        return Err(SolverError::RouteCount {
            expected: scenario.num_trucks(),
            got: routes.len(),
        });
    }
    let params = &scenario.params;
    let groups = config.edge_groups(routes)?;
    let coeffs = groups
        .members
        .iter()
        .map(|m| {
            let (k, i) = m[0];
            let w = routes[k as usize - 1].edge_lengths[i];
            // one leader at full drag, everyone else discounted
            w * w * w * (1.0 + params.eta * (m.len() - 1) as f64)
        })
        .collect();
    let lower_bounds = groups
        .members
        .iter()
        .map(|m| {
            let (k, i) = m[0];
            routes[k as usize - 1].edge_lengths[i] / params.v_max_kmh
        })
        .collect();
    let starts: Vec<f64> = scenario.assignments.iter().map(|a| a.start_time_h).collect();
    let deadlines: Vec<f64> = scenario.assignments.iter().map(|a| a.deadline_h).collect();

    let deadline_rows = groups
        .group_of
        .iter()
        .enumerate()
        .map(|(k, row)| LinearRow {
            terms: merge_terms(row.iter().map(|&g| (g, 1.0))),
            rhs: deadlines[k] - starts[k],
        })
        .collect();

    let mut equalities = Vec::new();
    for (k, r) in routes.iter().enumerate() {
        let truck = k as u32 + 1;
        for (j, &pred) in config.predecessors(truck).iter().enumerate() {
            if pred == truck {
                continue;
            }
            let p = pred as usize - 1;
            let jp = routes[p]
                .edges()
                .position(|e| e == r.edge(j))
                .ok_or(ConfigError::EdgeNotShared { truck, edge: j, pred })?;
            if j > 0 && jp > 0 && groups.group_of[k][j - 1] == groups.group_of[p][jp - 1] {
                continue;
            }
            let terms = groups.group_of[k][..j]
                .iter()
                .map(|&g| (g, 1.0))
                .chain(groups.group_of[p][..jp].iter().map(|&g| (g, -1.0)));
            equalities.push(LinearRow {
                terms: merge_terms(terms),
                rhs: starts[p] - starts[k],
            });
        }
    }

    Ok(ReducedProgram {
        coeffs,
        lower_bounds,
        deadline_rows,
        equalities,
        groups,
        starts,
        deadlines,
    })
}

/// Sums coefficients per variable and drops zeros; output sorted by variable.
fn merge_terms(terms: impl Iterator<Item = (usize, f64)>) -> Vec<(usize, f64)> {
    let mut v: Vec<(usize, f64)> = terms.collect();
    v.sort_by_key(|t| t.0);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(v.len());
    for (var, c) in v {
        match out.last_mut() {
            Some(last) if last.0 == var => last.1 += c,
            _ => out.push((var, c)),
        }
    }
    out.retain(|t| t.1 != 0.0);
    out
}

/// Solves a program produced by [`build_reduced_program`].
///
/// `warm_start` (one value per variable) is used only when it is strictly
/// inside every inequality that is not pinned.
pub fn solve(program: &ReducedProgram, warm_start: Option<&[f64]>, options: &SolverOptions) -> SolverResult {
    barrier::solve(program, warm_start, options)
}
