//! Fixpoint pruning of arrival windows under a platoon configuration.
//!
//! Every follower link forces equal arrival times at both ends of the shared
//! edge, so the two trucks' windows at those nodes are intersected. The speed
//! cap is then re-propagated along both routes. Sweeps repeat until a window
//! empties or nothing moves.

use thiserror::Error;

use crate::platoon_config::{ConfigError, PlatoonConfiguration};
use crate::road_graph::Route;
use crate::timing::TimeWindows;
use crate::TIME_TOL;

/// Sweep cap per route node.
const SWEEPS_PER_NODE: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeasibilityStatus {
    Feasible,
    /// The window of `truck` at route position `node` became empty.
    Infeasible { truck: u32, node: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrunedWindows {
    pub windows: Vec<TimeWindows>,
    pub status: FeasibilityStatus,
    pub sweeps: usize,
}

impl PrunedWindows {
    pub fn is_feasible(&self) -> bool {
        self.status == FeasibilityStatus::Feasible
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeasibilityError {
    #[error("window pruning did not settle within {0} sweeps")]
    NoFixpoint(usize),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// A follower link: truck `k` (0-based) edge `j` rides with truck `p` edge `jp`.
#[derive(Debug, Clone, Copy)]
struct Link {
    k: usize,
    j: usize,
    p: usize,
    jp: usize,
}

fn links(config: &PlatoonConfiguration, routes: &[Route]) -> Result<Vec<Link>, ConfigError> {
    let mut out = Vec::new();
    for (k, r) in routes.iter().enumerate() {
        let truck = k as u32 + 1;
        for (j, &pred) in config.predecessors(truck).iter().enumerate() {
            if pred == truck {
                continue;
            }
            let p = pred as usize - 1;
            let jp = routes
                .get(p)
                .and_then(|rp| rp.edges().position(|e| e == r.edge(j)))
                .ok_or(ConfigError::EdgeNotShared { truck, edge: j, pred })?;
            out.push(Link { k, j, p, jp });
        }
    }
    Ok(out)
}

/// Re-applies the speed cap along one route; returns total bound movement
/// and the first empty node, if any.
fn propagate(w: &mut TimeWindows, route: &Route, v_max: f64) -> (f64, Option<usize>) {
    let mut moved = 0.0;
    let n = w.len();
    for i in 0..n.saturating_sub(1) {
        let lo = w.lower[i] + route.edge_lengths[i] / v_max;
        if lo > w.lower[i + 1] {
            moved += lo - w.lower[i + 1];
            w.lower[i + 1] = lo;
        }
    }
    for i in (0..n.saturating_sub(1)).rev() {
        let hi = w.upper[i + 1] - route.edge_lengths[i] / v_max;
        if hi < w.upper[i] {
            moved += w.upper[i] - hi;
            w.upper[i] = hi;
        }
    }
    (moved, w.first_empty())
}

/// Intersects two node windows in place; `false` when the result is empty.
fn intersect(ws: &mut [TimeWindows], a: (usize, usize), b: (usize, usize), moved: &mut f64) -> bool {
    let lo = ws[a.0].lower[a.1].max(ws[b.0].lower[b.1]);
    let hi = ws[a.0].upper[a.1].min(ws[b.0].upper[b.1]);
    if lo > hi + TIME_TOL {
        return false;
    }
    for (t, i) in [a, b] {
        *moved += (lo - ws[t].lower[i]) + (ws[t].upper[i] - hi);
        ws[t].lower[i] = lo;
        ws[t].upper[i] = hi;
    }
    true
}

/// Prunes `initial` windows under `config`.
///
/// `Feasible` means the coupled timing constraints admit a solution; the
/// returned windows then bound every such solution node by node.
pub fn check_feasibility(
    config: &PlatoonConfiguration,
    routes: &[Route],
    initial: &[TimeWindows],
    v_max: f64,
) -> Result<PrunedWindows, FeasibilityError> {
    let links = links(config, routes)?;
    let mut ws = initial.to_vec();
    let infeasible = |k: usize, node: usize, ws: Vec<TimeWindows>, sweeps| PrunedWindows {
        windows: ws,
        status: FeasibilityStatus::Infeasible {
            truck: k as u32 + 1,
            node,
        },
        sweeps,
    };

    for k in 0..routes.len() {
        if let (_, Some(node)) = propagate(&mut ws[k], &routes[k], v_max) {
            return Ok(infeasible(k, node, ws, 0));
        }
    }

    let total_nodes: usize = routes.iter().map(|r| r.nodes.len()).sum();
    let cap = SWEEPS_PER_NODE * total_nodes.max(1);
    for sweep in 1..=cap {
        let mut moved = 0.0;
        for l in &links {
            for (a, b) in [(l.j, l.jp), (l.j + 1, l.jp + 1)] {
                if !intersect(&mut ws, (l.k, a), (l.p, b), &mut moved) {
                    return Ok(infeasible(l.k, a, ws, sweep));
                }
            }
            for t in [l.k, l.p] {
                let (m, empty) = propagate(&mut ws[t], &routes[t], v_max);
                moved += m;
                if let Some(node) = empty {
                    return Ok(infeasible(t, node, ws, sweep));
                }
            }
        }
        if moved <= TIME_TOL {
            return Ok(PrunedWindows {
                windows: ws,
                status: FeasibilityStatus::Feasible,
                sweeps: sweep,
            });
        }
    }
    Err(FeasibilityError::NoFixpoint(cap))
}
