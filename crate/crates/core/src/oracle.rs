//! Brute-force reference planner for small instances.
//!
//! Every way the trucks could coincide is enumerated edge by edge: for each
//! edge used by several trucks, every partition of those trucks into groups
//! driving together. For one such pattern the free quantities are the times
//! at meeting points, route ends and origins. Each gets a uniform grid over its
//! solo window, and between consecutive points a truck drives at constant speed
//! (optimal for a fixed elapsed time). The best grid assignment is found by
//! exact min-sum variable elimination. The plan is then re-scored with the
//! coincidence rule of the fuel model.
//!
//! Nothing here uses the configuration enumerator, window pruning or the
//! speed solver.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fuel_model::{coincidence_etas, objective_with_etas, SpeedPlan, COINCIDENCE_TIME_TOL};
use crate::planner::{prepare, PlanError};
use crate::platoon_config::{ConfigError, PlatoonConfiguration};
use crate::road_graph::{NodeId, Route};
use crate::scenario::Scenario;
use crate::timing::TimeWindows;

pub const MAX_TRUCKS: usize = 3;
pub const MAX_EDGES_PER_ROUTE: usize = 6;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("instance too large for brute force: {trucks} trucks, longest route {edges} edges")]
    TooLarge { trucks: usize, edges: usize },
    #[error("grid needs at least 2 levels and a positive tolerance")]
    InvalidGrid,
    #[error("time grid step must be positive")]
    InvalidStep,
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Discretization of the oracle search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Grid intervals per free time; `count + 1` levels, so doubling nests.
    pub count: usize,
    /// Coincidence tolerance in hours.
    pub tolerance: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            count: 50,
            tolerance: COINCIDENCE_TIME_TOL,
        }
    }
}

impl GridSpec {
    pub fn new(count: usize, tolerance: f64) -> Result<Self, OracleError> {
        if count < 2 || !(tolerance > 0.0) {
            return Err(OracleError::InvalidGrid);
        }
        Ok(Self { count, tolerance })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OraclePlan {
    pub objective: f64,
    pub speed_plan: SpeedPlan,
    /// Drag factor per truck per edge from the coincidence rule.
    pub etas: Vec<Vec<f64>>,
    pub patterns_examined: usize,
}

/// A coincidence pattern: groups of (truck index, edge index) driving together.
type Pattern = Vec<Vec<(usize, usize)>>;

fn guard(scenario: &Scenario) -> Result<(Vec<Route>, Vec<TimeWindows>), OracleError> {
    let (routes, windows) = prepare(scenario)?;
    let edges = routes.iter().map(Route::num_edges).max().unwrap_or(0);
    if routes.len() > MAX_TRUCKS || edges > MAX_EDGES_PER_ROUTE {
        return Err(OracleError::TooLarge {
            trucks: routes.len(),
            edges,
        });
    }
    Ok((routes, windows))
}

/// Exhaustive grid search over all coincidence patterns.
pub fn brute_force_plan(scenario: &Scenario, grid: GridSpec) -> Result<OraclePlan, OracleError> {
    GridSpec::new(grid.count, grid.tolerance)?;
    let (routes, windows) = guard(scenario)?;
    let patterns = coincidence_patterns(&routes);
    let eta = scenario.params.eta;
    let levels = Levels::Uniform(grid.count);
    let cost = CostMode::Fuel {
        eta,
        v_max: scenario.params.v_max_kmh,
    };

    let best = patterns
        .par_iter()
        .enumerate()
        .filter_map(|(idx, pattern)| {
            let times = grid_min(&routes, &windows, pattern, levels, cost)?;
            let traversal = times
                .iter()
                .map(|t| t.windows(2).map(|w| w[1] - w[0]).collect())
                .collect();
            let plan = SpeedPlan {
                traversal_h: traversal,
                arrival_h: times,
            };
            let etas = coincidence_etas(&routes, &plan, eta);
            let objective = objective_with_etas(&routes, &plan, &etas);
            Some((objective, idx, plan, etas))
        })
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let (objective, _, speed_plan, etas) = best.expect("the all-solo pattern has a grid point at the deadlines");
    Ok(OraclePlan {
        objective,
        speed_plan,
        etas,
        patterns_examined: patterns.len(),
    })
}

/// Whether `config` admits meeting times on a grid of spacing `step` hours.
///
/// The grid of every free time is `lower + j * step` plus its upper end,
/// within the solo window.
pub fn brute_force_feasibility(config: &PlatoonConfiguration, scenario: &Scenario, step: f64) -> Result<bool, OracleError> {
    if !(step > 0.0) {
        return Err(OracleError::InvalidStep);
    }
    let (routes, windows) = guard(scenario)?;
    config.validate(&routes)?;
    let pattern: Pattern = config
        .edge_groups(&routes)?
        .members
        .into_iter()
        .filter(|m| m.len() > 1)
        .map(|m| m.into_iter().map(|(k, i)| (k as usize - 1, i)).collect())
        .collect();
    let cost = CostMode::Feasibility {
        v_max: scenario.params.v_max_kmh,
    };
    Ok(grid_min(&routes, &windows, &pattern, Levels::Step(step), cost).is_some())
}

/// All coincidence patterns, the all-solo pattern first.
fn coincidence_patterns(routes: &[Route]) -> Vec<Pattern> {
    let mut users: BTreeMap<(NodeId, NodeId), Vec<(usize, usize)>> = BTreeMap::new();
    for (k, r) in routes.iter().enumerate() {
        for (i, e) in r.edges().enumerate() {
            users.entry(e).or_default().push((k, i));
        }
    }
    let per_edge: Vec<Vec<Pattern>> = users
        .into_values()
        .filter(|u| u.len() > 1)
        .map(|u| {
            set_partitions(u.len())
                .into_iter()
                .map(|blocks| {
                    blocks
                        .into_iter()
                        .filter(|b| b.len() > 1)
                        .map(|b| b.into_iter().map(|j| u[j]).collect())
                        .collect()
                })
                .collect()
        })
        .collect();
    let mut out: Vec<Pattern> = vec![Vec::new()];
    for options in per_edge {
        out = out
            .iter()
            .flat_map(|base| {
                options.iter().map(move |o| {
                    let mut p = base.clone();
                    p.extend(o.iter().cloned());
                    p
                })
            })
            .collect();
    }
    out
}

/// Set partitions of `0..n` via restricted growth strings; singletons first.
fn set_partitions(n: usize) -> Vec<Vec<Vec<usize>>> {
    fn rec(i: usize, n: usize, labels: &mut Vec<usize>, out: &mut Vec<Vec<Vec<usize>>>) {
        if i == n {
            let blocks = labels.iter().max().map_or(0, |m| m + 1);
            let mut p = vec![Vec::new(); blocks];
            for (j, &l) in labels.iter().enumerate() {
                p[l].push(j);
            }
            out.push(p);
            return;
        }
        let next = labels.iter().max().map_or(0, |m| m + 1);
        for l in (0..=next).rev() {
            labels.push(l);
            rec(i + 1, n, labels, out);
            labels.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, &mut Vec::new(), &mut out);
    out
}

#[derive(Debug, Clone, Copy)]
enum Levels {
    Uniform(usize),
    Step(f64),
}

#[derive(Debug, Clone, Copy)]
enum CostMode {
    Fuel { eta: f64, v_max: f64 },
    Feasibility { v_max: f64 },
}

/// Table over a sorted scope of variables, last variable fastest.
#[derive(Debug, Clone)]
struct Factor {
    vars: Vec<usize>,
    table: Vec<f64>,
}

fn strides(vars: &[usize], sizes: &[usize]) -> Vec<usize> {
    let mut s = vec![1; vars.len()];
    for i in (0..vars.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * sizes[vars[i + 1]];
    }
    s
}

fn index_of(vars: &[usize], strides: &[usize], assign: &[usize]) -> usize {
    vars.iter().zip(strides).map(|(&v, &s)| assign[v] * s).sum()
}

/// Minimum-cost grid assignment for one pattern; node times per truck.
fn grid_min(
    routes: &[Route],
    windows: &[TimeWindows],
    pattern: &Pattern,
    levels: Levels,
    cost: CostMode,
) -> Option<Vec<Vec<f64>>> {
    let k_n = routes.len();
    let mut merged: Vec<Vec<Option<usize>>> = routes.iter().map(|r| vec![None; r.num_edges()]).collect();
    for (g, members) in pattern.iter().enumerate() {
        for &(k, i) in members {
            merged[k][i] = Some(g);
        }
    }
    // anchor positions per truck
    let anchors: Vec<Vec<usize>> = routes
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let mut a = vec![0, r.num_edges()];
            for (i, m) in merged[k].iter().enumerate() {
                if m.is_some() {
                    a.extend([i, i + 1]);
                }
            }
            a.sort_unstable();
            a.dedup();
            a
        })
        .collect();

    // glue anchors of merged edges into shared variables
    let offset: Vec<usize> = routes
        .iter()
        .scan(0, |acc, r| {
            let o = *acc;
            *acc += r.nodes.len();
            Some(o)
        })
        .collect();
    let total = offset.last().map_or(0, |o| o + routes[k_n - 1].nodes.len());
    let mut parent: Vec<usize> = (0..total).collect();
    fn find(p: &mut [usize], mut a: usize) -> usize {
        while p[a] != a {
            p[a] = p[p[a]];
            a = p[a];
        }
        a
    }
    for members in pattern {
        let (k0, i0) = members[0];
        for &(k, i) in &members[1..] {
            for d in 0..2 {
                let (a, b) = (find(&mut parent, offset[k0] + i0 + d), find(&mut parent, offset[k] + i + d));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut var_of_root = vec![usize::MAX; total];
    let mut var_of: Vec<Vec<usize>> = Vec::with_capacity(k_n);
    let mut bounds: Vec<(f64, f64)> = Vec::new();
    for (k, a) in anchors.iter().enumerate() {
        let mut row = vec![usize::MAX; routes[k].nodes.len()];
        for &pos in a {
            let root = find(&mut parent, offset[k] + pos);
            if var_of_root[root] == usize::MAX {
                var_of_root[root] = bounds.len();
                bounds.push((f64::NEG_INFINITY, f64::INFINITY));
            }
            let v = var_of_root[root];
            bounds[v].0 = bounds[v].0.max(windows[k].lower[pos]);
            bounds[v].1 = bounds[v].1.min(windows[k].upper[pos]);
            row[pos] = v;
        }
        var_of.push(row);
    }
    let mut domains: Vec<Vec<f64>> = Vec::with_capacity(bounds.len());
    for &(lo, hi) in &bounds {
        if lo > hi + 1e-12 {
            return None;
        }
        let hi = hi.max(lo);
        domains.push(if hi - lo <= 1e-12 {
            vec![lo]
        } else {
            match levels {
                Levels::Uniform(n) => (0..=n).map(|j| lo + (hi - lo) * j as f64 / n as f64).collect(),
                Levels::Step(step) => {
                    let mut d: Vec<f64> = (0..)
                        .map(|j| lo + j as f64 * step)
                        .take_while(|t| *t < hi - 1e-12)
                        .collect();
                    d.push(hi);
                    d
                }
            }
        });
    }
    let sizes: Vec<usize> = domains.iter().map(Vec::len).collect();

    // pairwise factors between consecutive anchors of every truck
    let mut factors: Vec<Factor> = Vec::new();
    for (k, r) in routes.iter().enumerate() {
        let cum = r.cumulative_km();
        let truck_id = k;
        for w in anchors[k].windows(2) {
            let (a, b) = (w[0], w[1]);
            let len = cum[b] - cum[a];
            let weight = match (cost, merged[k][a]) {
                (CostMode::Fuel { eta, .. }, Some(g)) if b == a + 1 => {
                    let leader = pattern[g].iter().map(|m| m.0).max() == Some(truck_id);
                    if leader {
                        1.0
                    } else {
                        eta
                    }
                }
                _ => 1.0,
            };
            let v_max = match cost {
                CostMode::Fuel { v_max, .. } | CostMode::Feasibility { v_max } => v_max,
            };
            let min_dt = len / v_max * (1.0 - 1e-12);
            let fuel = matches!(cost, CostMode::Fuel { .. });
            let edge_cost = |dt: f64| {
                if dt < min_dt || dt <= 0.0 {
                    f64::INFINITY
                } else if fuel {
                    weight * len * len * len / (dt * dt)
                } else {
                    0.0
                }
            };
            let (va, vb) = (var_of[k][a], var_of[k][b]);
            if va == vb {
                return None;
            }
            let (lo, hi) = (va.min(vb), va.max(vb));
            let mut table = vec![0.0; sizes[lo] * sizes[hi]];
            for (i, &t_lo) in domains[lo].iter().enumerate() {
                for (j, &t_hi) in domains[hi].iter().enumerate() {
                    let (ta, tb) = if va == lo { (t_lo, t_hi) } else { (t_hi, t_lo) };
                    table[i * sizes[hi] + j] = edge_cost(tb - ta);
                }
            }
            factors.push(Factor {
                vars: vec![lo, hi],
                table,
            });
        }
    }

    let assign = eliminate(factors, &sizes)?;
    // anchors from the assignment, intermediate nodes at constant speed
    let times = routes
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let cum = r.cumulative_km();
            let mut t = vec![0.0; r.nodes.len()];
            for w in anchors[k].windows(2) {
                let (a, b) = (w[0], w[1]);
                let ta = domains[var_of[k][a]][assign[var_of[k][a]]];
                let tb = domains[var_of[k][b]][assign[var_of[k][b]]];
                t[a] = ta;
                t[b] = tb;
                for i in a + 1..b {
                    t[i] = ta + (tb - ta) * (cum[i] - cum[a]) / (cum[b] - cum[a]);
                }
            }
            if anchors[k].len() == 1 {
                t[0] = domains[var_of[k][0]][assign[var_of[k][0]]];
            }
            t
        })
        .collect();
    Some(times)
}

/// Exact min-sum variable elimination with a min-degree order.
/// Returns the argmin level per variable, or `None` if every assignment is infinite.
fn eliminate(mut factors: Vec<Factor>, sizes: &[usize]) -> Option<Vec<usize>> {
    let n = sizes.len();
    let mut alive = vec![true; n];
    let mut trace: Vec<(usize, Vec<usize>, Vec<usize>)> = Vec::with_capacity(n);
    let mut constant = 0.0;
    for _ in 0..n {
        // variable with the smallest resulting scope
        let x = (0..n)
            .filter(|&v| alive[v])
            .min_by_key(|&v| {
                let mut scope: Vec<usize> = factors
                    .iter()
                    .filter(|f| f.vars.contains(&v))
                    .flat_map(|f| f.vars.iter().copied())
                    .collect();
                scope.sort_unstable();
                scope.dedup();
                (scope.iter().map(|&u| sizes[u]).product::<usize>(), v)
            })
            .expect("alive variable");
        alive[x] = false;
        let (with_x, rest): (Vec<Factor>, Vec<Factor>) = factors.into_iter().partition(|f| f.vars.contains(&x));
        factors = rest;
        let mut scope: Vec<usize> = with_x
            .iter()
            .flat_map(|f| f.vars.iter().copied())
            .filter(|&u| u != x)
            .collect();
        scope.sort_unstable();
        scope.dedup();
        let scope_strides = strides(&scope, sizes);
        let f_strides: Vec<Vec<usize>> = with_x.iter().map(|f| strides(&f.vars, sizes)).collect();
        let cells: usize = scope.iter().map(|&u| sizes[u]).product();
        let mut table = vec![f64::INFINITY; cells];
        let mut arg = vec![0usize; cells];
        let mut assign = vec![0usize; n];
        for (cell, (slot, best_arg)) in table.iter_mut().zip(arg.iter_mut()).enumerate() {
            let mut rem = cell;
            for (&u, &s) in scope.iter().zip(&scope_strides) {
                assign[u] = rem / s;
                rem %= s;
            }
            for lx in 0..sizes[x] {
                assign[x] = lx;
                let mut total = 0.0;
                for (f, st) in with_x.iter().zip(&f_strides) {
                    total += f.table[index_of(&f.vars, st, &assign)];
                    if total == f64::INFINITY {
                        break;
                    }
                }
                if total < *slot {
                    *slot = total;
                    *best_arg = lx;
                }
            }
        }
        if scope.is_empty() {
            constant += table[0];
        } else {
            factors.push(Factor {
                vars: scope.clone(),
                table,
            });
        }
        trace.push((x, scope, arg));
    }
    if !constant.is_finite() {
        return None;
    }
    let mut assign = vec![0usize; n];
    for (x, scope, arg) in trace.iter().rev() {
        let st = strides(scope, sizes);
        assign[*x] = arg[index_of(scope, &st, &assign)];
    }
    Some(assign)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::road_graph::{Edge, RoadNetwork};
    use crate::scenario::{FuelParams, TransportAssignment};
    use approx::assert_relative_eq;

    fn scenario(edges: &[(u64, u64, f64)], trucks: &[(u64, u64, f64, f64)]) -> Scenario {
        let mut nodes: Vec<NodeId> = edges.iter().flat_map(|e| [NodeId(e.0), NodeId(e.1)]).collect();
        nodes.sort();
        nodes.dedup();
        let edges: Vec<Edge> = edges
            .iter()
            .map(|&(a, b, w)| Edge {
                from: NodeId(a),
                to: NodeId(b),
                length_km: w,
            })
            .collect();
        let assignments = trucks
            .iter()
            .enumerate()
            .map(|(i, &(o, d, s, dl))| TransportAssignment {
                id: i as u32 + 1,
                origin: NodeId(o),
                destination: NodeId(d),
                start_time_h: s,
                deadline_h: dl,
            })
            .collect();
        Scenario::new(RoadNetwork::new(&nodes, &edges).unwrap(), assignments, FuelParams::default())
    }

    fn corridor(starts: [f64; 2], deadlines: [f64; 2]) -> Scenario {
        scenario(
            &[(1, 2, 60.0), (2, 3, 120.0), (3, 4, 60.0), (5, 2, 60.0), (3, 6, 60.0)],
            &[(1, 4, starts[0], deadlines[0]), (5, 6, starts[1], deadlines[1])],
        )
    }

    #[test]
    fn partitions_are_bell_numbers() {
        let counts: Vec<usize> = (1..=5).map(|n| set_partitions(n).len()).collect();
        assert_eq!(counts, vec![1, 2, 5, 15, 52]);
        assert_eq!(set_partitions(3)[0], vec![vec![0], vec![1], vec![2]]);
    }

    #[test]
    fn single_edge_takes_slowest_feasible_speed() {
        let sc = scenario(&[(1, 2, 90.0)], &[(1, 2, 0.0, 1.2)]);
        let res = brute_force_plan(&sc, GridSpec::default()).unwrap();
        assert_relative_eq!(res.speed_plan.traversal_h[0][0], 1.2, max_relative = 1e-12);
        assert_relative_eq!(res.objective, 506_250.0, max_relative = 1e-12);
    }

    #[test]
    fn refinement_never_hurts() {
        let sc = corridor([0.0, 0.3], [3.3, 3.5]);
        let mut last = f64::INFINITY;
        for count in [4, 8, 16, 32, 64] {
            let obj = brute_force_plan(&sc, GridSpec::new(count, 1e-6).unwrap()).unwrap().objective;
            assert!(obj <= last + 1e-9 * last, "{count}: {obj} > {last}");
            last = obj;
        }
    }

    #[test]
    fn merge_is_found_and_beats_solo() {
        let sc = corridor([0.0, 0.3], [3.3, 3.5]);
        let res = brute_force_plan(&sc, GridSpec::default()).unwrap();
        assert_eq!(res.patterns_examined, 2);
        assert_eq!(res.etas[0][1], 0.6);
        let solo = 240f64.powi(3) / 3.3f64.powi(2) + 240f64.powi(3) / 3.2f64.powi(2);
        assert!(res.objective < solo);
    }

    #[test]
    fn size_guard() {
        let edges: Vec<(u64, u64, f64)> = (1..=7).map(|i| (i, i + 1, 10.0)).collect();
        let sc = scenario(&edges, &[(1, 8, 0.0, 10.0)]);
        assert!(matches!(
            brute_force_plan(&sc, GridSpec::default()),
            Err(OracleError::TooLarge { trucks: 1, edges: 7 })
        ));
    }

    #[test]
    fn feasibility_cases() {
        let sc = corridor([0.0, 0.3], [3.3, 3.5]);
        let routes = sc.routes().unwrap();
        let solo = PlatoonConfiguration::solo(&routes);
        let merge = PlatoonConfiguration::from_predecessors(vec![vec![1, 2, 1], vec![2, 2, 2]], &routes).unwrap();
        assert!(brute_force_feasibility(&solo, &sc, 0.01).unwrap());
        assert!(brute_force_feasibility(&merge, &sc, 0.01).unwrap());
        let late = corridor([0.0, 2.0], [3.3, 5.0]);
        assert!(!brute_force_feasibility(&merge, &late, 0.01).unwrap());
    }

    // truck 2 must leave node 2 at exactly 1.0; truck 1 can just reach it
    #[test]
    fn single_point_meeting_window() {
        let sc = corridor([1.0 / 3.0, 1.0 / 3.0], [10.0, 1.0 + 120.0 / 90.0 + 60.0 / 90.0]);
        let routes = sc.routes().unwrap();
        let merge = PlatoonConfiguration::from_predecessors(vec![vec![1, 2, 1], vec![2, 2, 2]], &routes).unwrap();
        assert!(brute_force_feasibility(&merge, &sc, 0.1).unwrap());
        let windows = prepare(&sc).unwrap().1;
        let pruned = crate::feasibility::check_feasibility(&merge, &routes, &windows, 90.0).unwrap();
        assert!(pruned.is_feasible());
    }
}
