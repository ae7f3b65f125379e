//! Synthetic scenario generators shared by the integration tests.

#![allow(dead_code)]

use platoon_core::planner::prepare;
use platoon_core::platoon_config::{candidate_merge_intervals, shared_pairs};
use platoon_core::road_graph::{Edge, NodeId, RoadNetwork};
use platoon_core::scenario::{FuelParams, Scenario, TransportAssignment};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const V_MAX: f64 = 90.0;

pub fn edge(from: u64, to: u64, length_km: f64) -> Edge {
    Edge {
        from: NodeId(from),
        to: NodeId(to),
        length_km,
    }
}

pub fn scenario(nodes: Vec<NodeId>, edges: Vec<Edge>, trucks: Vec<(NodeId, NodeId, f64, f64)>) -> Scenario {
    let assignments = trucks
        .into_iter()
        .enumerate()
        .map(|(i, (origin, destination, start_time_h, deadline_h))| TransportAssignment {
            id: i as u32 + 1,
            origin,
            destination,
            start_time_h,
            deadline_h,
        })
        .collect();
    Scenario::new(RoadNetwork::new(&nodes, &edges).unwrap(), assignments, FuelParams::default())
}

/// Trucks join a directed corridor (nodes 100..=104) at node 100 or 101,
/// possibly through a private feeder, and leave at 102..=104, possibly onto a
/// private exit. Every route crosses (101, 102) and has at most five edges.
/// Candidates are redrawn until every truck pair passes the window-overlap
/// test somewhere on its shared path.
pub fn corridor_scenario(rng: &mut ChaCha8Rng, trucks: usize) -> Scenario {
    loop {
        let sc = draw_corridor(rng, trucks);
        if all_pairs_overlap(&sc) {
            return sc;
        }
    }
}

fn draw_corridor(rng: &mut ChaCha8Rng, trucks: usize) -> Scenario {
    let m = 5;
    let corridor: Vec<f64> = (0..m - 1).map(|_| rng.gen_range(30.0..120.0)).collect();
    let mut nodes: Vec<NodeId> = (0..m as u64).map(|i| NodeId(100 + i)).collect();
    let mut edges: Vec<Edge> = (0..m - 1).map(|i| edge(100 + i as u64, 101 + i as u64, corridor[i])).collect();
    // trucks would pass corridor node 101 around this time at full speed
    let meet = 2.0;
    let mut list = Vec::new();
    for k in 0..trucks as u64 {
        let enter = rng.gen_range(0..2usize);
        let leave = rng.gen_range(2..m);
        let mut n_edges = leave - enter;
        let mut origin = 100 + enter as u64;
        let mut to_meet: f64 = corridor[enter..1].iter().sum();
        let mut total: f64 = corridor[enter..leave].iter().sum();
        if rng.gen_bool(0.7) {
            let w = rng.gen_range(20.0..90.0);
            let o = 10 * (k + 1);
            nodes.push(NodeId(o));
            edges.push(edge(o, origin, w));
            origin = o;
            to_meet += w;
            total += w;
            n_edges += 1;
        }
        let mut destination = 100 + leave as u64;
        if n_edges < 5 && rng.gen_bool(0.7) {
            let w = rng.gen_range(20.0..90.0);
            let d = 10 * (k + 1) + 1;
            nodes.push(NodeId(d));
            edges.push(edge(destination, d, w));
            destination = d;
            total += w;
        }
        let start = meet - to_meet / V_MAX - rng.gen_range(0.0..0.3);
        let deadline = start + total / V_MAX * rng.gen_range(1.10..1.25);
        list.push((NodeId(origin), NodeId(destination), start, deadline));
    }
    scenario(nodes, edges, list)
}

fn all_pairs_overlap(sc: &Scenario) -> bool {
    let Ok((routes, windows)) = prepare(sc) else { return false };
    let pairs = shared_pairs(&routes).unwrap();
    let n = routes.len();
    pairs.len() == n * (n - 1) / 2
        && pairs.iter().all(|p| {
            candidate_merge_intervals(p, &windows[p.first as usize - 1], &windows[p.second as usize - 1]).len() > 1
        })
}

/// Two trucks with private feeders onto a shared stretch of `shared` edges,
/// then private exits. Starts and deadlines are random and may or may not
/// allow merging.
pub fn pair_scenario(rng: &mut ChaCha8Rng, shared: usize) -> Scenario {
    let mut nodes: Vec<NodeId> = (0..=shared as u64).map(|i| NodeId(100 + i)).collect();
    let mut edges: Vec<Edge> = (0..shared as u64)
        .map(|i| edge(100 + i, 101 + i, rng.gen_range(30.0..100.0)))
        .collect();
    let last = 100 + shared as u64;
    let mut list = Vec::new();
    for k in 0..2u64 {
        let (o, d) = (10 * (k + 1), 10 * (k + 1) + 1);
        let (wf, we) = (rng.gen_range(20.0..90.0), rng.gen_range(20.0..90.0));
        nodes.extend([NodeId(o), NodeId(d)]);
        edges.push(edge(o, 100, wf));
        edges.push(edge(last, d, we));
        let total = wf + we + edges[..shared].iter().map(|e| e.length_km).sum::<f64>();
        let start = rng.gen_range(-1.0..1.0);
        let deadline = start + total / V_MAX * rng.gen_range(1.02..1.4);
        list.push((NodeId(o), NodeId(d), start, deadline));
    }
    scenario(nodes, edges, list)
}
