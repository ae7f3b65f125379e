use platoon_core::oracle::{brute_force_plan, GridSpec};
use platoon_core::planner::{plan, PlanOptions};
use platoon_core::road_graph::{Edge, NodeId, RoadNetwork};
use platoon_core::scenario::{FuelParams, Scenario, TransportAssignment};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A directed corridor 100, 101, ... with private feeder and exit nodes.
/// Every truck joins somewhere, drives a stretch and leaves, so paths are unique.
fn corridor_scenario(rng: &mut ChaCha8Rng, trucks: usize) -> Scenario {
    let m = 5;
    let corridor: Vec<f64> = (0..m - 1).map(|_| rng.gen_range(30.0..120.0)).collect();
    let mut nodes: Vec<NodeId> = (0..m as u64).map(|i| NodeId(100 + i)).collect();
    let mut edges: Vec<Edge> = (0..m - 1)
        .map(|i| Edge {
            from: NodeId(100 + i as u64),
            to: NodeId(101 + i as u64),
            length_km: corridor[i],
        })
        .collect();
    // common reference: time the platoon would pass corridor node 1
    let meet = 2.0;
    let v = 90.0;
    let mut assignments = Vec::new();
    for k in 0..trucks {
        let enter = rng.gen_range(0..2usize);
        let leave = rng.gen_range(2..m);
        let mut origin = NodeId(100 + enter as u64);
        let mut dist_to_node1 = corridor[enter..1].iter().sum::<f64>();
        let mut total = corridor[enter..leave].iter().sum::<f64>();
        if rng.gen_bool(0.7) {
            let w = rng.gen_range(20.0..90.0);
            let o = NodeId(10 * (k as u64 + 1));
            nodes.push(o);
            edges.push(Edge {
                from: o,
                to: origin,
                length_km: w,
            });
            origin = o;
            dist_to_node1 += w;
            total += w;
        }
        let mut destination = NodeId(100 + leave as u64);
        if rng.gen_bool(0.7) {
            let w = rng.gen_range(20.0..90.0);
            let d = NodeId(10 * (k as u64 + 1) + 1);
            nodes.push(d);
            edges.push(Edge {
                from: destination,
                to: d,
                length_km: w,
            });
            destination = d;
            total += w;
        }
        let start = meet - dist_to_node1 / v - rng.gen_range(0.0..0.3);
        let deadline = start + total / v * rng.gen_range(1.10..1.25);
        assignments.push(TransportAssignment {
            id: k as u32 + 1,
            origin,
            destination,
            start_time_h: start,
            deadline_h: deadline,
        });
    }
    Scenario::new(RoadNetwork::new(&nodes, &edges).unwrap(), assignments, FuelParams::default())
}

#[test]
fn planner_matches_oracle_on_random_corridors() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for case in 0..24 {
        let trucks = 2 + case % 2;
        let sc = corridor_scenario(&mut rng, trucks);
        let p = plan(&sc, &PlanOptions::default()).unwrap();
        let o = brute_force_plan(&sc, GridSpec::default()).unwrap();
        let gap = (o.objective - p.objective) / p.objective;
        eprintln!(
            "case {case}: planner {:.6} oracle {:.6} gap {:.2e} configs {} merged {}",
            p.objective, o.objective, gap, p.stats.configs_enumerated, !p.config.is_solo()
        );
        worst = worst.max(gap.abs());
        assert!(gap > -1e-9, "oracle beat planner in case {case}");
        assert!(gap < 5e-3, "case {case}: gap {gap}");
    }
    eprintln!("worst relative gap {worst:.3e}");
}
