use platoon_core::road_graph::{Edge, GraphError, NodeId, RoadNetwork};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_network(rng: &mut ChaCha8Rng, n: u64, m: usize) -> (Vec<NodeId>, Vec<Edge>) {
    let nodes: Vec<NodeId> = (0..n).map(|i| NodeId(3 * i + 1)).collect();
    let mut edges: Vec<Edge> = Vec::new();
    while edges.len() < m {
        let a = nodes[rng.gen_range(0..n as usize)];
        let b = nodes[rng.gen_range(0..n as usize)];
        if a == b || edges.iter().any(|e| e.from == a && e.to == b) {
            continue;
        }
        // small integer lengths force plenty of ties
        edges.push(Edge {
            from: a,
            to: b,
            length_km: rng.gen_range(1..6) as f64,
        });
    }
    (nodes, edges)
}

fn bellman_ford(nodes: &[NodeId], edges: &[Edge], source: NodeId) -> Vec<f64> {
    let pos = |id: NodeId| nodes.iter().position(|&x| x == id).unwrap();
    let mut d = vec![f64::INFINITY; nodes.len()];
    d[pos(source)] = 0.0;
    for _ in 0..nodes.len() {
        for e in edges {
            let cand = d[pos(e.from)] + e.length_km;
            if cand < d[pos(e.to)] {
                d[pos(e.to)] = cand;
            }
        }
    }
    d
}

/// All simple paths from `at` to `target`, by depth-first search.
fn simple_paths(edges: &[Edge], at: NodeId, target: NodeId, path: &mut Vec<NodeId>, len: f64, out: &mut Vec<(f64, Vec<NodeId>)>) {
    if at == target {
        out.push((len, path.clone()));
        return;
    }
    for e in edges.iter().filter(|e| e.from == at) {
        if path.contains(&e.to) {
            continue;
        }
        path.push(e.to);
        simple_paths(edges, e.to, target, path, len + e.length_km, out);
        path.pop();
    }
}

#[test]
fn dijkstra_routes_match_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut checked, mut ties) = (0, 0);
    for _ in 0..10 {
        let (nodes, edges) = random_network(&mut rng, 12, 30);
        let net = RoadNetwork::new(&nodes, &edges).unwrap();
        for &s in &nodes {
            let dist = bellman_ford(&nodes, &edges, s);
            for (j, &t) in nodes.iter().enumerate() {
                if s == t {
                    continue;
                }
                let res = net.shortest_path(s, t);
                if dist[j].is_infinite() {
                    assert_eq!(res, Err(GraphError::UnreachableTarget { from: s, to: t }));
                    continue;
                }
                let sp = res.unwrap();
                assert!((sp.route.length() - dist[j]).abs() < 1e-9);
                let mut all = Vec::new();
                simple_paths(&edges, s, t, &mut vec![s], 0.0, &mut all);
                let best: Vec<&Vec<NodeId>> = all
                    .iter()
                    .filter(|(l, _)| (l - dist[j]).abs() < 1e-9)
                    .map(|(_, p)| p)
                    .collect();
                assert_eq!(&sp.route.nodes, *best.iter().min().unwrap());
                assert_eq!(sp.unique, best.len() == 1);
                checked += 1;
                ties += (best.len() > 1) as usize;
            }
        }
    }
    assert!(checked > 500 && ties > 50, "{checked} pairs, {ties} ties");
}
