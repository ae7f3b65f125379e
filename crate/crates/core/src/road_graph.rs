//! Directed road network, canonical shortest paths and shared sub-paths.
//!
//! Node ids are supplied by the caller. Internally the network is stored in a
//! `petgraph` graph with dense indices, which never appear in any output.

use std::collections::HashMap;
use std::fmt;

use petgraph::algo::dijkstra;
use petgraph::graph::{DiGraph, NodeIndex};
use petgraph::visit::{EdgeRef, Reversed};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance used when comparing path lengths for equality.
const LENGTH_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u64);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("duplicate node {0}")]
    DuplicateNode(NodeId),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(NodeId, NodeId),
    #[error("edge ({0}, {1}) has non-positive or non-finite length {2}")]
    InvalidLength(NodeId, NodeId, f64),
    #[error("self-loop at node {0}")]
    SelfLoop(NodeId),
    #[error("node {to} is unreachable from {from}")]
    UnreachableTarget { from: NodeId, to: NodeId },
    #[error("shared edges of the two routes do not form one contiguous path")]
    NonContiguousIntersection,
}

/// A directed road segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
    pub length_km: f64,
}

/// Immutable weighted directed graph. Lengths are kilometers.
#[derive(Debug, Clone)]
pub struct RoadNetwork {
    graph: DiGraph<NodeId, f64>,
    index: HashMap<NodeId, NodeIndex>,
    edges: Vec<Edge>,
}

impl RoadNetwork {
    pub fn new(nodes: &[NodeId], edges: &[Edge]) -> Result<Self, GraphError> {
        let mut graph = DiGraph::with_capacity(nodes.len(), edges.len());
        let mut index = HashMap::with_capacity(nodes.len());
        for &n in nodes {
            if index.insert(n, graph.add_node(n)).is_some() {
                return Err(GraphError::DuplicateNode(n));
            }
        }
        let mut seen = HashMap::with_capacity(edges.len());
        for e in edges {
            let a = *index.get(&e.from).ok_or(GraphError::UnknownNode(e.from))?;
            let b = *index.get(&e.to).ok_or(GraphError::UnknownNode(e.to))?;
            if a == b {
                return Err(GraphError::SelfLoop(e.from));
            }
            if !(e.length_km.is_finite() && e.length_km > 0.0) {
                return Err(GraphError::InvalidLength(e.from, e.to, e.length_km));
            }
            if seen.insert((e.from, e.to), ()).is_some() {
                return Err(GraphError::DuplicateEdge(e.from, e.to));
            }
            graph.add_edge(a, b, e.length_km);
        }
        Ok(Self {
            graph,
            index,
            edges: edges.to_vec(),
        })
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.graph.node_weights().copied()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.index.contains_key(&node)
    }

    pub fn edge_length(&self, from: NodeId, to: NodeId) -> Option<f64> {
        let a = *self.index.get(&from)?;
        let b = *self.index.get(&to)?;
        self.graph.find_edge(a, b).map(|e| self.graph[e])
    }

    fn idx(&self, node: NodeId) -> Result<NodeIndex, GraphError> {
        self.index.get(&node).copied().ok_or(GraphError::UnknownNode(node))
    }

    /// Builds a route from an explicit node sequence, checking every hop.
    pub fn route(&self, nodes: &[NodeId]) -> Result<Route, GraphError> {
        for &n in nodes {
            self.idx(n)?;
        }
        let mut lengths = Vec::with_capacity(nodes.len().saturating_sub(1));
        for w in nodes.windows(2) {
            let len = self
                .edge_length(w[0], w[1])
                .ok_or(GraphError::UnreachableTarget { from: w[0], to: w[1] })?;
            lengths.push(len);
        }
        Ok(Route {
            nodes: nodes.to_vec(),
            edge_lengths: lengths,
        })
    }

    /// Minimum-length route from `source` to `target`.
    ///
    /// Among equal-length routes the lexicographically smallest node-id
    /// sequence is returned and `unique` is cleared.
    pub fn shortest_path(&self, source: NodeId, target: NodeId) -> Result<ShortestPath, GraphError> {
        let s = self.idx(source)?;
        let t = self.idx(target)?;
        if s == t {
            return Ok(ShortestPath {
                route: Route::single(source),
                unique: true,
            });
        }
        let from_source = dijkstra(&self.graph, s, None, |e| *e.weight());
        let total = *from_source
            .get(&t)
            .ok_or(GraphError::UnreachableTarget { from: source, to: target })?;
        let to_target = dijkstra(Reversed(&self.graph), t, None, |e| *e.weight());
        let tol = LENGTH_RTOL * total.max(1.0);

        let mut nodes = vec![source];
        let mut lengths = Vec::new();
        let mut unique = true;
        let mut cur = s;
        while cur != t {
            let d_cur = from_source[&cur];
            let mut candidates: Vec<(NodeId, NodeIndex, f64)> = self
                .graph
                .edges(cur)
                .filter_map(|e| {
                    let v = e.target();
                    let w = *e.weight();
                    let rest = *to_target.get(&v)?;
                    ((d_cur + w + rest - total).abs() <= tol).then_some((self.graph[v], v, w))
                })
                .collect();
            candidates.sort_by_key(|c| c.0);
            if candidates.len() > 1 {
                unique = false;
            }
            // at least one successor always lies on a shortest path
            let (id, v, w) = candidates[0];
            nodes.push(id);
            lengths.push(w);
            cur = v;
        }
        if !unique {
            log::warn!(
                "shortest path from {source} to {target} is not unique; using {:?}",
                nodes.iter().map(|n| n.0).collect::<Vec<_>>()
            );
        }
        Ok(ShortestPath {
            route: Route {
                nodes,
                edge_lengths: lengths,
            },
            unique,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShortestPath {
    pub route: Route,
    /// False when another route of equal length exists.
    pub unique: bool,
}

/// A simple path through the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub nodes: Vec<NodeId>,
    pub edge_lengths: Vec<f64>,
}

impl Route {
    pub fn single(node: NodeId) -> Self {
        Self {
            nodes: vec![node],
            edge_lengths: Vec::new(),
        }
    }

    pub fn num_edges(&self) -> usize {
        self.edge_lengths.len()
    }

    pub fn edge(&self, i: usize) -> (NodeId, NodeId) {
        (self.nodes[i], self.nodes[i + 1])
    }

    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.nodes.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn length(&self) -> f64 {
        self.edge_lengths.iter().sum()
    }

    pub fn position(&self, node: NodeId) -> Option<usize> {
        self.nodes.iter().position(|&n| n == node)
    }

    /// Cumulative distance at every node, starting from zero.
    pub fn cumulative_km(&self) -> Vec<f64> {
        let mut acc = 0.0;
        std::iter::once(0.0)
            .chain(self.edge_lengths.iter().map(|w| {
                acc += w;
                acc
            }))
            .collect()
    }
}

/// Common edges of two routes, with the node offsets into each route.
#[derive(Debug, Clone, PartialEq)]
pub struct SharedSubpath {
    pub route: Route,
    /// Index in the first route of the first shared node.
    pub first_offset: usize,
    /// Index in the second route of the first shared node.
    pub second_offset: usize,
}

impl SharedSubpath {
    pub fn num_edges(&self) -> usize {
        self.route.num_edges()
    }
}

/// Extracts the shared edges of two routes.
///
/// For unique shortest paths these form a single contiguous path; anything
/// else is reported as [`GraphError::NonContiguousIntersection`].
pub fn shared_subpath(first: &Route, second: &Route) -> Result<Option<SharedSubpath>, GraphError> {
    let in_second: HashMap<(NodeId, NodeId), usize> =
        second.edges().enumerate().map(|(i, e)| (e, i)).collect();
    let matches: Vec<(usize, usize)> = first
        .edges()
        .enumerate()
        .filter_map(|(i, e)| in_second.get(&e).map(|&j| (i, j)))
        .collect();
    let Some(&(i0, j0)) = matches.first() else {
        return Ok(None);
    };
    for (step, &(i, j)) in matches.iter().enumerate() {
        if i != i0 + step || j != j0 + step {
            return Err(GraphError::NonContiguousIntersection);
        }
    }
    let n = matches.len();
    Ok(Some(SharedSubpath {
        route: Route {
            nodes: first.nodes[i0..=i0 + n].to_vec(),
            edge_lengths: first.edge_lengths[i0..i0 + n].to_vec(),
        },
        first_offset: i0,
        second_offset: j0,
    }))
}
