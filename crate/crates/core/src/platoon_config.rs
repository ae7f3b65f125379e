//! Platoon configurations: who follows whom on which edge.
//!
//! A configuration stores, for every truck and every edge of its route, the
//! predecessor id: the truck itself when driving alone or leading, otherwise
//! the smallest higher id in its platoon on that edge. Configurations are
//! built from pairwise merge choices, one contiguous interval of the shared
//! sub-path per truck pair, and closed transitively per edge.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::road_graph::{shared_subpath, GraphError, Route, SharedSubpath};
use crate::timing::TimeWindows;
use crate::TIME_TOL;

pub const DEFAULT_MAX_CONFIGS: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("configuration has {got} trucks, expected {expected}")]
    TruckCount { expected: usize, got: usize },
    #[error("truck {truck}: predecessor sequence has {got} entries for {expected} edges")]
    EdgeCount { truck: u32, expected: usize, got: usize },
    #[error("truck {truck} edge {edge}: invalid predecessor {pred}")]
    InvalidPredecessor { truck: u32, edge: usize, pred: u32 },
    #[error("truck {truck} edge {edge}: predecessor {pred} does not drive this edge")]
    EdgeNotShared { truck: u32, edge: usize, pred: u32 },
    #[error("truck {truck} edge {edge}: predecessor should be {expected}, found {found}")]
    InconsistentGroup {
        truck: u32,
        edge: usize,
        expected: u32,
        found: u32,
    },
    #[error("trucks {0} and {1} platoon on more than one separate stretch")]
    InconsistentChoices(u32, u32),
    #[error("merge choice for trucks ({0}, {1}) is out of range")]
    InvalidChoice(u32, u32),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Predecessor sequences `l_k`, indexed by truck id minus one.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PlatoonConfiguration {
    predecessors: Vec<Vec<u32>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlatoonRole {
    Solo,
    Leader,
    Follower,
}

impl fmt::Display for PlatoonRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlatoonRole::Solo => "solo",
            PlatoonRole::Leader => "leader",
            PlatoonRole::Follower => "follower",
        })
    }
}

/// Partition of all (truck, edge) occurrences into platoon groups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeGroups {
    /// `group_of[k - 1][i]` is the group of edge `i` on truck `k`'s route.
    pub group_of: Vec<Vec<usize>>,
    /// Members of every group as (truck id, edge index), ascending by truck.
    pub members: Vec<Vec<(u32, usize)>>,
}

impl PlatoonConfiguration {
    /// Everyone drives alone.
    pub fn solo(routes: &[Route]) -> Self {
        Self {
            predecessors: routes
                .iter()
                .enumerate()
                .map(|(k, r)| vec![k as u32 + 1; r.num_edges()])
                .collect(),
        }
    }

    /// Wraps explicit predecessor sequences after checking every invariant.
    pub fn from_predecessors(predecessors: Vec<Vec<u32>>, routes: &[Route]) -> Result<Self, ConfigError> {
        let cfg = Self { predecessors };
        cfg.validate(routes)?;
        Ok(cfg)
    }

    pub fn predecessors(&self, truck: u32) -> &[u32] {
        &self.predecessors[truck as usize - 1]
    }

    pub fn all_predecessors(&self) -> &[Vec<u32>] {
        &self.predecessors
    }

    pub fn num_trucks(&self) -> usize {
        self.predecessors.len()
    }

    pub fn is_solo(&self) -> bool {
        self.predecessors
            .iter()
            .enumerate()
            .all(|(k, l)| l.iter().all(|&p| p as usize == k + 1))
    }

    /// Number of (truck, edge) pairs driven as follower.
    pub fn follower_count(&self) -> usize {
        self.predecessors
            .iter()
            .enumerate()
            .map(|(k, l)| l.iter().filter(|&&p| p as usize != k + 1).count())
            .sum()
    }

    /// Role of every truck on every edge of its route.
    pub fn roles(&self, routes: &[Route]) -> Result<Vec<Vec<PlatoonRole>>, ConfigError> {
        let groups = self.edge_groups(routes)?;
        Ok(groups
            .group_of
            .iter()
            .enumerate()
            .map(|(k, row)| {
                let truck = k as u32 + 1;
                row.iter()
                    .map(|&g| {
                        let members = &groups.members[g];
                        if members.len() == 1 {
                            PlatoonRole::Solo
                        } else if members.iter().all(|m| m.0 <= truck) {
                            PlatoonRole::Leader
                        } else {
                            PlatoonRole::Follower
                        }
                    })
                    .collect()
            })
            .collect())
    }

    /// Groups implied by the predecessor links.
    ///
    /// Requires `routes` to match the configuration; each follower edge is
    /// located on the predecessor's route by its endpoints.
    pub fn edge_groups(&self, routes: &[Route]) -> Result<EdgeGroups, ConfigError> {
        let offsets = edge_offsets(routes);
        let mut dsu = Dsu::new(*offsets.last().unwrap_or(&0));
        for (k, l) in self.predecessors.iter().enumerate() {
            for (i, &p) in l.iter().enumerate() {
                if p as usize == k + 1 {
                    continue;
                }
                let truck = k as u32 + 1;
                let pred_route = routes
                    .get(p as usize - 1)
                    .ok_or(ConfigError::InvalidPredecessor { truck, edge: i, pred: p })?;
                let j = pred_route
                    .edges()
                    .position(|e| e == routes[k].edge(i))
                    .ok_or(ConfigError::EdgeNotShared { truck, edge: i, pred: p })?;
                dsu.union(offsets[k] + i, offsets[p as usize - 1] + j);
            }
        }
        Ok(groups_from_dsu(&mut dsu, routes, &offsets))
    }

    /// Checks every structural invariant against the routes.
    pub fn validate(&self, routes: &[Route]) -> Result<(), ConfigError> {
        if self.predecessors.len() != routes.len() {
            return Err(ConfigError::TruckCount {
                expected: routes.len(),
                got: self.predecessors.len(),
            });
        }
        let k_max = routes.len() as u32;
        for (k, (l, r)) in self.predecessors.iter().zip(routes).enumerate() {
            let truck = k as u32 + 1;
            if l.len() != r.num_edges() {
                return Err(ConfigError::EdgeCount {
                    truck,
                    expected: r.num_edges(),
                    got: l.len(),
                });
            }
            for (i, &p) in l.iter().enumerate() {
                if p < truck || p > k_max {
                    return Err(ConfigError::InvalidPredecessor { truck, edge: i, pred: p });
                }
            }
        }
        let groups = self.edge_groups(routes)?;
        for (k, l) in self.predecessors.iter().enumerate() {
            let truck = k as u32 + 1;
            for (i, &found) in l.iter().enumerate() {
                let g = &groups.members[groups.group_of[k][i]];
                let expected = g.iter().map(|m| m.0).find(|&m| m > truck).unwrap_or(truck);
                if expected != found {
                    return Err(ConfigError::InconsistentGroup {
                        truck,
                        edge: i,
                        expected,
                        found,
                    });
                }
            }
        }
        let pairs = shared_pairs(routes)?;
        implied_choices(&groups, &pairs)?;
        Ok(())
    }
}

/// A pair of trucks whose routes share at least one edge.
#[derive(Debug, Clone, PartialEq)]
pub struct SharedPair {
    pub first: u32,
    pub second: u32,
    pub shared: SharedSubpath,
}

/// All truck pairs with a non-empty shared sub-path, ordered by (first, second).
pub fn shared_pairs(routes: &[Route]) -> Result<Vec<SharedPair>, GraphError> {
    let mut out = Vec::new();
    for a in 0..routes.len() {
        for b in a + 1..routes.len() {
            if let Some(shared) = shared_subpath(&routes[a], &routes[b])? {
                out.push(SharedPair {
                    first: a as u32 + 1,
                    second: b as u32 + 1,
                    shared,
                });
            }
        }
    }
    Ok(out)
}

/// One pair's merge decision: the inclusive range of shared-sub-path edges
/// they platoon on, or `None` for no merge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MergeChoice {
    pub pair: (u32, u32),
    pub interval: Option<(usize, usize)>,
}

impl MergeChoice {
    pub fn none(first: u32, second: u32) -> Self {
        Self {
            pair: (first, second),
            interval: None,
        }
    }

    pub fn merged_edges(&self) -> usize {
        self.interval.map_or(0, |(a, b)| b - a + 1)
    }
}

impl PartialOrd for MergeChoice {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for MergeChoice {
    fn cmp(&self, other: &Self) -> Ordering {
        // None sorts before every interval
        self.pair.cmp(&other.pair).then(self.interval.cmp(&other.interval))
    }
}

/// Merge intervals that pass the pairwise window-overlap test at every node
/// they touch, preceded by the no-merge choice.
pub fn candidate_merge_intervals(
    pair: &SharedPair,
    first_windows: &TimeWindows,
    second_windows: &TimeWindows,
) -> Vec<MergeChoice> {
    let sh = &pair.shared;
    let nodes = sh.route.nodes.len();
    let overlap: Vec<bool> = (0..nodes)
        .map(|s| {
            let (i, j) = (sh.first_offset + s, sh.second_offset + s);
            let lo = first_windows.lower[i].max(second_windows.lower[j]);
            let hi = first_windows.upper[i].min(second_windows.upper[j]);
            lo <= hi + TIME_TOL
        })
        .collect();
    let mut out = vec![MergeChoice::none(pair.first, pair.second)];
    let m = sh.num_edges();
    for a in 0..m {
        for b in a..m {
            if overlap[a..=b + 1].iter().all(|&ok| ok) {
                out.push(MergeChoice {
                    pair: (pair.first, pair.second),
                    interval: Some((a, b)),
                });
            }
        }
    }
    out
}

fn edge_offsets(routes: &[Route]) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(routes.len() + 1);
    let mut acc = 0;
    offsets.push(0);
    for r in routes {
        acc += r.num_edges();
        offsets.push(acc);
    }
    offsets
}

struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller index stays root so numbering is deterministic
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

fn groups_from_dsu(dsu: &mut Dsu, routes: &[Route], offsets: &[usize]) -> EdgeGroups {
    let total = *offsets.last().unwrap_or(&0);
    let mut root_to_group = vec![usize::MAX; total];
    let mut members: Vec<Vec<(u32, usize)>> = Vec::new();
    let mut group_of = Vec::with_capacity(routes.len());
    for (k, r) in routes.iter().enumerate() {
        let mut row = Vec::with_capacity(r.num_edges());
        for i in 0..r.num_edges() {
            let root = dsu.find(offsets[k] + i);
            if root_to_group[root] == usize::MAX {
                root_to_group[root] = members.len();
                members.push(Vec::new());
            }
            let g = root_to_group[root];
            members[g].push((k as u32 + 1, i));
            row.push(g);
        }
        group_of.push(row);
    }
    EdgeGroups { group_of, members }
}

fn predecessors_from_groups(groups: &EdgeGroups) -> Vec<Vec<u32>> {
    groups
        .group_of
        .iter()
        .enumerate()
        .map(|(k, row)| {
            let truck = k as u32 + 1;
            row.iter()
                .map(|&g| {
                    groups.members[g]
                        .iter()
                        .map(|m| m.0)
                        .find(|&m| m > truck)
                        .unwrap_or(truck)
                })
                .collect()
        })
        .collect()
}

/// Per pair, the single interval on which the groups put them together.
fn implied_choices(groups: &EdgeGroups, pairs: &[SharedPair]) -> Result<Vec<MergeChoice>, ConfigError> {
    pairs
        .iter()
        .map(|p| {
            let sh = &p.shared;
            let together: Vec<usize> = (0..sh.num_edges())
                .filter(|&s| {
                    groups.group_of[p.first as usize - 1][sh.first_offset + s]
                        == groups.group_of[p.second as usize - 1][sh.second_offset + s]
                })
                .collect();
            match (together.first(), together.last()) {
                (Some(&a), Some(&b)) if b - a + 1 == together.len() => Ok(MergeChoice {
                    pair: (p.first, p.second),
                    interval: Some((a, b)),
                }),
                (Some(_), Some(_)) => Err(ConfigError::InconsistentChoices(p.first, p.second)),
                _ => Ok(MergeChoice::none(p.first, p.second)),
            }
        })
        .collect()
}

/// Composes pairwise choices into a configuration, closing groups transitively.
struct Composer<'a> {
    routes: &'a [Route],
    pairs: &'a [SharedPair],
    offsets: Vec<usize>,
}

impl<'a> Composer<'a> {
    fn new(routes: &'a [Route], pairs: &'a [SharedPair]) -> Self {
        Self {
            routes,
            pairs,
            offsets: edge_offsets(routes),
        }
    }

    fn compose(&self, choices: &[MergeChoice]) -> Result<(PlatoonConfiguration, Vec<MergeChoice>), ConfigError> {
        let mut dsu = Dsu::new(*self.offsets.last().unwrap_or(&0));
        for c in choices {
            let Some((a, b)) = c.interval else { continue };
            let pair = self
                .pairs
                .iter()
                .find(|p| (p.first, p.second) == c.pair)
                .ok_or(ConfigError::InvalidChoice(c.pair.0, c.pair.1))?;
            if a > b || b >= pair.shared.num_edges() {
                return Err(ConfigError::InvalidChoice(c.pair.0, c.pair.1));
            }
            let base1 = self.offsets[pair.first as usize - 1] + pair.shared.first_offset;
            let base2 = self.offsets[pair.second as usize - 1] + pair.shared.second_offset;
            for s in a..=b {
                dsu.union(base1 + s, base2 + s);
            }
        }
        let groups = groups_from_dsu(&mut dsu, self.routes, &self.offsets);
        let implied = implied_choices(&groups, self.pairs)?;
        Ok((
            PlatoonConfiguration {
                predecessors: predecessors_from_groups(&groups),
            },
            implied,
        ))
    }
}

/// Builds the configuration induced by pairwise merge choices.
///
/// Pairs without a choice do not merge directly but may still end up
/// together through a third truck.
pub fn compose_configuration(choices: &[MergeChoice], routes: &[Route]) -> Result<PlatoonConfiguration, ConfigError> {
    let pairs = shared_pairs(routes)?;
    Composer::new(routes, &pairs).compose(choices).map(|(cfg, _)| cfg)
}

/// Lazily enumerates valid configurations.
///
/// The all-solo configuration comes first, then configurations by ascending
/// number of merged pair-edges, each level in lexicographic order of the
/// per-pair merge choices. Each configuration is yielded once: combinations
/// whose transitive closure merges a pair differently from its own choice
/// are skipped, since the matching combination yields the same result.
pub struct ConfigEnumerator {
    routes: Vec<Route>,
    pairs: Vec<SharedPair>,
    candidates: Vec<Vec<MergeChoice>>,
    /// `suffix_max[p]` = most merged edges available from pairs `p..`.
    suffix_max: Vec<usize>,
    level: usize,
    current: Option<Vec<usize>>,
    max_configs: usize,
    yielded: usize,
    truncated: bool,
    done: bool,
}

impl ConfigEnumerator {
    pub fn new(routes: &[Route], windows: &[TimeWindows], max_configs: usize) -> Result<Self, GraphError> {
        let pairs = shared_pairs(routes)?;
        let candidates: Vec<Vec<MergeChoice>> = pairs
            .iter()
            .map(|p| {
                let mut c = candidate_merge_intervals(
                    p,
                    &windows[p.first as usize - 1],
                    &windows[p.second as usize - 1],
                );
                c.sort();
                c
            })
            .collect();
        let mut suffix_max = vec![0; candidates.len() + 1];
        for p in (0..candidates.len()).rev() {
            let best = candidates[p].iter().map(MergeChoice::merged_edges).max().unwrap_or(0);
            suffix_max[p] = suffix_max[p + 1] + best;
        }
        Ok(Self {
            routes: routes.to_vec(),
            pairs,
            candidates,
            suffix_max,
            level: 0,
            current: None,
            max_configs,
            yielded: 0,
            truncated: false,
            done: false,
        })
    }

    /// Whether enumeration stopped at `max_configs` with configurations left.
    pub fn truncated(&self) -> bool {
        self.truncated
    }

    pub fn yielded(&self) -> usize {
        self.yielded
    }

    pub fn pairs(&self) -> &[SharedPair] {
        &self.pairs
    }

    /// Fills positions `from..` with the smallest assignment summing to `remaining`.
    fn fill(&self, idx: &mut [usize], from: usize, remaining: usize) -> bool {
        if from == idx.len() {
            return remaining == 0;
        }
        for (c, choice) in self.candidates[from].iter().enumerate() {
            let len = choice.merged_edges();
            if len <= remaining && remaining - len <= self.suffix_max[from + 1] {
                idx[from] = c;
                if self.fill(idx, from + 1, remaining - len) {
                    return true;
                }
            }
        }
        false
    }

    fn prefix_sum(&self, idx: &[usize], upto: usize) -> usize {
        (0..upto).map(|p| self.candidates[p][idx[p]].merged_edges()).sum()
    }

    /// Next index combination in (level, lexicographic) order.
    fn advance(&mut self) -> Option<Vec<usize>> {
        let n = self.candidates.len();
        loop {
            if self.level > self.suffix_max[0] {
                return None;
            }
            let next = match self.current.take() {
                None => {
                    let mut idx = vec![0; n];
                    self.fill(&mut idx, 0, self.level).then_some(idx)
                }
                Some(mut idx) => {
                    let mut found = false;
                    for p in (0..n).rev() {
                        let before = self.prefix_sum(&idx, p);
                        if before > self.level {
                            continue;
                        }
                        let budget = self.level - before;
                        for c in idx[p] + 1..self.candidates[p].len() {
                            let len = self.candidates[p][c].merged_edges();
                            if len <= budget && budget - len <= self.suffix_max[p + 1] {
                                idx[p] = c;
                                if self.fill(&mut idx, p + 1, budget - len) {
                                    found = true;
                                    break;
                                }
                            }
                        }
                        if found {
                            break;
                        }
                    }
                    found.then_some(idx)
                }
            };
            match next {
                Some(idx) => {
                    self.current = Some(idx.clone());
                    return Some(idx);
                }
                None => {
                    self.level += 1;
                    self.current = None;
                }
            }
        }
    }

    fn next_valid(&mut self) -> Option<PlatoonConfiguration> {
        while let Some(idx) = self.advance() {
            let choices: Vec<MergeChoice> = idx
                .iter()
                .enumerate()
                .map(|(p, &c)| self.candidates[p][c])
                .collect();
            let composer = Composer::new(&self.routes, &self.pairs);
            if let Ok((cfg, implied)) = composer.compose(&choices) {
                if implied == choices {
                    return Some(cfg);
                }
            }
        }
        None
    }
}

impl Iterator for ConfigEnumerator {
    type Item = PlatoonConfiguration;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        if self.yielded >= self.max_configs {
            self.truncated = self.next_valid().is_some();
            self.done = true;
            return None;
        }
        match self.next_valid() {
            Some(cfg) => {
                self.yielded += 1;
                Some(cfg)
            }
            None => {
                self.done = true;
                None
            }
        }
    }
}

/// Convenience wrapper around [`ConfigEnumerator::new`].
pub fn enumerate_configurations(
    routes: &[Route],
    windows: &[TimeWindows],
    max_configs: usize,
) -> Result<ConfigEnumerator, GraphError> {
    ConfigEnumerator::new(routes, windows, max_configs)
}
