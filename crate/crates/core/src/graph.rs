//! Undirected communication graphs with per-link failure probabilities.
//!
//! Node ids are 1-based everywhere in the public API. Internally nodes are
//! stored 0-based; [`NodeId::index`] converts.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// A 1-based node identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

impl NodeId {
    /// 0-based index into internal arrays.
    #[inline]
    pub fn index(self) -> usize {
        self.0 - 1
    }

    #[inline]
    pub(crate) fn from_index(i: usize) -> Self {
        NodeId(i + 1)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for NodeId {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.trim().parse().map(NodeId)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("link {0}-{1}: failure probability {2} outside [0, 1)")]
    ProbabilityOutOfRange(NodeId, NodeId, f64),
    #[error("self-loop on node {0}")]
    SelfLoop(NodeId),
    #[error("node id {0} out of range 1..={1}")]
    NodeOutOfRange(usize, usize),
    #[error("link {a}-{b} listed twice with conflicting probabilities {first} and {second}")]
    ConflictingDuplicate {
        a: NodeId,
        b: NodeId,
        first: f64,
        second: f64,
    },
    #[error("graph is disconnected: node {0} is unreachable from node 1")]
    Disconnected(NodeId),
    #[error("graph must have at least one node")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error("no link {0}-{1} in graph")]
    UnknownEdge(NodeId, NodeId),
}

/// One undirected link, stored with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub a: NodeId,
    pub b: NodeId,
    /// Per-round failure probability, in `[0, 1)`.
    pub p: f64,
}

impl Edge {
    /// Expected number of rounds until the first successful transmission.
    pub fn expected_delay(&self) -> f64 {
        1.0 / (1.0 - self.p)
    }
}

/// A connected undirected graph whose links fail independently each round.
#[derive(Debug, Clone, PartialEq)]
pub struct FailureGraph {
    node_count: usize,
    edges: Vec<Edge>,
    // adjacency[i] holds (neighbor index, edge index), sorted by neighbor.
    adjacency: Vec<Vec<(usize, usize)>>,
}

fn normalize(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl FailureGraph {
    /// Builds and validates a graph on nodes `1..=node_count`.
    ///
    /// Repeating a link with the same probability (in either orientation) is
    /// accepted; repeating it with a different probability is rejected.
    pub fn new<I>(node_count: usize, links: I) -> Result<Self, ValidationError>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        if node_count == 0 {
            return Err(ValidationError::Empty);
        }
        let mut unique: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (a, b, p) in links {
            for id in [a, b] {
                if id == 0 || id > node_count {
                    return Err(ValidationError::NodeOutOfRange(id, node_count));
                }
            }
            if a == b {
                return Err(ValidationError::SelfLoop(NodeId(a)));
            }
            if !(0.0..1.0).contains(&p) {
                return Err(ValidationError::ProbabilityOutOfRange(
                    NodeId(a),
                    NodeId(b),
                    p,
                ));
            }
            let key = normalize(a, b);
            match unique.get(&key) {
                Some(&first) if first != p => {
                    return Err(ValidationError::ConflictingDuplicate {
                        a: NodeId(key.0),
                        b: NodeId(key.1),
                        first,
                        second: p,
                    })
                }
                Some(_) => {}
                None => {
                    unique.insert(key, p);
                }
            }
        }

        let edges: Vec<Edge> = unique
            .into_iter()
            .map(|((a, b), p)| Edge {
                a: NodeId(a),
                b: NodeId(b),
                p,
            })
            .collect();
        let mut adjacency = vec![Vec::new(); node_count];
        for (e, edge) in edges.iter().enumerate() {
            adjacency[edge.a.index()].push((edge.b.index(), e));
            adjacency[edge.b.index()].push((edge.a.index(), e));
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }

        let graph = FailureGraph {
            node_count,
            edges,
            adjacency,
        };
        let dist = graph.hop_distances_from(0);
        if let Some(i) = dist.iter().position(Option::is_none) {
            return Err(ValidationError::Disconnected(NodeId::from_index(i)));
        }
        Ok(graph)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Links sorted by `(a, b)` with `a < b`.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (1..=self.node_count).map(NodeId)
    }

    pub fn contains(&self, node: NodeId) -> bool {
        (1..=self.node_count).contains(&node.0)
    }

    pub(crate) fn check_node(&self, node: NodeId) -> Result<(), ValidationError> {
        if self.contains(node) {
            Ok(())
        } else {
            Err(ValidationError::NodeOutOfRange(node.0, self.node_count))
        }
    }

    /// Neighbors of `node` with the failure probability of the connecting link.
    pub fn neighbors(&self, node: NodeId) -> impl Iterator<Item = (NodeId, f64)> + '_ {
        self.adjacency[node.index()]
            .iter()
            .map(|&(j, e)| (NodeId::from_index(j), self.edges[e].p))
    }

    pub(crate) fn adjacency(&self) -> &[Vec<(usize, usize)>] {
        &self.adjacency
    }

    /// Failure probability of link `{a, b}`, if present.
    pub fn edge_prob(&self, a: NodeId, b: NodeId) -> Option<f64> {
        if !self.contains(a) || !self.contains(b) {
            return None;
        }
        let list = &self.adjacency[a.index()];
        list.binary_search_by_key(&b.index(), |&(j, _)| j)
            .ok()
            .map(|pos| self.edges[list[pos].1].p)
    }

    /// Returns a copy with the probability of link `{a, b}` replaced.
    pub fn with_edge_prob(&self, a: NodeId, b: NodeId, p: f64) -> Result<Self, GraphError> {
        if self.edge_prob(a, b).is_none() {
            return Err(GraphError::UnknownEdge(a, b));
        }
        if !(0.0..1.0).contains(&p) {
            return Err(ValidationError::ProbabilityOutOfRange(a, b, p).into());
        }
        let key = normalize(a.0, b.0);
        let mut g = self.clone();
        for edge in &mut g.edges {
            if (edge.a.0, edge.b.0) == key {
                edge.p = p;
            }
        }
        Ok(g)
    }

    /// Largest link failure probability, or 0 for an edgeless graph.
    pub fn max_failure_prob(&self) -> f64 {
        self.edges.iter().map(|e| e.p).fold(0.0, f64::max)
    }

    /// A connected graph is a tree exactly when it has `n - 1` links.
    pub fn is_acyclic(&self) -> bool {
        self.edges.len() + 1 == self.node_count
    }

    fn hop_distances_from(&self, start: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.node_count];
        let mut queue = VecDeque::from([start]);
        dist[start] = Some(0);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap_or_default();
            for &(v, _) in &self.adjacency[u] {
                if dist[v].is_none() {
                    dist[v] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Hop-count distance from `source` to every node (index = 0-based node).
    pub fn hop_distances(&self, source: NodeId) -> Result<Vec<usize>, ValidationError> {
        self.check_node(source)?;
        Ok(self
            .hop_distances_from(source.index())
            .into_iter()
            .map(|d| d.unwrap_or_default())
            .collect())
    }

    /// Maximum hop distance from `node` to any other node.
    pub fn eccentricity(&self, node: NodeId) -> Result<usize, ValidationError> {
        Ok(self
            .hop_distances(node)?
            .into_iter()
            .max()
            .unwrap_or_default())
    }

    /// Maximum eccentricity over all nodes.
    pub fn diameter(&self) -> usize {
        (0..self.node_count)
            .filter_map(|i| self.hop_distances_from(i).into_iter().flatten().max())
            .max()
            .unwrap_or_default()
    }
}

/// Parses an edge-list document: one `i,j,p` link per line, `#` comments and
/// blank lines ignored.
///
/// The node count is the largest id mentioned. A document without any links
/// describes the single-node network.
pub fn parse_graph(text: &str) -> Result<FailureGraph, GraphError> {
    let mut links = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| GraphError::Parse {
            line: lineno + 1,
            message,
        };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(parse_err(format!(
                "expected `i,j,p`, found {} field(s)",
                fields.len()
            )));
        }
        let a: usize = fields[0]
            .parse()
            .map_err(|_| parse_err(format!("invalid node id `{}`", fields[0])))?;
        let b: usize = fields[1]
            .parse()
            .map_err(|_| parse_err(format!("invalid node id `{}`", fields[1])))?;
        let p: f64 = fields[2]
            .parse()
            .map_err(|_| parse_err(format!("invalid probability `{}`", fields[2])))?;
        if !p.is_finite() {
            return Err(parse_err(format!("invalid probability `{}`", fields[2])));
        }
        links.push((a, b, p));
    }
    let node_count = links.iter().map(|&(a, b, _)| a.max(b)).max().unwrap_or(1);
    Ok(FailureGraph::new(node_count, links)?)
}

/// Writes a graph back out in the edge-list format accepted by [`parse_graph`].
pub fn format_graph(g: &FailureGraph) -> String {
    g.edges()
        .iter()
        .map(|e| format!("{},{},{}\n", e.a, e.b, e.p))
        .collect()
}
