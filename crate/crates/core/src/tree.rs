//! Shortest expected-delay spanning trees and their critical paths.

use std::cmp::Ordering;

use thiserror::Error;

use crate::graph::{FailureGraph, NodeId, ValidationError};

/// Relative tolerance under which two path costs count as equal.
const COST_TIE_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TreeError {
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error("node {0} has no parent but is not the root")]
    Orphan(NodeId),
    #[error("parent link {child}-{parent} is not a link of the graph")]
    MissingLink { child: NodeId, parent: NodeId },
    #[error("following parents from node {0} never reaches the root")]
    Cycle(NodeId),
    #[error("parent map has {found} entries for a {expected}-node graph")]
    SizeMismatch { expected: usize, found: usize },
}

/// A spanning tree rooted at the source node, stored as a parent map.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanningTree {
    root: usize,
    parent: Vec<Option<usize>>,
    // failure probability of the link to the parent; 0 for the root
    prob: Vec<f64>,
    depth: Vec<usize>,
    children: Vec<Vec<usize>>,
}

impl SpanningTree {
    /// Builds a tree from an explicit parent map (`parents[i]` is the parent of
    /// node `i + 1`), checking it against `g`.
    pub fn from_parents(
        g: &FailureGraph,
        root: NodeId,
        parents: &[Option<NodeId>],
    ) -> Result<Self, TreeError> {
        g.check_node(root)?;
        let n = g.node_count();
        if parents.len() != n {
            return Err(TreeError::SizeMismatch {
                expected: n,
                found: parents.len(),
            });
        }
        let mut parent = vec![None; n];
        let mut prob = vec![0.0; n];
        for (i, p) in parents.iter().enumerate() {
            let node = NodeId::from_index(i);
            match (*p, i == root.index()) {
                (_, true) => {}
                (None, false) => return Err(TreeError::Orphan(node)),
                (Some(q), false) => {
                    g.check_node(q)?;
                    let pr = g.edge_prob(node, q).ok_or(TreeError::MissingLink {
                        child: node,
                        parent: q,
                    })?;
                    parent[i] = Some(q.index());
                    prob[i] = pr;
                }
            }
        }
        Self::assemble(root.index(), parent, prob)
    }

    fn assemble(
        root: usize,
        parent: Vec<Option<usize>>,
        prob: Vec<f64>,
    ) -> Result<Self, TreeError> {
        let n = parent.len();
        let mut depth = vec![usize::MAX; n];
        depth[root] = 0;
        for start in 0..n {
            let mut chain = Vec::new();
            let mut cur = start;
            while depth[cur] == usize::MAX {
                if chain.len() > n {
                    return Err(TreeError::Cycle(NodeId::from_index(start)));
                }
                chain.push(cur);
                cur = parent[cur].ok_or(TreeError::Orphan(NodeId::from_index(cur)))?;
            }
            let mut d = depth[cur];
            for &c in chain.iter().rev() {
                d += 1;
                depth[c] = d;
            }
        }
        let mut children = vec![Vec::new(); n];
        for (i, p) in parent.iter().enumerate() {
            if let Some(q) = p {
                children[*q].push(i);
            }
        }
        Ok(SpanningTree {
            root,
            parent,
            prob,
            depth,
            children,
        })
    }

    pub fn root(&self) -> NodeId {
        NodeId::from_index(self.root)
    }

    pub fn node_count(&self) -> usize {
        self.parent.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (1..=self.parent.len()).map(NodeId)
    }

    pub fn parent(&self, node: NodeId) -> Option<NodeId> {
        self.parent[node.index()].map(NodeId::from_index)
    }

    /// Failure probability of the link from `node` to its parent.
    pub fn link_prob(&self, node: NodeId) -> Option<f64> {
        self.parent[node.index()].map(|_| self.prob[node.index()])
    }

    /// Number of links between the root and `node`.
    pub fn depth(&self, node: NodeId) -> usize {
        self.depth[node.index()]
    }

    /// Children of `node`, in increasing id order.
    pub fn children(&self, node: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.children[node.index()]
            .iter()
            .map(|&c| NodeId::from_index(c))
    }

    /// Tree links as `(parent, child, p)`, ordered by child id.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId, f64)> + '_ {
        self.parent.iter().enumerate().filter_map(|(i, p)| {
            p.map(|q| (NodeId::from_index(q), NodeId::from_index(i), self.prob[i]))
        })
    }

    /// Node sequence from the root to `node`, inclusive.
    pub fn path_to(&self, node: NodeId) -> Vec<NodeId> {
        let mut path = vec![node];
        let mut cur = node.index();
        while let Some(q) = self.parent[cur] {
            path.push(NodeId::from_index(q));
            cur = q;
        }
        path.reverse();
        path
    }

    /// Sum of expected link delays `1/(1-p)` along the root-to-`node` path.
    pub fn expected_delay_to(&self, node: NodeId) -> f64 {
        let path = self.path_to(node);
        path.iter()
            .skip(1)
            .map(|&v| 1.0 / (1.0 - self.prob[v.index()]))
            .sum()
    }

    /// Tree leaves: non-root nodes without children.
    pub fn leaves(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.parent.len())
            .filter(move |&i| i != self.root && self.children[i].is_empty())
            .map(NodeId::from_index)
    }
}

fn costs_tie(a: f64, b: f64) -> bool {
    (a - b).abs() <= COST_TIE_RTOL * a.abs().max(b.abs())
}

/// Dijkstra's algorithm under expected-delay weights `1/(1-p)`.
///
/// Among equal-cost paths the one whose node sequence is lexicographically
/// smallest wins, so the result is fully determined by the input.
pub fn shortest_path_tree(g: &FailureGraph, source: NodeId) -> Result<SpanningTree, TreeError> {
    g.check_node(source)?;
    let n = g.node_count();
    let s = source.index();
    let mut cost = vec![f64::INFINITY; n];
    let mut path: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut parent = vec![None; n];
    let mut prob = vec![0.0; n];
    let mut settled = vec![false; n];
    cost[s] = 0.0;
    path[s] = vec![s];

    let better = |c_new: f64, p_new: &[usize], c_old: f64, p_old: &[usize]| -> bool {
        if c_old.is_infinite() {
            return true;
        }
        if costs_tie(c_new, c_old) {
            p_new.cmp(p_old) == Ordering::Less
        } else {
            c_new < c_old
        }
    };

    // Dense O(n^2) selection keeps the tie-break exact and simple.
    for _ in 0..n {
        let mut best: Option<usize> = None;
        for v in 0..n {
            if settled[v] || cost[v].is_infinite() {
                continue;
            }
            best = match best {
                Some(b) if !better(cost[v], &path[v], cost[b], &path[b]) => Some(b),
                _ => Some(v),
            };
        }
        let Some(u) = best else { break };
        settled[u] = true;
        for &(v, e) in &g.adjacency()[u] {
            if settled[v] {
                continue;
            }
            let p = g.edges()[e].p;
            let c = cost[u] + 1.0 / (1.0 - p);
            let mut candidate = path[u].clone();
            candidate.push(v);
            if better(c, &candidate, cost[v], &path[v]) {
                cost[v] = c;
                path[v] = candidate;
                parent[v] = Some(u);
                prob[v] = p;
            }
        }
    }
    SpanningTree::assemble(s, parent, prob)
}

/// Root-to-leaf paths of a spanning tree that are not a prefix of any other
/// root-to-node path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CriticalPathSet {
    paths: Vec<Vec<NodeId>>,
}

impl CriticalPathSet {
    pub(crate) fn from_paths(paths: Vec<Vec<NodeId>>) -> Self {
        Self { paths }
    }

    /// Paths ordered by their leaf id.
    pub fn paths(&self) -> &[Vec<NodeId>] {
        &self.paths
    }

    pub fn leaf_nodes(&self) -> Vec<NodeId> {
        self.paths
            .iter()
            .filter_map(|p| p.last().copied())
            .collect()
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// Largest number of links on any critical path.
    pub fn longest(&self) -> usize {
        self.paths.iter().map(|p| p.len() - 1).max().unwrap_or(0)
    }
}

/// `true` when `a` is a (not necessarily proper) prefix of `b`.
pub fn is_subpath(a: &[NodeId], b: &[NodeId]) -> bool {
    a.len() <= b.len() && b[..a.len()] == *a
}

/// Extracts the critical paths of `t`: one per leaf, ordered by leaf id.
pub fn critical_paths(t: &SpanningTree) -> CriticalPathSet {
    // A root-to-j path is a prefix of the root-to-k path iff j is an ancestor
    // of k, so the survivors are exactly the paths that end in leaves.
    CriticalPathSet {
        paths: t.leaves().map(|leaf| t.path_to(leaf)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::parse_graph;

    fn ids(v: &[usize]) -> Vec<NodeId> {
        v.iter().copied().map(NodeId).collect()
    }

    fn fig2a(p35: f64) -> FailureGraph {
        FailureGraph::new(
            5,
            [
                (1, 2, 0.05),
                (2, 3, 0.20),
                (2, 4, 0.20),
                (4, 5, 0.30),
                (3, 5, p35),
            ],
        )
        .unwrap()
    }

    #[test]
    fn cyclic_tree_follows_cheaper_branch() {
        let t = shortest_path_tree(&fig2a(0.60), NodeId(1)).unwrap();
        assert_eq!(t.parent(NodeId(5)), Some(NodeId(4)));
        assert_eq!(t.link_prob(NodeId(5)), Some(0.30));

        let t = shortest_path_tree(&fig2a(0.10), NodeId(1)).unwrap();
        assert_eq!(t.parent(NodeId(5)), Some(NodeId(3)));
        // Via 3: 1/0.95 + 1/0.8 + 1/0.9; via 4 would be 1/0.95 + 1/0.8 + 1/0.7.
        let via3 = 1.0 / 0.95 + 1.0 / 0.8 + 1.0 / 0.9;
        assert!((t.expected_delay_to(NodeId(5)) - via3).abs() < 1e-12);
    }

    #[test]
    fn equal_cost_prefers_lexicographically_smaller_path() {
        let t = shortest_path_tree(&fig2a(0.30), NodeId(1)).unwrap();
        assert_eq!(t.path_to(NodeId(5)), ids(&[1, 2, 3, 5]));
    }

    #[test]
    fn acyclic_input_is_its_own_tree() {
        let g = parse_graph("1,2,0.05\n2,3,0.20\n2,4,0.20\n4,5,0.30\n").unwrap();
        let t = shortest_path_tree(&g, NodeId(1)).unwrap();
        let mut tree_edges: Vec<(usize, usize)> = t
            .edges()
            .map(|(a, b, _)| (a.0.min(b.0), a.0.max(b.0)))
            .collect();
        tree_edges.sort();
        let graph_edges: Vec<(usize, usize)> = g.edges().iter().map(|e| (e.a.0, e.b.0)).collect();
        assert_eq!(tree_edges, graph_edges);
    }

    #[test]
    fn critical_paths_of_fig3b() {
        let g = parse_graph("1,2,0.05\n2,3,0.20\n2,4,0.20\n4,5,0.30\n").unwrap();
        let t = shortest_path_tree(&g, NodeId(1)).unwrap();
        let c = critical_paths(&t);
        assert_eq!(c.paths(), &[ids(&[1, 2, 3]), ids(&[1, 2, 4, 5])]);
        assert_eq!(c.leaf_nodes(), ids(&[3, 5]));
        assert_eq!(c.longest(), 3);
    }

    #[test]
    fn critical_paths_small_shapes() {
        let k2 = parse_graph("1,2,0.5").unwrap();
        let c = critical_paths(&shortest_path_tree(&k2, NodeId(1)).unwrap());
        assert_eq!(c.paths(), &[ids(&[1, 2])]);

        let star = parse_graph("1,2,0.1\n1,3,0.2\n1,4,0.3").unwrap();
        let c = critical_paths(&shortest_path_tree(&star, NodeId(1)).unwrap());
        assert_eq!(c.len(), 3);
        assert!(c.paths().iter().all(|p| p.len() == 2));

        // Rooted at a spoke, the center is internal and the other spokes are leaves.
        let c = critical_paths(&shortest_path_tree(&star, NodeId(2)).unwrap());
        assert_eq!(c.leaf_nodes(), ids(&[3, 4]));

        let single = parse_graph("").unwrap();
        assert!(critical_paths(&shortest_path_tree(&single, NodeId(1)).unwrap()).is_empty());
    }

    #[test]
    fn from_parents_validates() {
        let g = fig2a(0.6);
        let ok = SpanningTree::from_parents(
            &g,
            NodeId(1),
            &[
                None,
                Some(NodeId(1)),
                Some(NodeId(2)),
                Some(NodeId(2)),
                Some(NodeId(3)),
            ],
        )
        .unwrap();
        assert_eq!(ok.depth(NodeId(5)), 3);
        assert_eq!(ok.link_prob(NodeId(5)), Some(0.6));

        let missing = SpanningTree::from_parents(
            &g,
            NodeId(1),
            &[
                None,
                Some(NodeId(1)),
                Some(NodeId(2)),
                Some(NodeId(2)),
                Some(NodeId(1)),
            ],
        );
        assert!(matches!(missing, Err(TreeError::MissingLink { .. })));

        let cyc = SpanningTree::from_parents(
            &g,
            NodeId(1),
            &[
                None,
                Some(NodeId(3)),
                Some(NodeId(2)),
                Some(NodeId(2)),
                Some(NodeId(4)),
            ],
        );
        assert!(matches!(cyc, Err(TreeError::Cycle(_))));

        let orphan = SpanningTree::from_parents(&g, NodeId(1), &[None, None, None, None, None]);
        assert!(matches!(orphan, Err(TreeError::Orphan(_))));
    }

    #[test]
    fn subpath_relation() {
        assert!(is_subpath(&ids(&[1, 2]), &ids(&[1, 2, 4])));
        assert!(!is_subpath(&ids(&[1, 2, 3]), &ids(&[1, 2, 4, 5])));
        assert!(!is_subpath(&ids(&[1, 2, 4, 5]), &ids(&[1, 2, 4])));
    }
}
