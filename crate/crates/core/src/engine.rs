//! Convergence-time distribution by iterative tree reduction.
//!
//! The network is first replaced by its shortest expected-delay spanning tree
//! rooted at the source. Every leaf then carries the delay distribution of
//! the link to its parent. Reduction repeatedly takes the deepest leaves,
//! groups them by parent and either
//!
//! * extends a lone leaf by its parent's uplink (unicast: convolution), or
//! * merges sibling leaves into one (broadcast: product of CDFs),
//!
//! until one final sum or max over the source's links yields the
//! distribution of the round in which the last node is informed.
//!
//! On trees the result is exact. On cyclic graphs the dropped links can only
//! speed up propagation, so the result is a stochastic upper bound.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::dist::{truncation_length, DelayDistribution, DistError};
use crate::graph::{FailureGraph, NodeId, ValidationError};
use crate::tree::{shortest_path_tree, CriticalPathSet, SpanningTree, TreeError};

pub const DEFAULT_EPS_TRUNC: f64 = 1e-6;
pub const DEFAULT_N_MAX_CAP: usize = 1 << 20;

/// Smallest truncation length tried by [`run_lifecd`].
const MIN_N_MAX: usize = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error("invalid engine configuration: {0}")]
    InvalidConfig(String),
    #[error("reduction bookkeeping out of sync: {0}")]
    InternalInvariantViolation(String),
    #[error("reduction has not reached a terminal shape")]
    NotTerminal,
    #[error("reduction already reached a terminal shape")]
    AlreadyTerminal,
    #[error("tail mass {tail:.3e} still above {eps:.3e} at the truncation cap {cap}")]
    TruncationExhausted { tail: f64, eps: f64, cap: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineConfig {
    /// Largest acceptable probability mass beyond the truncation length.
    pub eps_trunc: f64,
    /// Upper limit for the adaptive truncation length.
    pub n_max_cap: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            eps_trunc: DEFAULT_EPS_TRUNC,
            n_max_cap: DEFAULT_N_MAX_CAP,
        }
    }
}

impl EngineConfig {
    pub fn with_eps(eps_trunc: f64) -> Self {
        Self {
            eps_trunc,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<(), EngineError> {
        if !(self.eps_trunc > 0.0 && self.eps_trunc < 1.0) {
            return Err(EngineError::InvalidConfig(format!(
                "eps_trunc {} outside (0, 1)",
                self.eps_trunc
            )));
        }
        if self.n_max_cap == 0 {
            return Err(EngineError::InvalidConfig(
                "n_max_cap must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReductionOp {
    Unicast,
    Broadcast,
    FinalSum,
    FinalMax,
    /// A single leaf hanging directly off the source.
    FinalSingle,
    /// One-node network: consensus holds at round 0.
    Trivial,
}

impl ReductionOp {
    pub fn is_final(self) -> bool {
        !matches!(self, ReductionOp::Unicast | ReductionOp::Broadcast)
    }
}

/// One applied reduction, enough to replay it.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    /// 1-based reduction iteration; final steps carry the next number.
    pub iteration: usize,
    pub op: ReductionOp,
    /// Common parent of the consumed leaves.
    pub parent: Option<NodeId>,
    /// Leaves whose distributions were consumed, in increasing id order.
    pub children: Vec<NodeId>,
    /// Uplink `(parent(q), q, p)` whose geometric delay was added, for sums.
    pub link: Option<(NodeId, NodeId, f64)>,
    /// Length of the longest critical path when the step was applied.
    pub path_len: usize,
    /// Leaf that holds the result afterwards (`None` for final steps).
    pub result: Option<NodeId>,
}

impl fmt::Display for TraceStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let q = self.parent.map(|n| n.to_string()).unwrap_or_default();
        let inputs: Vec<String> = self
            .children
            .iter()
            .map(|c| format!("F_X({q},{c})"))
            .collect();
        let geom = |(a, b, p): (NodeId, NodeId, f64)| format!("Geom(p_{a}{b}={p})");
        match self.op {
            ReductionOp::Unicast => {
                let link = self.link.expect("unicast step records its uplink");
                write!(
                    f,
                    "step {}: unicast   l_max={}  F_X({},{}) <- sum({}, {})",
                    self.iteration,
                    self.path_len,
                    link.0,
                    link.1,
                    inputs.join(", "),
                    geom(link)
                )
            }
            ReductionOp::Broadcast => write!(
                f,
                "step {}: broadcast l_max={}  {} <- max({})",
                self.iteration,
                self.path_len,
                inputs[0],
                inputs.join(", ")
            ),
            ReductionOp::FinalSum => write!(
                f,
                "final:   sum       F_Z <- sum({}, {})",
                inputs.join(", "),
                geom(self.link.expect("final sum records its uplink"))
            ),
            ReductionOp::FinalMax => {
                write!(f, "final:   max       F_Z <- max({})", inputs.join(", "))
            }
            ReductionOp::FinalSingle => write!(f, "final:   single    F_Z <- {}", inputs[0]),
            ReductionOp::Trivial => write!(f, "final:   trivial   F_Z <- point mass at 0"),
        }
    }
}

/// Terminal shapes of the reduction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Terminal {
    /// One leaf two links below the source.
    Sum(NodeId),
    /// Every leaf is a direct neighbor of the source (two or more).
    Max,
    /// Exactly one leaf, directly below the source.
    Single(NodeId),
    /// No leaves at all: the source is the only node.
    Trivial,
}

/// Working set of a reduction in progress: the tree, the surviving leaves
/// and the delay distribution attached to each leaf's uplink.
#[derive(Debug, Clone)]
pub struct ReductionState {
    tree: SpanningTree,
    leaf_dists: BTreeMap<NodeId, DelayDistribution>,
    // children still attached in the contracted tree
    live_children: Vec<usize>,
    live_edges: usize,
    n_max: usize,
    iteration: usize,
}

impl ReductionState {
    /// Seeds every tree leaf with the geometric delay of its uplink.
    pub fn new(tree: SpanningTree, n_max: usize) -> Result<Self, EngineError> {
        let mut leaf_dists = BTreeMap::new();
        for leaf in tree.leaves() {
            let p = tree.link_prob(leaf).ok_or_else(|| {
                EngineError::InternalInvariantViolation(format!("leaf {leaf} has no uplink"))
            })?;
            leaf_dists.insert(leaf, DelayDistribution::geometric(p, n_max)?);
        }
        let live_children = tree.nodes().map(|v| tree.children(v).count()).collect();
        let live_edges = tree.node_count() - 1;
        Ok(Self {
            tree,
            leaf_dists,
            live_children,
            live_edges,
            n_max,
            iteration: 0,
        })
    }

    pub fn tree(&self) -> &SpanningTree {
        &self.tree
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Current leaves in increasing id order.
    pub fn leaves(&self) -> Vec<NodeId> {
        self.leaf_dists.keys().copied().collect()
    }

    pub fn leaf_dist(&self, leaf: NodeId) -> Option<&DelayDistribution> {
        self.leaf_dists.get(&leaf)
    }

    /// Links of the contracted tree.
    pub fn remaining_edges(&self) -> usize {
        self.live_edges
    }

    /// Root-to-leaf paths of the contracted tree.
    pub fn critical_paths(&self) -> CriticalPathSet {
        CriticalPathSet::from_paths(
            self.leaf_dists
                .keys()
                .map(|&l| self.tree.path_to(l))
                .collect(),
        )
    }

    fn longest(&self) -> usize {
        self.leaf_dists
            .keys()
            .map(|&l| self.tree.depth(l))
            .max()
            .unwrap_or(0)
    }

    /// The terminal shape, if reached.
    pub fn terminal(&self) -> Option<Terminal> {
        let leaves = self.leaves();
        match leaves.as_slice() {
            [] => Some(Terminal::Trivial),
            [only] => match self.tree.depth(*only) {
                1 => Some(Terminal::Single(*only)),
                2 => Some(Terminal::Sum(*only)),
                _ => None,
            },
            _ if leaves.iter().all(|&l| self.tree.depth(l) == 1) => Some(Terminal::Max),
            _ => None,
        }
    }

    fn violation(msg: String) -> EngineError {
        EngineError::InternalInvariantViolation(msg)
    }

    fn uplink(&self, node: NodeId) -> Result<(NodeId, NodeId, f64), EngineError> {
        match (self.tree.parent(node), self.tree.link_prob(node)) {
            (Some(up), Some(p)) => Ok((up, node, p)),
            _ => Err(Self::violation(format!("node {node} has no uplink"))),
        }
    }

    /// One pass over the deepest critical paths.
    pub fn reduce_once(&mut self) -> Result<Vec<TraceStep>, EngineError> {
        if self.terminal().is_some() {
            return Err(EngineError::AlreadyTerminal);
        }
        self.iteration += 1;
        let l_max = self.longest();
        let mut groups: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        for &leaf in self.leaf_dists.keys() {
            if self.tree.depth(leaf) == l_max {
                let q = self
                    .tree
                    .parent(leaf)
                    .ok_or_else(|| Self::violation(format!("leaf {leaf} has no parent")))?;
                groups.entry(q).or_default().push(leaf);
            }
        }

        let mut steps = Vec::with_capacity(groups.len());
        for (q, children) in groups {
            let attached = self.live_children[q.index()];
            if attached != children.len() {
                return Err(Self::violation(format!(
                    "node {q} has {attached} attached children but {} deepest leaves",
                    children.len()
                )));
            }
            if let [j] = children[..] {
                let link = self.uplink(q)?;
                let d = self.leaf_dists.remove(&j).expect("grouped leaves are live");
                let extended = d.sum(&DelayDistribution::geometric(link.2, self.n_max)?)?;
                self.leaf_dists.insert(q, extended);
                self.live_children[q.index()] = 0;
                self.live_edges -= 1;
                steps.push(TraceStep {
                    iteration: self.iteration,
                    op: ReductionOp::Unicast,
                    parent: Some(q),
                    children,
                    link: Some(link),
                    path_len: l_max,
                    result: Some(q),
                });
            } else {
                let merged = {
                    let ds: Vec<&DelayDistribution> =
                        children.iter().map(|c| &self.leaf_dists[c]).collect();
                    DelayDistribution::max_combine(&ds)?
                };
                for c in &children[1..] {
                    self.leaf_dists.remove(c);
                }
                self.leaf_dists.insert(children[0], merged);
                self.live_children[q.index()] = 1;
                self.live_edges -= children.len() - 1;
                steps.push(TraceStep {
                    iteration: self.iteration,
                    op: ReductionOp::Broadcast,
                    parent: Some(q),
                    result: Some(children[0]),
                    children,
                    link: None,
                    path_len: l_max,
                });
            }
        }
        Ok(steps)
    }

    /// Final sum or max once a terminal shape is reached.
    pub fn finalize(&self) -> Result<(DelayDistribution, TraceStep), EngineError> {
        let terminal = self.terminal().ok_or(EngineError::NotTerminal)?;
        let root = self.tree.root();
        let mut step = TraceStep {
            iteration: self.iteration + 1,
            op: ReductionOp::Trivial,
            parent: Some(root),
            children: self.leaves(),
            link: None,
            path_len: self.longest(),
            result: None,
        };
        let dist = match terminal {
            Terminal::Trivial => DelayDistribution::point_mass(0, self.n_max)?,
            Terminal::Single(leaf) => {
                step.op = ReductionOp::FinalSingle;
                self.leaf_dists[&leaf].clone()
            }
            Terminal::Sum(leaf) => {
                let q = self
                    .tree
                    .parent(leaf)
                    .ok_or_else(|| Self::violation(format!("leaf {leaf} has no parent")))?;
                let link = self.uplink(q)?;
                step.op = ReductionOp::FinalSum;
                step.parent = Some(q);
                step.link = Some(link);
                self.leaf_dists[&leaf].sum(&DelayDistribution::geometric(link.2, self.n_max)?)?
            }
            Terminal::Max => {
                step.op = ReductionOp::FinalMax;
                let ds: Vec<&DelayDistribution> = self.leaf_dists.values().collect();
                DelayDistribution::max_combine(&ds)?
            }
        };
        Ok((dist, step))
    }
}

/// Runs the full reduction on a fixed tree at a fixed truncation length.
pub fn reduce_tree(
    tree: &SpanningTree,
    n_max: usize,
) -> Result<(DelayDistribution, Vec<TraceStep>), EngineError> {
    let mut state = ReductionState::new(tree.clone(), n_max)?;
    let mut trace = Vec::new();
    while state.terminal().is_none() {
        if state.iteration >= tree.node_count() {
            return Err(EngineError::InternalInvariantViolation(
                "reduction did not terminate within n - 1 iterations".into(),
            ));
        }
        trace.extend(state.reduce_once()?);
    }
    let (dist, last) = state.finalize()?;
    trace.push(last);
    Ok((dist, trace))
}

/// Re-applies a recorded trace to the tree's initial leaf distributions.
pub fn replay_trace(
    tree: &SpanningTree,
    trace: &[TraceStep],
    n_max: usize,
) -> Result<DelayDistribution, EngineError> {
    let state = ReductionState::new(tree.clone(), n_max)?;
    let mut dists = state.leaf_dists;
    let missing = |c: &NodeId| {
        EngineError::InternalInvariantViolation(format!("trace consumes unknown leaf {c}"))
    };
    for step in trace {
        let inputs: Vec<DelayDistribution> = step
            .children
            .iter()
            .map(|c| dists.remove(c).ok_or_else(|| missing(c)))
            .collect::<Result<_, _>>()?;
        let refs: Vec<&DelayDistribution> = inputs.iter().collect();
        let uplink = |s: &TraceStep| -> Result<DelayDistribution, EngineError> {
            let (_, _, p) = s.link.ok_or_else(|| {
                EngineError::InternalInvariantViolation("sum without link".into())
            })?;
            Ok(DelayDistribution::geometric(p, n_max)?)
        };
        let out = match step.op {
            ReductionOp::Unicast | ReductionOp::FinalSum => {
                let [only] = refs[..] else {
                    return Err(EngineError::InternalInvariantViolation(
                        "sum step must consume one leaf".into(),
                    ));
                };
                only.sum(&uplink(step)?)?
            }
            ReductionOp::Broadcast | ReductionOp::FinalMax => {
                DelayDistribution::max_combine(&refs)?
            }
            ReductionOp::FinalSingle => inputs[0].clone(),
            ReductionOp::Trivial => DelayDistribution::point_mass(0, n_max)?,
        };
        match step.result {
            Some(key) => {
                dists.insert(key, out);
            }
            None => return Ok(out),
        }
    }
    Err(EngineError::NotTerminal)
}

/// Output of [`run_lifecd`].
#[derive(Debug, Clone)]
pub struct EngineReport {
    pub source: NodeId,
    pub tree: SpanningTree,
    pub distribution: DelayDistribution,
    pub expected_value: f64,
    /// `true` iff the input graph is a tree, in which case the distribution
    /// is exact up to truncation.
    pub exact: bool,
    pub reduction_trace: Vec<TraceStep>,
}

impl EngineReport {
    pub fn n_max(&self) -> usize {
        self.distribution.n_max()
    }

    pub fn tail_mass(&self) -> f64 {
        self.distribution.tail_mass()
    }
}

/// Starting truncation length for the adaptive search.
///
/// The Markov length `n / ((1 - p_max) eps)` always suffices but is very
/// loose, so the search starts at `4 * sum_e 1/(1 - p_e)` over tree links
/// (an upper bound on the tree's mean convergence time), rounded up to a
/// power of two, and only uses the Markov length when that is smaller.
pub fn initial_n_max(
    g: &FailureGraph,
    tree: &SpanningTree,
    cfg: &EngineConfig,
) -> Result<usize, EngineError> {
    let markov = truncation_length(
        g.node_count(),
        g.max_failure_prob(),
        cfg.eps_trunc,
        cfg.n_max_cap,
    )?;
    let mean_bound: f64 = tree.edges().map(|(_, _, p)| 1.0 / (1.0 - p)).sum();
    let heuristic = ((4.0 * mean_bound).ceil() as usize)
        .max(MIN_N_MAX)
        .next_power_of_two();
    Ok(heuristic.min(markov.n_max).min(cfg.n_max_cap))
}

/// Computes the convergence-time distribution for `source`, doubling the
/// truncation length until the tail mass is at most `cfg.eps_trunc`.
pub fn run_lifecd(
    g: &FailureGraph,
    source: NodeId,
    cfg: &EngineConfig,
) -> Result<EngineReport, EngineError> {
    cfg.validate()?;
    let tree = shortest_path_tree(g, source)?;
    let mut n_max = if g.node_count() == 1 {
        1
    } else {
        initial_n_max(g, &tree, cfg)?
    };
    loop {
        let (distribution, trace) = reduce_tree(&tree, n_max)?;
        if distribution.tail_mass() <= cfg.eps_trunc {
            return Ok(EngineReport {
                source,
                expected_value: distribution.expectation(),
                exact: g.is_acyclic(),
                reduction_trace: trace,
                tree,
                distribution,
            });
        }
        if n_max >= cfg.n_max_cap {
            return Err(EngineError::TruncationExhausted {
                tail: distribution.tail_mass(),
                eps: cfg.eps_trunc,
                cap: cfg.n_max_cap,
            });
        }
        n_max = (n_max * 2).min(cfg.n_max_cap);
    }
}

/// Same as [`run_lifecd`] at a fixed truncation length, regardless of the
/// resulting tail mass.
pub fn run_lifecd_fixed(
    g: &FailureGraph,
    source: NodeId,
    n_max: usize,
) -> Result<EngineReport, EngineError> {
    let tree = shortest_path_tree(g, source)?;
    let (distribution, trace) = reduce_tree(&tree, n_max)?;
    Ok(EngineReport {
        source,
        expected_value: distribution.expectation(),
        exact: g.is_acyclic(),
        reduction_trace: trace,
        tree,
        distribution,
    })
}

/// Asymptotic mean bound `e(source) / (1 - p_max)`, or `D / (1 - p_max)`
/// without a source.
pub fn golfar_bound(g: &FailureGraph, source: Option<NodeId>) -> Result<f64, ValidationError> {
    let hops = match source {
        Some(s) => g.eccentricity(s)?,
        None => g.diameter(),
    };
    Ok(hops as f64 / (1.0 - g.max_failure_prob()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::parse_graph;

    const FIG3B: &str = "1,2,0.05\n2,3,0.20\n2,4,0.20\n4,5,0.30\n";

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

    fn geo(p: f64, n: usize) -> DelayDistribution {
        DelayDistribution::geometric(p, n).unwrap()
    }

    #[test]
    fn fig3b_expected_value() {
        let g = parse_graph(FIG3B).unwrap();
        let r = run_lifecd(&g, NodeId(1), &EngineConfig::default()).unwrap();
        assert!(r.exact);
        assert!(
            (r.expected_value - 3.76223).abs() <= 1e-3,
            "{}",
            r.expected_value
        );
        assert!(r.tail_mass() <= 1e-6);
    }

    #[test]
    fn fig3b_walkthrough_steps() {
        let g = parse_graph(FIG3B).unwrap();
        let tree = shortest_path_tree(&g, NodeId(1)).unwrap();
        let n = 64;
        let mut state = ReductionState::new(tree, n).unwrap();
        assert_eq!(state.leaves(), vec![NodeId(3), NodeId(5)]);
        assert_eq!(state.remaining_edges(), 4);

        let steps = state.reduce_once().unwrap();
        assert_eq!(steps.len(), 1);
        assert_eq!(steps[0].op, ReductionOp::Unicast);
        assert_eq!(
            steps[0].link.map(|l| (l.0, l.1)),
            Some((NodeId(2), NodeId(4)))
        );
        assert_eq!(state.leaves(), vec![NodeId(3), NodeId(4)]);
        let expect_24 = geo(0.30, n).sum(&geo(0.20, n)).unwrap();
        assert_eq!(state.leaf_dist(NodeId(4)), Some(&expect_24));

        let steps = state.reduce_once().unwrap();
        assert_eq!(steps[0].op, ReductionOp::Broadcast);
        assert_eq!(steps[0].parent, Some(NodeId(2)));
        assert_eq!(state.leaves(), vec![NodeId(3)]);
        let expect_23 = DelayDistribution::max_combine(&[&geo(0.20, n), &expect_24]).unwrap();
        assert_eq!(state.leaf_dist(NodeId(3)), Some(&expect_23));
        assert_eq!(state.terminal(), Some(Terminal::Sum(NodeId(3))));
        assert!(matches!(
            state.reduce_once(),
            Err(EngineError::AlreadyTerminal)
        ));

        let (z, last) = state.finalize().unwrap();
        assert_eq!(last.op, ReductionOp::FinalSum);
        assert_eq!(z, expect_23.sum(&geo(0.05, n)).unwrap());
    }

    #[test]
    fn finalize_before_terminal_fails() {
        let g = parse_graph(FIG3B).unwrap();
        let state = ReductionState::new(shortest_path_tree(&g, NodeId(1)).unwrap(), 32).unwrap();
        assert!(matches!(state.finalize(), Err(EngineError::NotTerminal)));
    }

    #[test]
    fn single_link_is_geometric() {
        let g = parse_graph("1,2,0.5").unwrap();
        let r = run_lifecd(&g, NodeId(1), &EngineConfig::default()).unwrap();
        assert_eq!(r.distribution, geo(0.5, r.n_max()));
        assert_eq!(r.reduction_trace.len(), 1);
        assert_eq!(r.reduction_trace[0].op, ReductionOp::FinalSingle);
    }

    #[test]
    fn star_is_max_of_spokes() {
        let g = parse_graph("1,2,0.1\n1,3,0.4\n1,4,0.7").unwrap();
        let r = run_lifecd_fixed(&g, NodeId(1), 128).unwrap();
        let expect =
            DelayDistribution::max_combine(&[&geo(0.1, 128), &geo(0.4, 128), &geo(0.7, 128)])
                .unwrap();
        assert_eq!(r.distribution, expect);
        assert_eq!(r.reduction_trace.len(), 1);
        assert_eq!(r.reduction_trace[0].op, ReductionOp::FinalMax);
    }

    #[test]
    fn star_one_level_down_is_single_broadcast() {
        // Source 1 - hub 2 - three spokes: one broadcast, then the final sum.
        let g = parse_graph("1,2,0.1\n2,3,0.2\n2,4,0.3\n2,5,0.4").unwrap();
        let r = run_lifecd_fixed(&g, NodeId(1), 64).unwrap();
        let ops: Vec<ReductionOp> = r.reduction_trace.iter().map(|s| s.op).collect();
        assert_eq!(ops, vec![ReductionOp::Broadcast, ReductionOp::FinalSum]);
        assert_eq!(
            r.reduction_trace[0].children,
            vec![NodeId(3), NodeId(4), NodeId(5)]
        );
    }

    #[test]
    fn single_node_network() {
        let g = parse_graph("").unwrap();
        let r = run_lifecd(&g, NodeId(1), &EngineConfig::default()).unwrap();
        assert!(r.exact);
        assert_eq!(r.expected_value, 0.0);
        assert_eq!(r.distribution.pmf()[0], 1.0);
        assert_eq!(r.reduction_trace[0].op, ReductionOp::Trivial);
    }

    #[test]
    fn cyclic_plateau_and_flag() {
        let r = run_lifecd(&fig2a(0.60), NodeId(1), &EngineConfig::default()).unwrap();
        assert!(!r.exact);
        assert!((r.expected_value - 3.76).abs() <= 0.01);
    }

    #[test]
    fn trace_replays_bit_identically() {
        for g in [parse_graph(FIG3B).unwrap(), fig2a(0.1), fig2a(0.9)] {
            let r = run_lifecd(&g, NodeId(1), &EngineConfig::default()).unwrap();
            let replayed = replay_trace(&r.tree, &r.reduction_trace, r.n_max()).unwrap();
            assert_eq!(replayed, r.distribution);
        }
    }

    #[test]
    fn trace_display_mentions_operations() {
        let g = parse_graph(FIG3B).unwrap();
        let r = run_lifecd(&g, NodeId(1), &EngineConfig::default()).unwrap();
        let lines: Vec<String> = r.reduction_trace.iter().map(ToString::to_string).collect();
        assert!(lines[0].contains("unicast") && lines[0].contains("F_X(2,4)"));
        assert!(lines[1].contains("broadcast") && lines[1].contains("max(F_X(2,3), F_X(2,4))"));
        assert!(lines[2].contains("F_Z <- sum(F_X(2,3), Geom(p_12=0.05))"));
    }

    #[test]
    fn golfar_values() {
        let b = golfar_bound(&fig2a(0.9), Some(NodeId(1))).unwrap();
        assert!((b - 30.0).abs() < 1e-9);
        let g = parse_graph(FIG3B).unwrap();
        assert!((golfar_bound(&g, Some(NodeId(1))).unwrap() - 3.0 / 0.7).abs() < 1e-12);
        let reliable = parse_graph("1,2,0\n2,3,0\n3,4,0").unwrap();
        assert_eq!(golfar_bound(&reliable, None).unwrap(), 3.0);
        assert_eq!(golfar_bound(&reliable, Some(NodeId(2))).unwrap(), 2.0);
    }

    #[test]
    fn bad_config_and_source() {
        let g = parse_graph(FIG3B).unwrap();
        assert!(matches!(
            run_lifecd(&g, NodeId(1), &EngineConfig::with_eps(0.0)),
            Err(EngineError::InvalidConfig(_))
        ));
        assert!(run_lifecd(&g, NodeId(9), &EngineConfig::default()).is_err());
    }

    #[test]
    fn cap_too_small_is_reported() {
        let g = parse_graph("1,2,0.9\n2,3,0.9").unwrap();
        let cfg = EngineConfig {
            eps_trunc: 1e-9,
            n_max_cap: 20,
        };
        assert!(matches!(
            run_lifecd(&g, NodeId(1), &cfg),
            Err(EngineError::TruncationExhausted { cap: 20, .. })
        ));
    }

    #[test]
    fn reduction_progress_is_strict() {
        // A deeper, bushier tree.
        let g = parse_graph(
            "1,2,0.1\n1,3,0.2\n2,4,0.3\n2,5,0.1\n4,6,0.2\n4,7,0.4\n3,8,0.5\n8,9,0.1\n9,10,0.3\n",
        )
        .unwrap();
        let mut state =
            ReductionState::new(shortest_path_tree(&g, NodeId(1)).unwrap(), 64).unwrap();
        let mut measure = state.remaining_edges() + state.leaves().len();
        let mut iterations = 0;
        while state.terminal().is_none() {
            state.reduce_once().unwrap();
            let next = state.remaining_edges() + state.leaves().len();
            assert!(next < measure);
            measure = next;
            iterations += 1;
        }
        assert!(iterations < g.node_count());
        for path in state.critical_paths().paths() {
            assert_eq!(path[0], NodeId(1));
        }
    }
}
