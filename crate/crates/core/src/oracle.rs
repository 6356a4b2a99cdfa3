//! Ground truth for small networks.
//!
//! With a unique maximum held by the source, the nodes holding the maximum
//! after `t` rounds are exactly the nodes informed by round `t`. This module
//! evolves the full distribution over informed sets (a Markov chain on
//! `2^n` states absorbing at the full set) and also samples single runs of
//! the protocol.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dist::{DelayDistribution, DistError};
use crate::graph::{FailureGraph, NodeId, ValidationError};

/// Largest network accepted by [`exact_distribution`].
pub const MAX_ORACLE_NODES: usize = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("exact oracle supports at most {MAX_ORACLE_NODES} nodes, graph has {0}")]
    TooLarge(usize),
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error(transparent)]
    Dist(#[from] DistError),
}

/// Exact distribution of the first round at which every node is informed,
/// on rounds `0..=horizon`.
///
/// Each round, every link between an informed node `i` and an uninformed node
/// `j` succeeds independently with probability `1 - p_ij`; `j` becomes
/// informed when any of those links succeeds, so it stays uninformed with
/// probability `prod_i p_ij`.
pub fn exact_distribution(
    g: &FailureGraph,
    source: NodeId,
    horizon: usize,
) -> Result<DelayDistribution, OracleError> {
    let n = g.node_count();
    if n > MAX_ORACLE_NODES {
        return Err(OracleError::TooLarge(n));
    }
    if horizon == 0 {
        return Err(OracleError::ZeroHorizon);
    }
    g.check_node(source)?;

    let full: usize = (1 << n) - 1;
    let mut probs = vec![0.0f64; 1 << n];
    probs[1 << source.index()] = 1.0;
    let mut cdf = Vec::with_capacity(horizon + 1);
    cdf.push(probs[full]);

    let adjacency = g.adjacency();
    let edges = g.edges();
    let mut next = vec![0.0f64; 1 << n];
    // Per frontier node: probability of staying uninformed this round.
    let mut stay = vec![0.0f64; n];
    let mut frontier_nodes = Vec::with_capacity(n);

    for _ in 0..horizon {
        next.iter_mut().for_each(|x| *x = 0.0);
        next[full] = probs[full];
        for (state, &mass) in probs.iter().enumerate() {
            if mass == 0.0 || state == full {
                continue;
            }
            frontier_nodes.clear();
            for j in 0..n {
                if state & (1 << j) != 0 {
                    continue;
                }
                let mut q = 1.0;
                let mut reachable = false;
                for &(i, e) in &adjacency[j] {
                    if state & (1 << i) != 0 {
                        q *= edges[e].p;
                        reachable = true;
                    }
                }
                if reachable {
                    stay[j] = q;
                    frontier_nodes.push(j);
                }
            }
            // Enumerate which frontier nodes get informed this round.
            let k = frontier_nodes.len();
            for pick in 0..(1usize << k) {
                let mut pr = mass;
                let mut gained = 0usize;
                for (b, &j) in frontier_nodes.iter().enumerate() {
                    if pick & (1 << b) != 0 {
                        pr *= 1.0 - stay[j];
                        gained |= 1 << j;
                    } else {
                        pr *= stay[j];
                    }
                    if pr == 0.0 {
                        break;
                    }
                }
                if pr != 0.0 {
                    next[state | gained] += pr;
                }
            }
        }
        std::mem::swap(&mut probs, &mut next);
        cdf.push(probs[full]);
    }
    // The absorbed mass is monotone in exact arithmetic; clamp rounding noise.
    for k in 1..cdf.len() {
        if cdf[k] < cdf[k - 1] {
            cdf[k] = cdf[k - 1];
        }
        cdf[k] = cdf[k].min(1.0);
    }
    Ok(DelayDistribution::from_cdf(cdf)?)
}

/// Seeds a run's generator: the run uses stream `stream` of the ChaCha8
/// generator keyed by `seed_from_u64(seed)`.
pub fn run_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws one round's link states: `up[e]` is true when link `e` delivers.
///
/// Every link is drawn every round, in link order, so the informed-set and
/// value-level simulators consume identical random streams.
fn draw_links<R: Rng>(g: &FailureGraph, rng: &mut R, up: &mut [bool]) {
    for (flag, edge) in up.iter_mut().zip(g.edges()) {
        *flag = rng.random::<f64>() >= edge.p;
    }
}

/// Simulates informed-set growth until every node holds the maximum and
/// returns the number of rounds taken.
pub fn simulate_informed<R: Rng>(g: &FailureGraph, source: NodeId, rng: &mut R) -> usize {
    let n = g.node_count();
    let mut informed = vec![false; n];
    informed[source.index()] = true;
    let mut count = 1;
    let mut up = vec![false; g.edge_count()];
    let mut newly = Vec::with_capacity(n);
    let mut rounds = 0;
    while count < n {
        rounds += 1;
        draw_links(g, rng, &mut up);
        newly.clear();
        for (e, edge) in g.edges().iter().enumerate() {
            if !up[e] {
                continue;
            }
            let (a, b) = (edge.a.index(), edge.b.index());
            if informed[a] != informed[b] {
                newly.push(if informed[a] { b } else { a });
            }
        }
        for &j in &newly {
            if !informed[j] {
                informed[j] = true;
                count += 1;
            }
        }
    }
    rounds
}

/// Literal max-consensus: every node replaces its value by the maximum over
/// itself and the neighbors whose links delivered this round. Returns the
/// first round at which all values agree.
pub fn simulate_values<R: Rng>(g: &FailureGraph, initial: &[f64], rng: &mut R) -> usize {
    let target = initial.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut x = initial.to_vec();
    let mut up = vec![false; g.edge_count()];
    let mut rounds = 0;
    while x.iter().any(|&v| v != target) {
        rounds += 1;
        draw_links(g, rng, &mut up);
        let prev = x.clone();
        for (e, edge) in g.edges().iter().enumerate() {
            if up[e] {
                let (a, b) = (edge.a.index(), edge.b.index());
                x[a] = x[a].max(prev[b]);
                x[b] = x[b].max(prev[a]);
            }
        }
    }
    rounds
}

/// One realized convergence time for `source`, reproducible from `rng_seed`.
pub fn sample_convergence(
    g: &FailureGraph,
    source: NodeId,
    rng_seed: u64,
) -> Result<usize, ValidationError> {
    g.check_node(source)?;
    Ok(simulate_informed(g, source, &mut run_rng(rng_seed, 0)))
}
