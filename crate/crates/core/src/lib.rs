//! Convergence-time distributions for max-consensus over networks whose
//! links fail independently each round.
//!
//! The analytic engine reduces a shortest expected-delay spanning tree to the
//! distribution of the round at which every node holds the maximum. On
//! trees the result is exact (up to truncation); on graphs with cycles it is
//! a stochastic upper bound. [`oracle`] and [`sim`] provide exact and sampled
//! reference values.

pub mod dist;
pub mod engine;
pub mod export;
pub mod graph;
pub mod oracle;
pub mod sim;
pub mod tree;

pub use dist::{DelayDistribution, DistError};
pub use engine::{
    golfar_bound, run_lifecd, run_lifecd_fixed, EngineConfig, EngineError, EngineReport,
    ReductionOp, TraceStep,
};
pub use graph::{parse_graph, FailureGraph, GraphError, NodeId, ValidationError};
pub use oracle::{exact_distribution, sample_convergence, OracleError};
pub use sim::{monte_carlo, EmpiricalResult, SimError, SimMetadata};
pub use tree::{critical_paths, shortest_path_tree, SpanningTree};
