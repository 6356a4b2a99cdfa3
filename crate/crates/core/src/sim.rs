//! Monte Carlo estimates of the convergence time.
//!
//! Run `r` of a batch with master seed `s` draws from stream `r` of
//! `ChaCha8Rng::seed_from_u64(s)`, so results do not depend on how runs are
//! scheduled across threads.

use rand::RngCore;
use rayon::prelude::*;
use serde::Serialize;

use crate::dist::{DelayDistribution, DistError};
use crate::graph::{FailureGraph, NodeId, ValidationError};
use crate::oracle::{run_rng, simulate_informed, simulate_values};

/// Identifier recorded next to every simulated batch.
pub const GENERATOR_ID: &str = "chacha8/seed_from_u64(seed)/stream=run_index";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("at least one run is required")]
    NoRuns,
    #[error("initial values must have one entry per node ({expected}), got {found}")]
    ValueCount { expected: usize, found: usize },
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error(transparent)]
    Dist(#[from] DistError),
}

/// How each run evolves the protocol.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum SimMode {
    /// Track which nodes already hold the maximum.
    #[default]
    InformedSet,
    /// Track real-valued states from the given initial values (one per node).
    Values(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalResult {
    pub samples: Vec<usize>,
    pub seed: u64,
    pub distribution: DelayDistribution,
    pub sample_mean: f64,
    /// Sample standard deviation (Bessel-corrected; 0 for a single run).
    pub sample_std: f64,
}

impl EmpiricalResult {
    pub fn run_count(&self) -> usize {
        self.samples.len()
    }

    /// Standard error of the sample mean, `std / sqrt(R)`.
    pub fn std_error(&self) -> f64 {
        self.sample_std / (self.samples.len() as f64).sqrt()
    }

    pub fn metadata(&self) -> SimMetadata {
        SimMetadata {
            seed: self.seed,
            runs: self.samples.len(),
            generator_id: GENERATOR_ID.to_string(),
            mean: self.sample_mean,
            std: self.sample_std,
        }
    }

    fn from_samples(samples: Vec<usize>, seed: u64) -> Result<Self, SimError> {
        if samples.is_empty() {
            return Err(SimError::NoRuns);
        }
        let r = samples.len() as f64;
        let mean = samples.iter().map(|&s| s as f64).sum::<f64>() / r;
        let std = if samples.len() > 1 {
            let ss: f64 = samples.iter().map(|&s| (s as f64 - mean).powi(2)).sum();
            (ss / (r - 1.0)).sqrt()
        } else {
            0.0
        };
        Ok(Self {
            distribution: DelayDistribution::from_samples(&samples)?,
            samples,
            seed,
            sample_mean: mean,
            sample_std: std,
        })
    }
}

/// JSON sidecar written next to simulated distributions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimMetadata {
    pub seed: u64,
    pub runs: usize,
    pub generator_id: String,
    pub mean: f64,
    pub std: f64,
}

/// `runs` independent protocol runs from `source`.
pub fn monte_carlo(
    g: &FailureGraph,
    source: NodeId,
    runs: usize,
    seed: u64,
) -> Result<EmpiricalResult, SimError> {
    monte_carlo_with(g, source, runs, seed, &SimMode::InformedSet)
}

pub fn monte_carlo_with(
    g: &FailureGraph,
    source: NodeId,
    runs: usize,
    seed: u64,
    mode: &SimMode,
) -> Result<EmpiricalResult, SimError> {
    g.check_node(source)?;
    if runs == 0 {
        return Err(SimError::NoRuns);
    }
    let samples: Vec<usize> = match mode {
        SimMode::InformedSet => (0..runs as u64)
            .into_par_iter()
            .map(|r| simulate_informed(g, source, &mut run_rng(seed, r)))
            .collect(),
        SimMode::Values(initial) => {
            if initial.len() != g.node_count() {
                return Err(SimError::ValueCount {
                    expected: g.node_count(),
                    found: initial.len(),
                });
            }
            (0..runs as u64)
                .into_par_iter()
                .map(|r| simulate_values(g, initial, &mut run_rng(seed, r)))
                .collect()
        }
    };
    EmpiricalResult::from_samples(samples, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StudyPoint {
    pub runs: usize,
    pub mean: f64,
    pub std: f64,
    pub std_error: f64,
}

/// Sample mean and spread for each batch size in `run_counts`, each batch
/// on its own master seed derived from `seed`.
pub fn convergence_study(
    g: &FailureGraph,
    source: NodeId,
    run_counts: &[usize],
    seed: u64,
) -> Result<Vec<StudyPoint>, SimError> {
    if run_counts.is_empty() {
        return Err(SimError::NoRuns);
    }
    run_counts
        .iter()
        .zip(derive_seeds(seed, run_counts.len()))
        .map(|(&runs, sub)| {
            let batch = monte_carlo(g, source, runs, sub)?;
            Ok(StudyPoint {
                runs,
                mean: batch.sample_mean,
                std: batch.sample_std,
                std_error: batch.std_error(),
            })
        })
        .collect()
}

/// `count` independent master seeds drawn from a reserved stream of `seed`.
pub fn derive_seeds(seed: u64, count: usize) -> Vec<u64> {
    let mut rng = run_rng(seed, u64::MAX);
    (0..count).map(|_| rng.next_u64()).collect()
}

/// `sup_k |F_a(k) - F_b(k)|` over the union of both supports.
pub fn ks_distance(a: &DelayDistribution, b: &DelayDistribution) -> f64 {
    let n = a.n_max().max(b.n_max());
    (0..=n)
        .map(|k| (a.cdf_at(k) - b.cdf_at(k)).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::parse_graph;

    const FIG3B: &str = "1,2,0.05\n2,3,0.20\n2,4,0.20\n4,5,0.30\n";

    #[test]
    fn reliable_links_have_no_spread() {
        let g = parse_graph("1,2,0\n2,3,0\n2,4,0\n4,5,0\n").unwrap();
        let r = monte_carlo(&g, NodeId(1), 200, 3).unwrap();
        assert!(r.samples.iter().all(|&s| s == 3));
        assert_eq!(r.sample_std, 0.0);
        assert_eq!(r.distribution.pmf()[3], 1.0);
    }

    #[test]
    fn same_seed_same_result() {
        let g = parse_graph(FIG3B).unwrap();
        let a = monte_carlo(&g, NodeId(1), 500, 11).unwrap();
        let b = monte_carlo(&g, NodeId(1), 500, 11).unwrap();
        assert_eq!(a, b);
        let c = monte_carlo(&g, NodeId(1), 500, 12).unwrap();
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn first_run_matches_single_sample() {
        let g = parse_graph(FIG3B).unwrap();
        let r = monte_carlo(&g, NodeId(1), 3, 99).unwrap();
        assert_eq!(
            r.samples[0],
            crate::oracle::sample_convergence(&g, NodeId(1), 99).unwrap()
        );
    }

    #[test]
    fn statistics_are_consistent() {
        let g = parse_graph(FIG3B).unwrap();
        let r = monte_carlo(&g, NodeId(1), 1000, 5).unwrap();
        let mean = r.samples.iter().sum::<usize>() as f64 / 1000.0;
        assert!((r.sample_mean - mean).abs() < 1e-12);
        let max = *r.samples.iter().max().unwrap();
        assert_eq!(r.distribution.cdf()[max], 1.0);
        assert!(r.samples.iter().all(|&s| s >= 3));
        let meta = r.metadata();
        assert_eq!(meta.runs, 1000);
        assert_eq!(meta.generator_id, GENERATOR_ID);
    }

    #[test]
    fn single_run_study() {
        let g = parse_graph(FIG3B).unwrap();
        let pts = convergence_study(&g, NodeId(1), &[1], 0).unwrap();
        assert_eq!(pts[0].std, 0.0);
        assert_eq!(pts[0].runs, 1);
        assert!(convergence_study(&g, NodeId(1), &[], 0).is_err());
    }

    #[test]
    fn value_mode_agrees_with_informed_mode() {
        let g = parse_graph("1,2,0.3\n2,3,0.5\n1,3,0.6\n3,4,0.2").unwrap();
        let a = monte_carlo(&g, NodeId(2), 300, 8).unwrap();
        let b = monte_carlo_with(
            &g,
            NodeId(2),
            300,
            8,
            &SimMode::Values(vec![1.0, 9.0, -3.0, 0.5]),
        )
        .unwrap();
        assert_eq!(a.samples, b.samples);
        assert!(matches!(
            monte_carlo_with(&g, NodeId(2), 3, 8, &SimMode::Values(vec![1.0])),
            Err(SimError::ValueCount { .. })
        ));
    }

    #[test]
    fn errors() {
        let g = parse_graph(FIG3B).unwrap();
        assert_eq!(monte_carlo(&g, NodeId(1), 0, 0), Err(SimError::NoRuns));
        assert!(monte_carlo(&g, NodeId(6), 5, 0).is_err());
    }
}
