//! Consensus clustering: aggregate many stochastic anneal+segment runs
//! into a co-assignment (affinity) matrix and re-cluster that matrix until
//! it stops changing.

use nalgebra::DMatrix;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::correlation::CorrelationMatrix;
use crate::{Error, Result};

use super::{anneal_ordering, segment_blocks, AnnealingConfig, Partition};

/// Co-assignment frequencies across repeated clustering runs.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    /// a[i][j] = fraction of runs assigning i and j to the same cluster;
    /// symmetric, unit diagonal, every entry a multiple of 1/n_runs.
    pub a: DMatrix<f64>,
    pub n_runs: usize,
}

/// Consensus parameters.
#[derive(Debug, Clone, Copy)]
pub struct ConsensusConfig {
    /// Anneal+segment runs aggregated per affinity matrix.
    pub n_runs: usize,
    /// Cap on re-clustering iterations before giving up on convergence.
    pub max_iterations: usize,
    /// Resolution parameter handed to the segmentation.
    pub gamma: f64,
}

impl Default for ConsensusConfig {
    fn default() -> Self {
        ConsensusConfig { n_runs: 200, max_iterations: 50, gamma: 1.0 }
    }
}

/// Outcome of consensus clustering.
#[derive(Debug, Clone)]
pub struct ConsensusResult {
    /// Final partition (from the converged affinity matrix).
    pub partition: Partition,
    /// First-level affinity matrix, built from the runs on the input.
    pub affinity: AffinityMatrix,
    /// False when the affinity matrix was still changing at the iteration
    /// cap; the partition returned is then the last one seen.
    pub converged: bool,
    /// Re-clustering iterations performed (not counting the first-level
    /// runs on the input matrix).
    pub iterations: usize,
}

/// Deterministic per-run seed: independent of thread scheduling, distinct
/// across (master seed, iteration, run) triples.
fn derive_seed(master: u64, iteration: u64, run: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream((iteration << 32) | run);
    rng.random()
}

/// Run anneal+segment `n_runs` times on `matrix` with derived seeds.
/// Runs execute in parallel; results are keyed by run index, so the
/// outcome is identical for any thread count.
fn run_batch(
    matrix: &CorrelationMatrix,
    cfg: &ConsensusConfig,
    schedule: &AnnealingConfig,
    master_seed: u64,
    iteration: u64,
) -> Result<Vec<Partition>> {
    (0..cfg.n_runs)
        .into_par_iter()
        .map(|run| {
            let seed = derive_seed(master_seed, iteration, run as u64);
            let ordering = anneal_ordering(matrix, schedule, seed);
            segment_blocks(matrix, &ordering, cfg.gamma)
        })
        .collect()
}

/// Integer co-assignment counts of a batch of partitions (the affinity
/// matrix numerators). Integer counts make the aggregation order-free and
/// the convergence comparison exact.
fn co_assignment_counts(partitions: &[Partition], n: usize) -> DMatrix<u32> {
    let mut counts = DMatrix::<u32>::zeros(n, n);
    for p in partitions {
        for i in 0..n {
            for j in 0..n {
                if p.assignment[i] == p.assignment[j] {
                    counts[(i, j)] += 1;
                }
            }
        }
    }
    counts
}

fn affinity_from_counts(counts: &DMatrix<u32>, n_runs: usize) -> AffinityMatrix {
    let a = counts.map(|k| k as f64 / n_runs as f64);
    AffinityMatrix { a, n_runs }
}

/// Cluster by consensus: run anneal+segment `cfg.n_runs` times on the
/// input, build the affinity matrix, then repeatedly re-cluster the
/// affinity matrix the same way until two consecutive affinity matrices
/// are identical (or `cfg.max_iterations` is hit, which sets
/// `converged = false`). The returned partition carries the ordering it
/// was cut from, so its clusters are contiguous under that ordering.
pub fn consensus_cluster(
    c: &CorrelationMatrix,
    cfg: &ConsensusConfig,
    schedule: &AnnealingConfig,
    seed: u64,
) -> Result<ConsensusResult> {
    if cfg.n_runs == 0 {
        return Err(Error::InvalidParameter("n_runs must be at least 1".into()));
    }
    let n = c.n();

    let first_batch = run_batch(c, cfg, schedule, seed, 0)?;
    let mut counts = co_assignment_counts(&first_batch, n);
    let first_level = affinity_from_counts(&counts, cfg.n_runs);

    let mut partition = first_batch.into_iter().next().expect("n_runs >= 1");
    let mut converged = false;
    let mut iterations = 0usize;

    for iteration in 1..=cfg.max_iterations {
        let similarity = CorrelationMatrix::from_similarity(
            c.labels.clone(),
            affinity_from_counts(&counts, cfg.n_runs).a,
            cfg.n_runs,
        );
        let batch = run_batch(&similarity, cfg, schedule, seed, iteration as u64)?;
        let next_counts = co_assignment_counts(&batch, n);
        partition = batch.into_iter().next().expect("n_runs >= 1");
        iterations = iteration;
        if next_counts == counts {
            converged = true;
            break;
        }
        counts = next_counts;
    }

    Ok(ConsensusResult { partition, affinity: first_level, converged, iterations })
}
