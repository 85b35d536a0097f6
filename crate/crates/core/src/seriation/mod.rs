//! Correlation-matrix seriation and clustering: simulated annealing over
//! row/column orderings, exact segmentation of the ordered matrix into
//! contiguous blocks, and consensus aggregation of repeated stochastic
//! runs.

mod anneal;
mod consensus;
mod segment;

pub use anneal::{anneal_ordering, AnnealingConfig};
pub use consensus::{consensus_cluster, AffinityMatrix, ConsensusConfig, ConsensusResult};
pub use segment::{segment_blocks, Partition};

use nalgebra::DMatrix;

use crate::correlation::CorrelationMatrix;
use crate::spectra::SpectralDecomposition;
use crate::{Error, Result};

/// A row/column ordering of the matrix and its placement cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Ordering {
    /// Position -> series index; a permutation of 0..N.
    pub perm: Vec<usize>,
    /// Σ_{i,j} C[perm(i)][perm(j)]·|i−j| over all ordered pairs.
    pub cost: f64,
}

/// Validate that `perm` is a permutation of 0..n.
pub(crate) fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(Error::InvalidParameter(format!(
            "permutation has length {}, expected {n}",
            perm.len()
        )));
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || seen[p] {
            return Err(Error::InvalidParameter(format!(
                "not a permutation of 0..{n}"
            )));
        }
        seen[p] = true;
    }
    Ok(())
}

/// Placement cost of an ordering: the double sum of C[perm(i)][perm(j)]·|i−j|
/// over all ordered pairs (i, j). Minimizing it drags large coefficients
/// toward the diagonal.
pub fn seriation_cost(c: &CorrelationMatrix, perm: &[usize]) -> Result<f64> {
    let n = c.n();
    check_permutation(perm, n)?;
    Ok(cost_unchecked(&c.c, perm))
}

pub(crate) fn cost_unchecked(c: &DMatrix<f64>, perm: &[usize]) -> f64 {
    let n = perm.len();
    let mut acc = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            acc += c[(perm[i], perm[j])] * (j - i) as f64;
        }
    }
    2.0 * acc
}

/// Chance-corrected agreement between two cluster assignments over the
/// same items. 1 = identical partitions, ~0 = what random assignment
/// would score. Returns 1 when the correction degenerates (both
/// partitions trivial).
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "assignments must cover the same items");
    let n = a.len();
    let comb2 = |x: usize| -> f64 { (x * x.saturating_sub(1)) as f64 / 2.0 };

    let mut cells: std::collections::BTreeMap<(usize, usize), usize> = Default::default();
    let mut rows: std::collections::BTreeMap<usize, usize> = Default::default();
    let mut cols: std::collections::BTreeMap<usize, usize> = Default::default();
    for (&x, &y) in a.iter().zip(b.iter()) {
        *cells.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = cells.values().map(|&v| comb2(v)).sum();
    let sum_rows: f64 = rows.values().map(|&v| comb2(v)).sum();
    let sum_cols: f64 = cols.values().map(|&v| comb2(v)).sum();
    let total = comb2(n);
    let expected = sum_rows * sum_cols / total;
    let max_index = 0.5 * (sum_rows + sum_cols);
    if (max_index - expected).abs() < 1e-15 {
        return 1.0;
    }
    (index - expected) / (max_index - expected)
}

/// Eigenvector components rearranged into cluster-contiguous order.
#[derive(Debug, Clone)]
pub struct ReorderedEigenvectors {
    /// Position -> series index (the partition's ordering).
    pub order: Vec<usize>,
    /// Start position of each cluster, in position order; first entry is 0.
    pub boundaries: Vec<usize>,
    /// Row p = eigenvector components of series order[p]; column k matches
    /// the spectrum's k-th eigenvector.
    pub components: DMatrix<f64>,
}

/// Permute eigenvector components so each cluster's members are adjacent,
/// and report where the cluster boundaries fall.
pub fn reorder_eigenvectors(
    d: &SpectralDecomposition,
    p: &Partition,
) -> Result<ReorderedEigenvectors> {
    let n = d.n();
    if p.assignment.len() != n {
        return Err(Error::InvalidParameter(format!(
            "partition covers {} series, spectrum has {n}",
            p.assignment.len()
        )));
    }
    check_permutation(&p.ordering.perm, n)?;
    let order = p.ordering.perm.clone();
    let mut boundaries = Vec::new();
    let mut prev_cluster = 0usize;
    for (pos, &series) in order.iter().enumerate() {
        let cluster = p.assignment[series];
        if pos == 0 || cluster != prev_cluster {
            boundaries.push(pos);
            prev_cluster = cluster;
        }
    }
    let components = DMatrix::from_fn(n, n, |pos, k| d.eigenvectors[(order[pos], k)]);
    Ok(ReorderedEigenvectors { order, boundaries, components })
}
