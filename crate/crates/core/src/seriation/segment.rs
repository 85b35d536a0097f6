//! Exact segmentation of an ordered correlation matrix into contiguous
//! blocks by dynamic programming.

use nalgebra::DMatrix;

use crate::correlation::{mean_offdiagonal, CorrelationMatrix};
use crate::{Error, Result};

use super::{check_permutation, Ordering};

/// Assignment of every series to one of K clusters. Clusters are
/// contiguous runs of positions under `ordering` and are numbered 1..=K
/// left to right.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    /// Series index -> cluster id in 1..=k.
    pub assignment: Vec<usize>,
    /// The ordering the blocks were cut from.
    pub ordering: Ordering,
    pub k: usize,
    /// Value of the segmentation objective at the optimum.
    pub score: f64,
}

impl Partition {
    /// Cluster sizes in cluster-id order.
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.k];
        for &cl in &self.assignment {
            sizes[cl - 1] += 1;
        }
        sizes
    }
}

/// Tolerance for score/mass ties in the tie-breaking comparator. Exact
/// ties arise from constructed inputs (equicorrelated, all-zero, 0/1
/// affinity matrices) where float noise of order 1e-16 would otherwise
/// pick sides arbitrarily.
const TIE_EPS: f64 = 1e-9;

/// A candidate segmentation of a prefix, carrying everything the
/// tie-breaking order needs.
#[derive(Debug, Clone)]
struct Candidate {
    /// Objective: Σ_blocks (off-diagonal mass − gamma·⟨c⟩·m(m−1)).
    score: f64,
    /// Σ_blocks off-diagonal mass; first tie-break (prefers merging
    /// equal-score blocks, e.g. the equicorrelated matrix).
    mass: f64,
    /// Block count; second tie-break, preferring more blocks (splits
    /// all-zero matrices into singletons).
    blocks: usize,
    /// Start position of every block, increasing; final tie-break is
    /// lexicographic on this sequence.
    starts: Vec<usize>,
}

/// True when `a` beats `b` under the lexicographic objective
/// (score, mass, block count, lexicographically smallest starts); the
/// float levels use a small tolerance so constructed exact ties fall
/// through to the discrete levels.
fn better(a: &Candidate, b: &Candidate) -> bool {
    if a.score > b.score + TIE_EPS {
        return true;
    }
    if a.score < b.score - TIE_EPS {
        return false;
    }
    if a.mass > b.mass + TIE_EPS {
        return true;
    }
    if a.mass < b.mass - TIE_EPS {
        return false;
    }
    if a.blocks != b.blocks {
        return a.blocks > b.blocks;
    }
    a.starts < b.starts
}

/// Cut the ordered matrix into contiguous blocks maximizing
/// Σ_blocks [ Σ_{i≠j∈block} C'_ij − gamma·⟨c⟩·m(m−1) ], where C' is the
/// matrix permuted by `ordering`, m is the block size and ⟨c⟩ the mean
/// off-diagonal coefficient. Solved exactly by dynamic programming over
/// block boundaries; ties broken deterministically (largest intra-block
/// mass, then most blocks, then lexicographically smallest block starts).
pub fn segment_blocks(
    c: &CorrelationMatrix,
    ordering: &Ordering,
    gamma: f64,
) -> Result<Partition> {
    let n = c.n();
    check_permutation(&ordering.perm, n)?;
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    let cbar = mean_offdiagonal(c);
    let perm = &ordering.perm;

    // 2-D prefix sums of the permuted matrix: pre[(i, j)] = sum of
    // C'[0..i, 0..j].
    let mut pre: DMatrix<f64> = DMatrix::zeros(n + 1, n + 1);
    for i in 0..n {
        let mut row_acc = 0.0;
        for j in 0..n {
            row_acc += c.c[(perm[i], perm[j])];
            pre[(i + 1, j + 1)] = pre[(i, j + 1)] + row_acc;
        }
    }
    // Off-diagonal mass of the block spanning positions [i, j).
    let block_mass = |i: usize, j: usize| -> f64 {
        let total = pre[(j, j)] - pre[(i, j)] - pre[(j, i)] + pre[(i, i)];
        total - (j - i) as f64 // unit diagonal
    };

    let mut best: Vec<Candidate> = Vec::with_capacity(n + 1);
    best.push(Candidate { score: 0.0, mass: 0.0, blocks: 0, starts: Vec::new() });
    for j in 1..=n {
        let mut winner: Option<Candidate> = None;
        for i in 0..j {
            let m = (j - i) as f64;
            let mass = block_mass(i, j);
            let score = mass - gamma * cbar * m * (m - 1.0);
            let prev = &best[i];
            let mut starts = prev.starts.clone();
            starts.push(i);
            let cand = Candidate {
                score: prev.score + score,
                mass: prev.mass + mass,
                blocks: prev.blocks + 1,
                starts,
            };
            match &winner {
                Some(w) if !better(&cand, w) => {}
                _ => winner = Some(cand),
            }
        }
        best.push(winner.expect("at least one candidate per prefix"));
    }

    let optimum = best.pop().expect("dp table is non-empty");
    let k = optimum.blocks;
    let mut assignment = vec![0usize; n];
    for (block_idx, window) in optimum
        .starts
        .iter()
        .copied()
        .chain(std::iter::once(n))
        .collect::<Vec<_>>()
        .windows(2)
        .enumerate()
    {
        for pos in window[0]..window[1] {
            assignment[perm[pos]] = block_idx + 1;
        }
    }

    Ok(Partition {
        assignment,
        ordering: ordering.clone(),
        k,
        score: optimum.score,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seriation::seriation_cost;
    use nalgebra::DMatrix;
    use panelcorr_testutil::brute_force_segmentation;

    fn corr_from(m: DMatrix<f64>, t: usize) -> CorrelationMatrix {
        let labels = (0..m.nrows()).map(|i| format!("s{i}")).collect();
        CorrelationMatrix { labels, c: m, t_effective: t }
    }

    fn identity_ordering(c: &CorrelationMatrix) -> Ordering {
        let perm: Vec<usize> = (0..c.n()).collect();
        let cost = seriation_cost(c, &perm).unwrap();
        Ordering { perm, cost }
    }

    fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
        (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
            .collect()
    }

    #[test]
    fn two_planted_blocks_split_exactly() {
        let mut m = DMatrix::identity(4, 4);
        for (i, j) in [(0, 1), (2, 3)] {
            m[(i, j)] = 0.9;
            m[(j, i)] = 0.9;
        }
        let c = corr_from(m, 10);
        let p = segment_blocks(&c, &identity_ordering(&c), 1.0).unwrap();
        assert_eq!(p.assignment, vec![1, 1, 2, 2]);
        assert_eq!(p.k, 2);
        let (oracle_starts, oracle_score) = brute_force_segmentation(&to_rows(&c.c), 1.0);
        assert_eq!(oracle_starts, vec![0, 2]);
        assert!((p.score - oracle_score).abs() < 1e-9);
    }

    #[test]
    fn equicorrelated_matrix_stays_one_cluster() {
        let n = 6;
        let mut m = DMatrix::from_element(n, n, 0.57);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        let c = corr_from(m, 10);
        let p = segment_blocks(&c, &identity_ordering(&c), 1.0).unwrap();
        assert_eq!(p.k, 1);
        assert!(p.assignment.iter().all(|&a| a == 1));
    }

    #[test]
    fn zero_offdiagonal_matrix_splits_into_singletons() {
        let n = 5;
        let c = corr_from(DMatrix::identity(n, n), 10);
        let p = segment_blocks(&c, &identity_ordering(&c), 1.0).unwrap();
        assert_eq!(p.k, n);
        assert_eq!(p.assignment, vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn dp_matches_exhaustive_enumeration_on_random_matrices() {
        use rand::prelude::*;
        for seed in 0..8u64 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(500 + seed);
            let n = 3 + (seed as usize % 7); // up to 9 here; acceptance goes to 12
            let mut m = DMatrix::identity(n, n);
            for i in 0..n {
                for j in (i + 1)..n {
                    let v = rng.random::<f64>() * 2.0 - 1.0;
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
            let c = corr_from(m, 10);
            let p = segment_blocks(&c, &identity_ordering(&c), 1.0).unwrap();
            let (oracle_starts, oracle_score) = brute_force_segmentation(&to_rows(&c.c), 1.0);
            let mut starts = Vec::new();
            let mut prev = 0;
            for (pos, &series) in p.ordering.perm.iter().enumerate() {
                if pos == 0 || p.assignment[series] != prev {
                    starts.push(pos);
                    prev = p.assignment[series];
                }
            }
            assert_eq!(starts, oracle_starts, "seed {seed}");
            assert!((p.score - oracle_score).abs() < 1e-9, "seed {seed}");
        }
    }

    #[test]
    fn segmentation_follows_the_given_ordering() {
        // Blocks {0,3} and {1,2} are only contiguous under this ordering.
        let mut m = DMatrix::identity(4, 4);
        for (i, j) in [(0, 3), (1, 2)] {
            m[(i, j)] = 0.9;
            m[(j, i)] = 0.9;
        }
        let c = corr_from(m, 10);
        let perm = vec![0, 3, 1, 2];
        let cost = seriation_cost(&c, &perm).unwrap();
        let p = segment_blocks(&c, &Ordering { perm, cost }, 1.0).unwrap();
        assert_eq!(p.k, 2);
        assert_eq!(p.assignment, vec![1, 2, 2, 1]);
    }

    #[test]
    fn gamma_must_be_positive() {
        let c = corr_from(DMatrix::identity(3, 3), 10);
        assert!(segment_blocks(&c, &identity_ordering(&c), 0.0).is_err());
    }
}
