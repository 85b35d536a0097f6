//! Cross-correlation matrix of standardized returns and the empirical
//! distribution of its off-diagonal coefficients.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::ingest::ReturnPanel;
use crate::{Error, Result};

/// Symmetric correlation matrix with unit diagonal.
#[derive(Debug, Clone)]
pub struct CorrelationMatrix {
    pub labels: Vec<String>,
    /// Entries in [-1, 1]; c[i][j] = c[j][i]; c[i][i] = 1.
    pub c: DMatrix<f64>,
    /// Number of time samples behind the estimate.
    pub t_effective: usize,
}

impl CorrelationMatrix {
    pub fn n(&self) -> usize {
        self.c.nrows()
    }

    /// Wrap an externally built similarity matrix (symmetrized, clamped,
    /// unit diagonal) so it can flow through the same machinery.
    pub fn from_similarity(labels: Vec<String>, mut c: DMatrix<f64>, t_effective: usize) -> Self {
        let n = c.nrows();
        for i in 0..n {
            for j in (i + 1)..n {
                let v = (0.5 * (c[(i, j)] + c[(j, i)])).clamp(-1.0, 1.0);
                c[(i, j)] = v;
                c[(j, i)] = v;
            }
            c[(i, i)] = 1.0;
        }
        CorrelationMatrix { labels, c, t_effective }
    }
}

/// Pearson correlations of standardized columns: C = GᵀG / T, with the
/// diagonal forced to exactly 1 and entries clamped into [-1, 1] against
/// floating-point drift. Each entry is a fixed-order sum over time, so the
/// result does not depend on any parallelism in the caller.
pub fn correlation_matrix(g: &DMatrix<f64>, labels: &[String]) -> Result<CorrelationMatrix> {
    let t = g.nrows();
    let n = g.ncols();
    if t < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 time samples, got {t}"
        )));
    }
    if labels.len() != n {
        return Err(Error::InvalidInput(format!(
            "{} labels for {n} columns",
            labels.len()
        )));
    }
    let mut c = DMatrix::zeros(n, n);
    for i in 0..n {
        c[(i, i)] = 1.0;
        for j in (i + 1)..n {
            let mut acc = 0.0;
            for row in 0..t {
                acc += g[(row, i)] * g[(row, j)];
            }
            let v = (acc / t as f64).clamp(-1.0, 1.0);
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    Ok(CorrelationMatrix { labels: labels.to_vec(), c, t_effective: t })
}

/// Correlation matrix straight from a return panel (standardizes first).
pub fn correlation_from_returns(panel: &ReturnPanel) -> Result<CorrelationMatrix> {
    correlation_matrix(&panel.standardized(), &panel.labels)
}

/// Mean of the N(N-1)/2 upper-triangle coefficients.
pub fn mean_offdiagonal(c: &CorrelationMatrix) -> f64 {
    let n = c.n();
    let mut acc = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            acc += c.c[(i, j)];
        }
    }
    acc / (n * (n - 1) / 2) as f64
}

/// Density-normalized histogram of the off-diagonal coefficients on fixed
/// support [-1, 1].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoefficientHistogram {
    /// n_bins + 1 breakpoints spanning [-1, 1].
    pub bin_edges: Vec<f64>,
    /// Per-bin probability density; integrates to 1.
    pub densities: Vec<f64>,
    pub n_pairs: usize,
}

impl CoefficientHistogram {
    pub fn bin_centers(&self) -> Vec<f64> {
        self.bin_edges
            .windows(2)
            .map(|w| 0.5 * (w[0] + w[1]))
            .collect()
    }

    /// Count local maxima whose density reaches `prominence_fraction` of
    /// the tallest bin. A crude but deterministic stand-in for eyeballing
    /// modality.
    pub fn peak_count(&self, prominence_fraction: f64) -> usize {
        let d = &self.densities;
        let max = d.iter().cloned().fold(0.0, f64::max);
        if max <= 0.0 {
            return 0;
        }
        let floor = prominence_fraction * max;
        let n = d.len();
        (0..n)
            .filter(|&i| {
                d[i] >= floor
                    && (i == 0 || d[i] > d[i - 1])
                    && (i + 1 == n || d[i] > d[i + 1])
            })
            .count()
    }
}

/// Histogram the upper-triangle coefficients into `n_bins` equal bins over
/// [-1, 1]. Values exactly at 1 land in the last bin.
pub fn coefficient_histogram(c: &CorrelationMatrix, n_bins: usize) -> Result<CoefficientHistogram> {
    let n = c.n();
    if n < 2 {
        return Err(Error::InvalidInput("need at least 2 series".into()));
    }
    if n_bins == 0 {
        return Err(Error::InvalidParameter("need at least 1 bin".into()));
    }
    let n_pairs = n * (n - 1) / 2;
    let width = 2.0 / n_bins as f64;
    let mut counts = vec![0usize; n_bins];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = c.c[(i, j)];
            let bin = (((v + 1.0) / width) as usize).min(n_bins - 1);
            counts[bin] += 1;
        }
    }
    let bin_edges: Vec<f64> = (0..=n_bins).map(|k| -1.0 + k as f64 * width).collect();
    let densities: Vec<f64> = counts
        .iter()
        .map(|&k| k as f64 / (n_pairs as f64 * width))
        .collect();
    Ok(CoefficientHistogram { bin_edges, densities, n_pairs })
}
