//! Eigendecomposition of the correlation matrix, the Marchenko-Pastur
//! bulk that pure noise would produce, and localization of
//! highly correlated pairs in the smallest eigenvectors.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::correlation::CorrelationMatrix;
use crate::{Error, Result};

/// Support of the noise eigenvalue bulk for a T×N panel with entry
/// variance sigma2: sigma2·(1 + 1/Q ± 2√(1/Q)) with Q = T/N.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MPBounds {
    pub q: f64,
    pub sigma2: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

/// Bulk edges for `t` samples of `n` series. Requires t ≥ n ≥ 2 (so Q ≥ 1)
/// and positive variance.
pub fn mp_bounds(t: usize, n: usize, sigma2: f64) -> Result<MPBounds> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 series, got {n}"
        )));
    }
    if t < n {
        return Err(Error::InvalidParameter(format!(
            "Q = {t}/{n} < 1: more series than samples is out of scope"
        )));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "variance must be positive, got {sigma2}"
        )));
    }
    let q = t as f64 / n as f64;
    let s = (1.0 / q).sqrt();
    Ok(MPBounds {
        q,
        sigma2,
        lambda_min: sigma2 * (1.0 + 1.0 / q - 2.0 * s),
        lambda_max: sigma2 * (1.0 + 1.0 / q + 2.0 * s),
    })
}

/// Closed-form bulk density at `lambda`:
/// Q/(2π·sigma2) · √((λmax−λ)(λ−λmin)) / λ inside the support, 0 outside
/// (including both endpoints).
pub fn mp_density(lambda: f64, bounds: &MPBounds) -> f64 {
    if lambda <= bounds.lambda_min || lambda >= bounds.lambda_max {
        return 0.0;
    }
    let q = bounds.q;
    let spread = (bounds.lambda_max - lambda) * (lambda - bounds.lambda_min);
    q / (2.0 * std::f64::consts::PI * bounds.sigma2) * spread.sqrt() / lambda
}

/// Where an eigenvalue sits relative to the noise bulk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EigenClass {
    Above,
    Bulk,
    Below,
}

/// Full spectrum of a correlation matrix, sorted by descending eigenvalue,
/// with each eigenvalue classified against the noise bulk.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    /// λ_1 ≥ λ_2 ≥ … ≥ λ_N.
    pub eigenvalues: Vec<f64>,
    /// Column k is the unit eigenvector of eigenvalues[k]; the
    /// largest-magnitude component of each column is positive.
    pub eigenvectors: DMatrix<f64>,
    pub bounds: MPBounds,
    pub classes: Vec<EigenClass>,
}

impl SpectralDecomposition {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }
}

/// Eigendecompose a correlation matrix and classify its spectrum against
/// the given bulk. Ties in eigenvalue order keep the solver's original
/// index order; each eigenvector's sign is fixed by making its
/// largest-magnitude component (first such component on ties) positive.
pub fn eigendecompose(c: &CorrelationMatrix, bounds: MPBounds) -> Result<SpectralDecomposition> {
    let n = c.n();
    let sym = nalgebra::SymmetricEigen::try_new(c.c.clone(), f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("symmetric eigensolver did not converge".into()))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        sym.eigenvalues[b]
            .partial_cmp(&sym.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });

    let mut eigenvalues = Vec::with_capacity(n);
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (k, &src) in order.iter().enumerate() {
        eigenvalues.push(sym.eigenvalues[src]);
        let col = sym.eigenvectors.column(src);
        let mut dominant = 0;
        for i in 1..n {
            if col[i].abs() > col[dominant].abs() {
                dominant = i;
            }
        }
        let flip = if col[dominant] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            eigenvectors[(i, k)] = flip * col[i];
        }
    }

    let classes = eigenvalues
        .iter()
        .map(|&l| {
            if l > bounds.lambda_max {
                EigenClass::Above
            } else if l < bounds.lambda_min {
                EigenClass::Below
            } else {
                EigenClass::Bulk
            }
        })
        .collect();

    Ok(SpectralDecomposition { eigenvalues, eigenvectors, bounds, classes })
}

/// Headline spectrum statistics: bulk-deviation counts and the variance
/// fraction carried by the leading eigenvalue.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DeviationReport {
    pub above: usize,
    pub bulk: usize,
    pub below: usize,
    /// λ_1 / N.
    pub lambda1_over_n: f64,
}

pub fn bulk_deviation_report(d: &SpectralDecomposition) -> DeviationReport {
    let mut above = 0;
    let mut bulk = 0;
    let mut below = 0;
    for class in &d.classes {
        match class {
            EigenClass::Above => above += 1,
            EigenClass::Bulk => bulk += 1,
            EigenClass::Below => below += 1,
        }
    }
    DeviationReport {
        above,
        bulk,
        below,
        lambda1_over_n: d.eigenvalues[0] / d.n() as f64,
    }
}

/// Dominant structure of one small-eigenvalue eigenvector: the components
/// that clear the dominance threshold and the high-correlation pairs they
/// imply.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairLocalization {
    /// Index into the descending-sorted spectrum (0-based).
    pub eigen_index: usize,
    pub eigenvalue: f64,
    /// (series index, component value) for every |component| ≥ dominance.
    pub dominant_components: Vec<(usize, f64)>,
    /// Opposite-sign dominant pairs, sorted by their correlation,
    /// strongest first: ((i, j), c_ij).
    pub implied_pairs: Vec<((usize, usize), f64)>,
}

/// Inspect the `k_smallest` smallest eigenvectors for near-duplicate
/// series. A component is dominant when its magnitude reaches `dominance`;
/// every opposite-sign dominant pair is reported with its correlation,
/// strongest first. Reports are ordered smallest eigenvalue first.
pub fn localize_pairs(
    d: &SpectralDecomposition,
    c: &CorrelationMatrix,
    k_smallest: usize,
    dominance: f64,
) -> Result<Vec<PairLocalization>> {
    let n = d.n();
    if k_smallest > n {
        return Err(Error::InvalidParameter(format!(
            "asked for {k_smallest} smallest eigenvectors of an N={n} spectrum"
        )));
    }
    let mut out = Vec::with_capacity(k_smallest);
    for step in 0..k_smallest {
        let idx = n - 1 - step;
        let col = d.eigenvectors.column(idx);
        let dominant: Vec<(usize, f64)> = (0..n)
            .filter(|&i| col[i].abs() >= dominance)
            .map(|i| (i, col[i]))
            .collect();
        let mut implied: Vec<((usize, usize), f64)> = Vec::new();
        for a in 0..dominant.len() {
            for b in (a + 1)..dominant.len() {
                let (i, ui) = dominant[a];
                let (j, uj) = dominant[b];
                if ui * uj < 0.0 {
                    implied.push(((i, j), c.c[(i, j)]));
                }
            }
        }
        implied.sort_by(|x, y| {
            y.1.partial_cmp(&x.1)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(x.0.cmp(&y.0))
        });
        out.push(PairLocalization {
            eigen_index: idx,
            eigenvalue: d.eigenvalues[idx],
            dominant_components: dominant,
            implied_pairs: implied,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("s{i}")).collect()
    }

    fn corr_from(m: DMatrix<f64>, t: usize) -> CorrelationMatrix {
        CorrelationMatrix { labels: labels(m.nrows()), c: m, t_effective: t }
    }

    fn equicorrelated(n: usize, rho: f64) -> DMatrix<f64> {
        let mut m = DMatrix::from_element(n, n, rho);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    #[test]
    fn bounds_match_the_reference_panel_shape() {
        let b = mp_bounds(5272, 71, 1.0).unwrap();
        assert!((b.lambda_max - 1.2456).abs() < 1e-3);
        assert!((b.lambda_min - 0.7814).abs() < 1e-3);
        // High-precision values from an independent 50-digit computation.
        assert!((b.lambda_max - 1.245_565_412_805_633_6).abs() < 1e-12);
        assert!((b.lambda_min - 0.781_369_336_815_003_7).abs() < 1e-12);
        assert!((b.q - 5272.0 / 71.0).abs() < 1e-12);
    }

    #[test]
    fn bounds_closed_forms() {
        let b = mp_bounds(10, 10, 1.0).unwrap(); // Q = 1
        assert!(b.lambda_min.abs() < 1e-12);
        assert!((b.lambda_max - 4.0).abs() < 1e-12);

        let b = mp_bounds(40, 10, 2.0).unwrap(); // Q = 4, sigma2 = 2
        assert!((b.lambda_min - 0.5).abs() < 1e-12);
        assert!((b.lambda_max - 4.5).abs() < 1e-12);
    }

    #[test]
    fn bounds_reject_bad_parameters() {
        assert!(mp_bounds(5, 10, 1.0).is_err()); // Q < 1
        assert!(mp_bounds(10, 1, 1.0).is_err()); // n < 2
        assert!(mp_bounds(10, 5, 0.0).is_err()); // sigma2
    }

    #[test]
    fn density_vanishes_at_and_outside_the_edges() {
        let b = mp_bounds(5272, 71, 1.0).unwrap();
        assert_eq!(mp_density(b.lambda_min, &b), 0.0);
        assert_eq!(mp_density(b.lambda_max, &b), 0.0);
        assert_eq!(mp_density(b.lambda_min - 0.1, &b), 0.0);
        assert_eq!(mp_density(b.lambda_max + 0.1, &b), 0.0);
        assert!(mp_density(1.0, &b) > 0.0);
    }

    #[test]
    fn density_matches_independent_high_precision_value() {
        // f(1) for Q = 5272/71, sigma2 = 1, from a 50-digit evaluation.
        let b = mp_bounds(5272, 71, 1.0).unwrap();
        assert!((mp_density(1.0, &b) - 2.738_270_321_619_859_7).abs() < 1e-10);
    }

    #[test]
    fn density_integrates_to_one() {
        let b = mp_bounds(5272, 71, 1.0).unwrap();
        // Simpson's rule on a sin^2 substitution to tame the edge
        // singularities of the derivative.
        let m = 4000;
        let half_pi = std::f64::consts::FRAC_PI_2;
        let width = b.lambda_max - b.lambda_min;
        let f = |u: f64| {
            let s = u.sin();
            let lambda = b.lambda_min + width * s * s;
            mp_density(lambda, &b) * width * 2.0 * s * u.cos()
        };
        let h = half_pi / m as f64;
        let mut acc = f(0.0) + f(half_pi);
        for i in 1..m {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(i as f64 * h);
        }
        let integral = acc * h / 3.0;
        assert!((integral - 1.0).abs() < 1e-6, "integral = {integral}");
    }

    #[test]
    fn two_by_two_closed_form_spectrum() {
        let rho = 0.3;
        let c = corr_from(equicorrelated(2, rho), 10);
        let b = mp_bounds(10, 2, 1.0).unwrap();
        let d = eigendecompose(&c, b).unwrap();
        assert!((d.eigenvalues[0] - (1.0 + rho)).abs() < 1e-12);
        assert!((d.eigenvalues[1] - (1.0 - rho)).abs() < 1e-12);
        let inv_sqrt2 = 1.0 / 2.0f64.sqrt();
        assert!((d.eigenvectors[(0, 0)] - inv_sqrt2).abs() < 1e-10);
        assert!((d.eigenvectors[(1, 0)] - inv_sqrt2).abs() < 1e-10);
        assert!((d.eigenvectors[(0, 1)] - inv_sqrt2).abs() < 1e-10);
        assert!((d.eigenvectors[(1, 1)] + inv_sqrt2).abs() < 1e-10);
    }

    #[test]
    fn identity_matrix_is_all_bulk() {
        let c = corr_from(DMatrix::identity(8, 8), 594);
        let b = mp_bounds(594, 8, 1.0).unwrap();
        let d = eigendecompose(&c, b).unwrap();
        assert!(d.eigenvalues.iter().all(|&l| (l - 1.0).abs() < 1e-12));
        assert!(d.classes.iter().all(|&k| k == EigenClass::Bulk));
        let rep = bulk_deviation_report(&d);
        assert_eq!((rep.above, rep.bulk, rep.below), (0, 8, 0));
    }

    #[test]
    fn equicorrelated_spectrum_matches_closed_form() {
        let n = 71;
        let rho = 0.57;
        let c = corr_from(equicorrelated(n, rho), 5272);
        let b = mp_bounds(5272, n, 1.0).unwrap();
        let d = eigendecompose(&c, b).unwrap();
        let lambda1 = 1.0 + (n as f64 - 1.0) * rho; // 40.9
        assert!((d.eigenvalues[0] - lambda1).abs() < 1e-8);
        for k in 1..n {
            assert!((d.eigenvalues[k] - (1.0 - rho)).abs() < 1e-8);
        }
        let rep = bulk_deviation_report(&d);
        assert!((rep.lambda1_over_n - 0.576_056_338_028_169).abs() < 1e-9);
        assert_eq!(rep.above, 1);
        assert_eq!(rep.below, 70); // 0.43 sits below the 0.7814 edge
    }

    #[test]
    fn reconstruction_orthonormality_and_trace() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let n = 12;
        let t = 60;
        let raw = DMatrix::from_fn(t, n, |_, _| rng.random::<f64>() - 0.5);
        let mut g = raw.clone();
        for col in 0..n {
            let mean = g.column(col).sum() / t as f64;
            let sd = (g.column(col).iter().map(|x| (x - mean) * (x - mean)).sum::<f64>()
                / t as f64)
                .sqrt();
            for row in 0..t {
                g[(row, col)] = (g[(row, col)] - mean) / sd;
            }
        }
        let c = crate::correlation::correlation_matrix(&g, &labels(n)).unwrap();
        let b = mp_bounds(t, n, 1.0).unwrap();
        let d = eigendecompose(&c, b).unwrap();

        let lam = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d.eigenvalues.clone()));
        let recon = &d.eigenvectors * lam * d.eigenvectors.transpose();
        let gram = d.eigenvectors.transpose() * &d.eigenvectors;
        for i in 0..n {
            for j in 0..n {
                assert!((recon[(i, j)] - c.c[(i, j)]).abs() <= 1e-8);
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)] - expect).abs() <= 1e-8);
            }
        }
        let trace: f64 = d.eigenvalues.iter().sum();
        assert!((trace - n as f64).abs() < 1e-6);
        // Sorted descending and classification monotone.
        for k in 1..n {
            assert!(d.eigenvalues[k - 1] >= d.eigenvalues[k] - 1e-12);
        }
    }

    #[test]
    fn planted_pair_dominates_the_smallest_eigenvector() {
        let n = 10;
        let (a, b_idx) = (2, 7);
        let mut m = equicorrelated(n, 0.3);
        m[(a, b_idx)] = 0.999;
        m[(b_idx, a)] = 0.999;
        let c = corr_from(m, 2000);
        let bounds = mp_bounds(2000, n, 1.0).unwrap();
        let d = eigendecompose(&c, bounds).unwrap();
        let loc = localize_pairs(&d, &c, 1, 0.5).unwrap();
        assert_eq!(loc.len(), 1);
        assert_eq!(loc[0].eigen_index, n - 1);
        let idx: Vec<usize> = loc[0].dominant_components.iter().map(|&(i, _)| i).collect();
        assert_eq!(idx, vec![a, b_idx]);
        let (u1, u2) = (
            loc[0].dominant_components[0].1,
            loc[0].dominant_components[1].1,
        );
        assert!(u1 * u2 < 0.0);
        assert!((u1.abs() - 1.0 / 2.0f64.sqrt()).abs() < 1e-6);
        assert_eq!(loc[0].implied_pairs[0].0, (a, b_idx));
        assert!((loc[0].implied_pairs[0].1 - 0.999).abs() < 1e-12);
    }

    #[test]
    fn identity_matrix_localizes_nothing() {
        let n = 6;
        let c = corr_from(DMatrix::identity(n, n), 100);
        let bounds = mp_bounds(100, n, 1.0).unwrap();
        let d = eigendecompose(&c, bounds).unwrap();
        let loc = localize_pairs(&d, &c, 3, 0.5).unwrap();
        for l in &loc {
            assert!(l.implied_pairs.is_empty());
        }
    }
}
