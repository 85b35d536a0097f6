//! Synthetic return panels with known structure: pure noise, planted
//! correlation blocks, near-duplicate pairs, and a one-factor market with
//! optional drift. Every generator is a pure function of its seed.

use chrono::NaiveDate;
use nalgebra::DMatrix;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::ingest::PricePanel;
use crate::{Error, Result};

/// T×N panel of independent standard normals, standardized column by
/// column so each series has sample mean 0 and population variance 1.
pub fn generate_noise_panel(t: usize, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    if n < 2 || t < n {
        return Err(Error::InvalidParameter(format!(
            "noise panel needs t >= n >= 2, got t={t}, n={n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = DMatrix::from_fn(t, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    standardize_columns(&mut m);
    Ok(m)
}

fn standardize_columns(m: &mut DMatrix<f64>) {
    let t = m.nrows() as f64;
    for c in 0..m.ncols() {
        let mean = m.column(c).sum() / t;
        let var = m.column(c).iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / t;
        let sd = var.sqrt();
        for r in 0..m.nrows() {
            m[(r, c)] = (m[(r, c)] - mean) / sd;
        }
    }
}

/// Block-structured correlation target: `block_sizes[b]` series per block,
/// `intra` inside each block, `inter[(a, b)]` between blocks a and b.
#[derive(Debug, Clone)]
pub struct BlockModelSpec {
    pub block_sizes: Vec<usize>,
    pub intra: f64,
    /// K×K symmetric matrix of between-block levels; the diagonal is
    /// ignored.
    pub inter: DMatrix<f64>,
    pub t: usize,
    pub seed: u64,
}

impl BlockModelSpec {
    /// All between-block entries at a single level.
    pub fn with_uniform_inter(
        block_sizes: Vec<usize>,
        intra: f64,
        inter: f64,
        t: usize,
        seed: u64,
    ) -> Self {
        let k = block_sizes.len();
        BlockModelSpec {
            block_sizes,
            intra,
            inter: DMatrix::from_element(k, k, inter),
            t,
            seed,
        }
    }

    /// 71-series, six-block configuration used throughout the tests as a
    /// realistic panel with a strong common mode.
    pub fn standard71(seed: u64) -> Self {
        Self::with_uniform_inter(vec![8, 7, 13, 5, 31, 7], 0.9, 0.25, 5272, seed)
    }

    /// Two-level configuration whose coefficient histogram has three
    /// well-separated peaks (background, the strongly coupled trio of
    /// blocks 3-5, and the intra-block level).
    pub fn trimodal(seed: u64) -> Self {
        let sizes = vec![10, 7, 10, 5, 28, 7];
        let k = sizes.len();
        let mut inter = DMatrix::from_element(k, k, 0.25);
        for a in 2..5 {
            for b in 2..5 {
                if a != b {
                    inter[(a, b)] = 0.55;
                }
            }
        }
        BlockModelSpec { block_sizes: sizes, intra: 0.9, inter, t: 5000, seed }
    }

    pub fn n_series(&self) -> usize {
        self.block_sizes.iter().sum()
    }

    /// The N×N correlation matrix the sampled panel converges to.
    pub fn target_matrix(&self) -> Result<DMatrix<f64>> {
        let k = self.block_sizes.len();
        if k == 0 || self.block_sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidParameter(
                "block sizes must be non-empty and positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.intra) {
            return Err(Error::InvalidParameter(format!(
                "intra-block correlation must be in [0, 1), got {}",
                self.intra
            )));
        }
        if self.inter.nrows() != k || self.inter.ncols() != k {
            return Err(Error::InvalidParameter(format!(
                "inter matrix must be {k}x{k} for {k} blocks"
            )));
        }
        for a in 0..k {
            for b in 0..k {
                let v = self.inter[(a, b)];
                if a != b && ((self.inter[(b, a)] - v).abs() > 1e-12 || !(-1.0..1.0).contains(&v)) {
                    return Err(Error::InvalidParameter(
                        "inter matrix must be symmetric with entries in (-1, 1)".into(),
                    ));
                }
            }
        }
        let n = self.n_series();
        let block_of: Vec<usize> = self
            .block_sizes
            .iter()
            .enumerate()
            .flat_map(|(b, &s)| std::iter::repeat(b).take(s))
            .collect();
        Ok(DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                1.0
            } else if block_of[i] == block_of[j] {
                self.intra
            } else {
                self.inter[(block_of[i], block_of[j])]
            }
        }))
    }
}

/// Sample a block-model panel. Returns the T×N matrix and the 1-based
/// block id of each series.
pub fn generate_block_panel(spec: &BlockModelSpec) -> Result<(DMatrix<f64>, Vec<usize>)> {
    let target = spec.target_matrix()?;
    if spec.t < 2 {
        return Err(Error::InvalidParameter(format!(
            "block panel needs t >= 2, got {}",
            spec.t
        )));
    }
    let panel = sample_with_covariance(&target, spec.t, spec.seed)?;
    let labels = spec
        .block_sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &s)| std::iter::repeat(b + 1).take(s))
        .collect();
    Ok((panel, labels))
}

/// Panel of weakly coupled series (background 0.3) with one planted pair
/// correlated at `pair_corr`. Returns the panel and the pair's indices.
pub fn generate_duplicate_pair_panel(
    n: usize,
    t: usize,
    pair_corr: f64,
    seed: u64,
) -> Result<(DMatrix<f64>, (usize, usize))> {
    if n < 3 {
        return Err(Error::InvalidParameter(format!(
            "duplicate-pair panel needs n >= 3, got {n}"
        )));
    }
    if !(0.9..1.0).contains(&pair_corr) {
        return Err(Error::InvalidParameter(format!(
            "pair correlation must be in [0.9, 1), got {pair_corr}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = rng.random_range(0..n);
    let mut b = rng.random_range(0..n - 1);
    if b >= a {
        b += 1;
    }
    let pair = (a.min(b), a.max(b));
    let panel = sample_with_covariance(&pair_target(n, &[(pair.0, pair.1, pair_corr)])?, t, seed)?;
    Ok((panel, pair))
}

/// Same background with several disjoint planted pairs at given levels.
pub fn generate_multi_pair_panel(
    n: usize,
    t: usize,
    pairs: &[(usize, usize, f64)],
    seed: u64,
) -> Result<DMatrix<f64>> {
    sample_with_covariance(&pair_target(n, pairs)?, t, seed)
}

fn pair_target(n: usize, pairs: &[(usize, usize, f64)]) -> Result<DMatrix<f64>> {
    let mut used = vec![false; n];
    for &(i, j, c) in pairs {
        if i >= n || j >= n || i == j {
            return Err(Error::InvalidParameter(format!(
                "pair ({i}, {j}) is out of range for {n} series"
            )));
        }
        if used[i] || used[j] {
            return Err(Error::InvalidParameter(
                "planted pairs must not share series".into(),
            ));
        }
        used[i] = true;
        used[j] = true;
        if !(0.9..1.0).contains(&c) {
            return Err(Error::InvalidParameter(format!(
                "pair correlation must be in [0.9, 1), got {c}"
            )));
        }
    }
    let mut target = DMatrix::from_element(n, n, 0.3);
    for i in 0..n {
        target[(i, i)] = 1.0;
    }
    for &(i, j, c) in pairs {
        target[(i, j)] = c;
        target[(j, i)] = c;
    }
    Ok(target)
}

/// Draw T rows with population covariance `target` via its symmetric
/// square root.
fn sample_with_covariance(target: &DMatrix<f64>, t: usize, seed: u64) -> Result<DMatrix<f64>> {
    let n = target.nrows();
    let eig = nalgebra::SymmetricEigen::try_new(target.clone(), f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("eigendecomposition of target matrix failed".into()))?;
    let mut vals = eig.eigenvalues.clone();
    for v in vals.iter_mut() {
        if *v < -1e-8 {
            return Err(Error::InvalidParameter(format!(
                "target correlation matrix is not positive semidefinite (eigenvalue {v:.3e})"
            )));
        }
        *v = v.max(0.0).sqrt();
    }
    let root = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = DMatrix::from_fn(t, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    Ok(z * root)
}

/// One-factor market: r_i(t) = β_i f(t) + σ ε_i(t), with f(t) a standard
/// normal shifted by an optional deterministic drift.
#[derive(Debug, Clone)]
pub struct FactorModelSpec {
    pub n: usize,
    pub t: usize,
    /// Per-series factor loadings; must have length n.
    pub betas: Vec<f64>,
    /// Idiosyncratic noise scale σ > 0.
    pub idio_sigma: f64,
    /// Optional per-step drift added to the factor (length t).
    pub factor_drift: Option<Vec<f64>>,
    pub seed: u64,
}

/// Sample a one-factor panel.
pub fn generate_factor_panel(spec: &FactorModelSpec) -> Result<DMatrix<f64>> {
    if spec.n < 2 || spec.t < 2 {
        return Err(Error::InvalidParameter(format!(
            "factor panel needs n >= 2 and t >= 2, got n={}, t={}",
            spec.n, spec.t
        )));
    }
    if spec.betas.len() != spec.n {
        return Err(Error::InvalidParameter(format!(
            "expected {} betas, got {}",
            spec.n,
            spec.betas.len()
        )));
    }
    if !(spec.idio_sigma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "idiosyncratic sigma must be positive, got {}",
            spec.idio_sigma
        )));
    }
    if let Some(d) = &spec.factor_drift {
        if d.len() != spec.t {
            return Err(Error::InvalidParameter(format!(
                "factor drift must have length {}, got {}",
                spec.t,
                d.len()
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let factor: Vec<f64> = (0..spec.t)
        .map(|s| {
            let drift = spec.factor_drift.as_ref().map_or(0.0, |d| d[s]);
            drift + rng.sample::<f64, _>(StandardNormal)
        })
        .collect();
    let mut m = DMatrix::zeros(spec.t, spec.n);
    for s in 0..spec.t {
        for i in 0..spec.n {
            let eps: f64 = rng.sample(StandardNormal);
            m[(s, i)] = spec.betas[i] * factor[s] + spec.idio_sigma * eps;
        }
    }
    Ok(m)
}

/// Loadings drawn uniformly from [low, high].
pub fn random_betas(n: usize, low: f64, high: f64, seed: u64) -> Result<Vec<f64>> {
    if !(high > low) {
        return Err(Error::InvalidParameter(format!(
            "beta range must satisfy high > low, got [{low}, {high}]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| rng.random_range(low..high)).collect())
}

/// Drift that rises at `rate` per step for the first half of the sample
/// and falls at the same rate afterwards.
pub fn bubble_drift(t: usize, rate: f64) -> Vec<f64> {
    (0..t).map(|s| if s < t / 2 { rate } else { -rate }).collect()
}

/// σ such that the mean pairwise population correlation of the one-factor
/// model matches `target`. That correlation is
/// c_ij = β_i β_j / sqrt((β_i² + σ²)(β_j² + σ²)),
/// strictly decreasing in σ, so bisection converges.
pub fn calibrate_idio_sigma(betas: &[f64], target: f64) -> Result<f64> {
    if betas.len() < 2 || betas.iter().any(|&b| b <= 0.0) {
        return Err(Error::InvalidParameter(
            "calibration needs at least two positive betas".into(),
        ));
    }
    if !(0.0..1.0).contains(&target) || target == 0.0 {
        return Err(Error::InvalidParameter(format!(
            "target mean correlation must be in (0, 1), got {target}"
        )));
    }
    let mean_corr = |sigma: f64| {
        let n = betas.len();
        let mut sum = 0.0;
        let mut pairs = 0usize;
        for i in 0..n {
            for j in (i + 1)..n {
                let bi = betas[i];
                let bj = betas[j];
                sum += bi * bj / ((bi * bi + sigma * sigma) * (bj * bj + sigma * sigma)).sqrt();
                pairs += 1;
            }
        }
        sum / pairs as f64
    };
    let mut lo = 1e-9;
    let mut hi = 1.0;
    while mean_corr(hi) > target {
        hi *= 2.0;
        if hi > 1e9 {
            return Err(Error::Numerical(
                "could not bracket the calibration target".into(),
            ));
        }
    }
    if mean_corr(lo) < target {
        return Err(Error::InvalidParameter(format!(
            "target mean correlation {target} exceeds the zero-noise limit"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_corr(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Compound a synthetic return panel into a price panel:
/// P(0) = start_price, P(t+1) = P(t)·exp(scale·r(t)), with consecutive
/// dates from `start_date`. The inverse of 1-step log returns up to the
/// scale factor.
pub fn to_price_panel(
    returns: &DMatrix<f64>,
    labels: &[String],
    start_date: NaiveDate,
    start_price: f64,
    scale: f64,
) -> Result<PricePanel> {
    let n = returns.ncols();
    if labels.len() != n {
        return Err(Error::InvalidParameter(format!(
            "expected {n} labels, got {}",
            labels.len()
        )));
    }
    if !(start_price > 0.0) || !(scale > 0.0) {
        return Err(Error::InvalidParameter(
            "start price and scale must be positive".into(),
        ));
    }
    let t = returns.nrows();
    let mut prices = DMatrix::zeros(t + 1, n);
    for i in 0..n {
        prices[(0, i)] = start_price;
        let mut cumulative = 0.0;
        for s in 0..t {
            cumulative += scale * returns[(s, i)];
            prices[(s + 1, i)] = start_price * cumulative.exp();
        }
    }
    let dates = (0..=t as u64)
        .map(|d| start_date + chrono::Days::new(d))
        .collect();
    Ok(PricePanel {
        dates,
        labels: labels.to_vec(),
        prices,
        fill_log: Vec::new(),
    })
}

/// Default labels for synthetic panels: s001, s002, …
pub fn default_labels(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("s{i:03}")).collect()
}
