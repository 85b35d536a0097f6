//! Eigenportfolios, the leading-mode market index, and the buy-and-hold
//! comparison against the average price.

use serde::{Deserialize, Serialize};

use crate::ingest::{PricePanel, ReturnPanel};
use crate::spectra::SpectralDecomposition;
use crate::{Error, Result};

/// Portfolio whose weights are a sum-normalized eigenvector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Eigenportfolio {
    /// 1-based eigenvalue index; 0 marks the uniform 1/N benchmark.
    pub k: usize,
    /// u_{i,k} / Σ_i u_{i,k}; sums to 1.
    pub weights: Vec<f64>,
    /// Weighted return series R_k(t).
    pub returns: Vec<f64>,
    /// Coefficient of determination of the cross-sectional mean return
    /// regressed on R_k (ordinary least squares with intercept).
    pub r_squared: f64,
}

/// Eigenportfolio k (1-based) built on raw returns.
pub fn eigenportfolio(
    d: &SpectralDecomposition,
    panel: &ReturnPanel,
    k: usize,
) -> Result<Eigenportfolio> {
    build_portfolio(d, &panel.returns, k)
}

/// Same construction on standardized returns instead of raw ones.
pub fn eigenportfolio_standardized(
    d: &SpectralDecomposition,
    panel: &ReturnPanel,
    k: usize,
) -> Result<Eigenportfolio> {
    build_portfolio(d, &panel.standardized(), k)
}

fn build_portfolio(
    d: &SpectralDecomposition,
    returns: &nalgebra::DMatrix<f64>,
    k: usize,
) -> Result<Eigenportfolio> {
    let n = d.n();
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!(
            "eigenportfolio index must be in 1..={n}, got {k}"
        )));
    }
    if returns.ncols() != n {
        return Err(Error::InvalidInput(format!(
            "return panel has {} series, spectrum has {n}",
            returns.ncols()
        )));
    }
    let u = d.eigenvectors.column(k - 1);
    let sum: f64 = u.iter().sum();
    if sum.abs() < 1e-8 {
        return Err(Error::IllDefinedPortfolio { k, sum });
    }
    let weights: Vec<f64> = u.iter().map(|x| x / sum).collect();
    let series = weighted_returns(returns, &weights);
    let mean = cross_sectional_mean(returns);
    let r_squared = r_squared_ols(&series, &mean);
    Ok(Eigenportfolio { k, weights, returns: series, r_squared })
}

/// The 1/N benchmark through the same machinery: uniform weights on raw
/// returns. Its return series is the cross-sectional mean, so R² = 1 by
/// construction.
pub fn uniform_portfolio(panel: &ReturnPanel) -> Eigenportfolio {
    let n = panel.n_series();
    let weights = vec![1.0 / n as f64; n];
    let returns = weighted_returns(&panel.returns, &weights);
    Eigenportfolio { k: 0, weights, returns, r_squared: 1.0 }
}

fn weighted_returns(returns: &nalgebra::DMatrix<f64>, weights: &[f64]) -> Vec<f64> {
    (0..returns.nrows())
        .map(|t| {
            weights
                .iter()
                .enumerate()
                .map(|(i, w)| w * returns[(t, i)])
                .sum()
        })
        .collect()
}

fn cross_sectional_mean(returns: &nalgebra::DMatrix<f64>) -> Vec<f64> {
    let n = returns.ncols() as f64;
    (0..returns.nrows())
        .map(|t| returns.row(t).sum() / n)
        .collect()
}

/// R² of y regressed on x by ordinary least squares with intercept; for a
/// single regressor this is the squared Pearson correlation. 0 when either
/// side has no variance.
fn r_squared_ols(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&a, &b) in x.iter().zip(y.iter()) {
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
        sxy += (a - mx) * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return 0.0;
    }
    (sxy * sxy) / (sxx * syy)
}

/// Price-like index compounded from an eigenportfolio's returns.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndexSeries {
    /// Starting level (average initial price by convention).
    pub base: f64,
    /// I(0) = base, I(t) = base·exp(Σ_{s≤t} R(s)); one longer than the
    /// return series.
    pub values: Vec<f64>,
    /// Which eigenportfolio produced it.
    pub portfolio_k: usize,
}

/// Compound a portfolio's returns into an index starting at `base`.
pub fn build_index(p: &Eigenportfolio, base: f64) -> Result<IndexSeries> {
    if !(base > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "index base must be positive, got {base}"
        )));
    }
    let mut values = Vec::with_capacity(p.returns.len() + 1);
    values.push(base);
    let mut cumulative = 0.0;
    for &r in &p.returns {
        cumulative += r;
        values.push(base * cumulative.exp());
    }
    Ok(IndexSeries { base, values, portfolio_k: p.k })
}

/// Buy-and-hold comparison of an index against the cross-sectional
/// average price.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BuyAndHoldReport {
    pub dates: Vec<chrono::NaiveDate>,
    pub index_values: Vec<f64>,
    pub average_prices: Vec<f64>,
    /// I(T) / ⟨P(T)⟩ at the final date.
    pub terminal_ratio: f64,
    /// Share of dates with I(t) ≥ ⟨P(t)⟩.
    pub dominance_fraction: f64,
    /// Pearson correlation of ln I(t) and ln ⟨P(t)⟩.
    pub ln_correlation: f64,
}

/// Compare an index series with the average price of the panel it came
/// from. The index must have one value per panel date (which holds when
/// it was built from 1-step returns of that panel).
pub fn buy_and_hold_report(index: &IndexSeries, panel: &PricePanel) -> Result<BuyAndHoldReport> {
    let avg = panel.average_prices();
    if avg.len() != index.values.len() {
        return Err(Error::InvalidInput(format!(
            "index has {} values but the panel has {} dates",
            index.values.len(),
            avg.len()
        )));
    }
    let t = avg.len();
    let terminal_ratio = index.values[t - 1] / avg[t - 1];
    let dominance = index
        .values
        .iter()
        .zip(avg.iter())
        .filter(|(i, p)| i >= p)
        .count() as f64
        / t as f64;
    let ln_i: Vec<f64> = index.values.iter().map(|v| v.ln()).collect();
    let ln_p: Vec<f64> = avg.iter().map(|v| v.ln()).collect();
    let ln_correlation = pearson(&ln_i, &ln_p);
    Ok(BuyAndHoldReport {
        dates: panel.dates.clone(),
        index_values: index.values.clone(),
        average_prices: avg,
        terminal_ratio,
        dominance_fraction: dominance,
        ln_correlation,
    })
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&a, &b) in x.iter().zip(y.iter()) {
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
        sxy += (a - mx) * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return 0.0;
    }
    sxy / (sxx.sqrt() * syy.sqrt())
}
