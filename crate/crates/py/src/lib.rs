//! Python bindings for the analysis pipeline.
//!
//! Thin wrappers around the core types: matrices come back as lists of
//! row lists and dates as ISO strings, so the module needs nothing on the
//! Python side. Input problems raise `ValueError`, numerical breakdowns
//! `RuntimeError`.

use chrono::NaiveDate;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use panelcorr_core::correlation::{
    coefficient_histogram, correlation_from_returns, mean_offdiagonal,
};
use panelcorr_core::ingest::{self, Layout};
use panelcorr_core::portfolio::{self, build_index, buy_and_hold_report, uniform_portfolio};
use panelcorr_core::seriation::{self, consensus_cluster, AnnealingConfig, ConsensusConfig};
use panelcorr_core::spectra::{self, bulk_deviation_report, eigendecompose};
use panelcorr_core::synth;

fn err(e: panelcorr_core::Error) -> PyErr {
    if e.is_input_error() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn parse_layout(layout: &str) -> PyResult<Layout> {
    match layout {
        "wide" => Ok(Layout::Wide),
        "long" => Ok(Layout::Long),
        other => Err(PyValueError::new_err(format!(
            "layout must be \"wide\" or \"long\", got {other:?}"
        ))),
    }
}

fn rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn date_strings(dates: &[NaiveDate]) -> Vec<String> {
    dates.iter().map(|d| d.to_string()).collect()
}

/// Aligned, repaired panel of prices.
#[pyclass(frozen)]
struct PricePanel {
    inner: ingest::PricePanel,
}

#[pymethods]
impl PricePanel {
    /// Load a delimited file ("wide": date plus one column per series;
    /// "long": date,label,price rows).
    #[staticmethod]
    #[pyo3(signature = (path, layout="wide"))]
    fn load(path: &str, layout: &str) -> PyResult<Self> {
        let inner =
            ingest::load_panel(path.as_ref(), parse_layout(layout)?).map_err(err)?;
        Ok(PricePanel { inner })
    }

    #[getter]
    fn labels(&self) -> Vec<String> {
        self.inner.labels.clone()
    }

    #[getter]
    fn dates(&self) -> Vec<String> {
        date_strings(&self.inner.dates)
    }

    #[getter]
    fn n_series(&self) -> usize {
        self.inner.n_series()
    }

    #[getter]
    fn n_dates(&self) -> usize {
        self.inner.n_dates()
    }

    fn prices(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.prices)
    }

    fn average_prices(&self) -> Vec<f64> {
        self.inner.average_prices()
    }

    /// Log-returns over `delta_t` rows, with returns beyond
    /// `clip_threshold` in magnitude zeroed as data errors.
    #[pyo3(signature = (delta_t=1, clip_threshold=0.40))]
    fn compute_returns(&self, delta_t: usize, clip_threshold: f64) -> PyResult<ReturnPanel> {
        let inner =
            ingest::compute_returns(&self.inner, delta_t, clip_threshold).map_err(err)?;
        Ok(ReturnPanel { inner })
    }

    fn write_csv(&self, path: &str) -> PyResult<()> {
        panelcorr_core::report::write_price_panel(path.as_ref(), &self.inner).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "PricePanel({} series x {} dates)",
            self.inner.n_series(),
            self.inner.n_dates()
        )
    }
}

/// Panel of log-returns with per-series statistics.
#[pyclass(frozen)]
struct ReturnPanel {
    inner: ingest::ReturnPanel,
}

#[pymethods]
impl ReturnPanel {
    #[getter]
    fn labels(&self) -> Vec<String> {
        self.inner.labels.clone()
    }

    #[getter]
    fn dates(&self) -> Vec<String> {
        date_strings(&self.inner.dates)
    }

    #[getter]
    fn delta_t(&self) -> usize {
        self.inner.delta_t
    }

    #[getter]
    fn n_series(&self) -> usize {
        self.inner.n_series()
    }

    #[getter]
    fn n_samples(&self) -> usize {
        self.inner.n_samples()
    }

    #[getter]
    fn means(&self) -> Vec<f64> {
        self.inner.means.clone()
    }

    #[getter]
    fn stddevs(&self) -> Vec<f64> {
        self.inner.stddevs.clone()
    }

    #[getter]
    fn n_clipped(&self) -> usize {
        self.inner.clipped.len()
    }

    fn returns(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.returns)
    }

    /// Pairwise correlations of the standardized returns.
    fn correlation(&self) -> PyResult<CorrelationMatrix> {
        let inner = correlation_from_returns(&self.inner).map_err(err)?;
        Ok(CorrelationMatrix { inner })
    }

    fn __repr__(&self) -> String {
        format!(
            "ReturnPanel({} series x {} samples, delta_t={})",
            self.inner.n_series(),
            self.inner.n_samples(),
            self.inner.delta_t
        )
    }
}

/// Correlation matrix plus the sample count behind it.
#[pyclass(frozen)]
struct CorrelationMatrix {
    inner: panelcorr_core::correlation::CorrelationMatrix,
}

#[pymethods]
impl CorrelationMatrix {
    #[getter]
    fn labels(&self) -> Vec<String> {
        self.inner.labels.clone()
    }

    #[getter]
    fn t_effective(&self) -> usize {
        self.inner.t_effective
    }

    #[getter]
    fn n_series(&self) -> usize {
        self.inner.n()
    }

    fn matrix(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.c)
    }

    fn mean_offdiagonal(&self) -> f64 {
        mean_offdiagonal(&self.inner)
    }

    /// Coefficient distribution: (bin_centers, densities).
    #[pyo3(signature = (bins=50))]
    fn histogram(&self, bins: usize) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let h = coefficient_histogram(&self.inner, bins).map_err(err)?;
        Ok((h.bin_centers(), h.densities.clone()))
    }

    /// Eigendecompose and classify the spectrum against the noise bulk
    /// for `t_effective` samples and noise variance `sigma2`.
    #[pyo3(signature = (sigma2=1.0))]
    fn spectrum(&self, sigma2: f64) -> PyResult<Spectrum> {
        let bounds =
            spectra::mp_bounds(self.inner.t_effective, self.inner.n(), sigma2).map_err(err)?;
        let inner = eigendecompose(&self.inner, bounds).map_err(err)?;
        Ok(Spectrum { inner })
    }

    /// Consensus clustering: repeated seriation+segmentation runs,
    /// aggregated and re-clustered until the co-assignments stabilize.
    #[pyo3(signature = (seed, n_runs=200, gamma=1.0, max_iterations=50))]
    fn cluster(
        &self,
        seed: u64,
        n_runs: usize,
        gamma: f64,
        max_iterations: usize,
    ) -> PyResult<Partition> {
        let cfg = ConsensusConfig { n_runs, max_iterations, gamma };
        let result = consensus_cluster(&self.inner, &cfg, &AnnealingConfig::default(), seed)
            .map_err(err)?;
        Ok(Partition { inner: result })
    }

    fn __repr__(&self) -> String {
        format!(
            "CorrelationMatrix({} series, t_effective={})",
            self.inner.n(),
            self.inner.t_effective
        )
    }
}

/// Sorted spectrum of a correlation matrix, classified against the bulk.
#[pyclass(frozen)]
struct Spectrum {
    inner: spectra::SpectralDecomposition,
}

#[pymethods]
impl Spectrum {
    #[getter]
    fn eigenvalues(&self) -> Vec<f64> {
        self.inner.eigenvalues.clone()
    }

    #[getter]
    fn lambda_min(&self) -> f64 {
        self.inner.bounds.lambda_min
    }

    #[getter]
    fn lambda_max(&self) -> f64 {
        self.inner.bounds.lambda_max
    }

    #[getter]
    fn above(&self) -> usize {
        bulk_deviation_report(&self.inner).above
    }

    #[getter]
    fn bulk(&self) -> usize {
        bulk_deviation_report(&self.inner).bulk
    }

    #[getter]
    fn below(&self) -> usize {
        bulk_deviation_report(&self.inner).below
    }

    #[getter]
    fn lambda1_over_n(&self) -> f64 {
        self.inner.eigenvalues[0] / self.inner.n() as f64
    }

    /// Unit eigenvector of the k-th largest eigenvalue (1-based).
    fn eigenvector(&self, k: usize) -> PyResult<Vec<f64>> {
        if k == 0 || k > self.inner.n() {
            return Err(PyValueError::new_err(format!(
                "k must be in 1..={}, got {k}",
                self.inner.n()
            )));
        }
        Ok(self.inner.eigenvectors.column(k - 1).iter().copied().collect())
    }

    /// Near-duplicate report for the `k_smallest` smallest eigenvectors:
    /// a list of (eigenvalue, implied_pairs) where each implied pair is
    /// (i, j, correlation), strongest first.
    #[pyo3(signature = (corr, k_smallest=1, dominance=0.25))]
    fn localize_pairs(
        &self,
        corr: &CorrelationMatrix,
        k_smallest: usize,
        dominance: f64,
    ) -> PyResult<Vec<(f64, Vec<(usize, usize, f64)>)>> {
        let reports = spectra::localize_pairs(&self.inner, &corr.inner, k_smallest, dominance)
            .map_err(err)?;
        Ok(reports
            .into_iter()
            .map(|r| {
                let pairs = r
                    .implied_pairs
                    .into_iter()
                    .map(|((i, j), c)| (i, j, c))
                    .collect();
                (r.eigenvalue, pairs)
            })
            .collect())
    }

    /// Portfolio weighted by the k-th eigenvector (k = 0 is the uniform
    /// 1/N benchmark), with its return series and fit against the
    /// cross-sectional mean.
    fn eigenportfolio(&self, returns: &ReturnPanel, k: usize) -> PyResult<Eigenportfolio> {
        let inner = if k == 0 {
            uniform_portfolio(&returns.inner)
        } else {
            portfolio::eigenportfolio(&self.inner, &returns.inner, k).map_err(err)?
        };
        Ok(Eigenportfolio { inner })
    }

    fn __repr__(&self) -> String {
        let d = bulk_deviation_report(&self.inner);
        format!(
            "Spectrum({} eigenvalues: {} above, {} bulk, {} below)",
            self.inner.n(),
            d.above,
            d.bulk,
            d.below
        )
    }
}

/// Consensus clustering outcome.
#[pyclass(frozen)]
struct Partition {
    inner: seriation::ConsensusResult,
}

#[pymethods]
impl Partition {
    /// 1-based cluster id per series, in original order.
    #[getter]
    fn assignment(&self) -> Vec<usize> {
        self.inner.partition.assignment.clone()
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.partition.k
    }

    #[getter]
    fn score(&self) -> f64 {
        self.inner.partition.score
    }

    /// Seriation permutation the clusters are contiguous under.
    #[getter]
    fn ordering(&self) -> Vec<usize> {
        self.inner.partition.ordering.perm.clone()
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.converged
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations
    }

    /// First-level co-assignment frequencies.
    fn affinity(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.affinity.a)
    }

    fn __repr__(&self) -> String {
        format!(
            "Partition(k={}, converged={})",
            self.inner.partition.k, self.inner.converged
        )
    }
}

/// Eigenvector-weighted portfolio and its return series.
#[pyclass(frozen)]
struct Eigenportfolio {
    inner: portfolio::Eigenportfolio,
}

#[pymethods]
impl Eigenportfolio {
    #[getter]
    fn k(&self) -> usize {
        self.inner.k
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.weights.clone()
    }

    #[getter]
    fn returns(&self) -> Vec<f64> {
        self.inner.returns.clone()
    }

    #[getter]
    fn r_squared(&self) -> f64 {
        self.inner.r_squared
    }

    /// Compound the portfolio's returns into a price-like index starting
    /// at `base`.
    fn index_values(&self, base: f64) -> PyResult<Vec<f64>> {
        Ok(build_index(&self.inner, base).map_err(err)?.values)
    }

    /// Compare the compounded index against holding the panel's average
    /// series: (terminal_ratio, dominance_fraction, ln_correlation).
    /// `base` defaults to the first average price. Requires 1-row
    /// returns so index and prices share dates.
    #[pyo3(signature = (prices, base=None))]
    fn buy_and_hold(&self, prices: &PricePanel, base: Option<f64>) -> PyResult<(f64, f64, f64)> {
        let base = base.unwrap_or_else(|| prices.inner.average_prices()[0]);
        let index = build_index(&self.inner, base).map_err(err)?;
        let report = buy_and_hold_report(&index, &prices.inner).map_err(err)?;
        Ok((
            report.terminal_ratio,
            report.dominance_fraction,
            report.ln_correlation,
        ))
    }

    fn __repr__(&self) -> String {
        format!(
            "Eigenportfolio(k={}, r_squared={:.4})",
            self.inner.k, self.inner.r_squared
        )
    }
}

/// Noise-bulk edges for T samples of N series: (lambda_min, lambda_max).
#[pyfunction]
#[pyo3(signature = (t, n, sigma2=1.0))]
fn mp_bounds(t: usize, n: usize, sigma2: f64) -> PyResult<(f64, f64)> {
    let b = spectra::mp_bounds(t, n, sigma2).map_err(err)?;
    Ok((b.lambda_min, b.lambda_max))
}

/// Chance-corrected agreement of two cluster assignments in [-1, 1].
#[pyfunction]
fn adjusted_rand_index(a: Vec<usize>, b: Vec<usize>) -> PyResult<f64> {
    if a.len() != b.len() {
        return Err(PyValueError::new_err(format!(
            "assignments differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(seriation::adjusted_rand_index(&a, &b))
}

fn compound(
    raw: nalgebra::DMatrix<f64>,
    start_date: &str,
    start_price: f64,
    scale: f64,
) -> PyResult<PricePanel> {
    let date = start_date
        .parse::<NaiveDate>()
        .map_err(|e| PyValueError::new_err(format!("bad start date {start_date:?}: {e}")))?;
    let labels = synth::default_labels(raw.ncols());
    let inner = synth::to_price_panel(&raw, &labels, date, start_price, scale).map_err(err)?;
    Ok(PricePanel { inner })
}

/// Pure-noise price panel: t independent standard-normal return rows for
/// n series, compounded from start_price.
#[pyfunction]
#[pyo3(signature = (t, n, seed, start_date="2015-01-01", start_price=100.0, scale=0.01))]
fn synth_noise(
    t: usize,
    n: usize,
    seed: u64,
    start_date: &str,
    start_price: f64,
    scale: f64,
) -> PyResult<PricePanel> {
    compound(
        synth::generate_noise_panel(t, n, seed).map_err(err)?,
        start_date,
        start_price,
        scale,
    )
}

/// Block-correlated panel; returns (prices, cluster_labels) with 1-based
/// ground-truth labels.
#[pyfunction]
#[pyo3(signature = (sizes, intra, inter, t, seed, start_date="2015-01-01", start_price=100.0, scale=0.01))]
#[allow(clippy::too_many_arguments)]
fn synth_block(
    sizes: Vec<usize>,
    intra: f64,
    inter: f64,
    t: usize,
    seed: u64,
    start_date: &str,
    start_price: f64,
    scale: f64,
) -> PyResult<(PricePanel, Vec<usize>)> {
    let spec = synth::BlockModelSpec::with_uniform_inter(sizes, intra, inter, t, seed);
    let (raw, truth) = synth::generate_block_panel(&spec).map_err(err)?;
    Ok((compound(raw, start_date, start_price, scale)?, truth))
}

/// The standard 71-series six-block panel; returns (prices, labels).
#[pyfunction]
#[pyo3(signature = (seed, start_date="2015-01-01", start_price=100.0, scale=0.01))]
fn synth_paper71(
    seed: u64,
    start_date: &str,
    start_price: f64,
    scale: f64,
) -> PyResult<(PricePanel, Vec<usize>)> {
    let spec = synth::BlockModelSpec::standard71(seed);
    let (raw, truth) = synth::generate_block_panel(&spec).map_err(err)?;
    Ok((compound(raw, start_date, start_price, scale)?, truth))
}

/// Weak background with one planted near-duplicate pair; returns
/// (prices, (i, j)).
#[pyfunction]
#[pyo3(signature = (n, t, pair_corr, seed, start_date="2015-01-01", start_price=100.0, scale=0.01))]
#[allow(clippy::too_many_arguments)]
fn synth_pair(
    n: usize,
    t: usize,
    pair_corr: f64,
    seed: u64,
    start_date: &str,
    start_price: f64,
    scale: f64,
) -> PyResult<(PricePanel, (usize, usize))> {
    let (raw, pair) = synth::generate_duplicate_pair_panel(n, t, pair_corr, seed).map_err(err)?;
    Ok((compound(raw, start_date, start_price, scale)?, pair))
}

/// One-factor market with loadings in [beta_low, beta_high] and noise
/// calibrated so the mean pairwise correlation hits mean_corr. A nonzero
/// drift_rate adds a rise-then-fall trend to the factor.
#[pyfunction]
#[pyo3(signature = (n, t, mean_corr, seed, beta_low=0.5, beta_high=1.5, drift_rate=0.0, start_date="2015-01-01", start_price=100.0, scale=0.01))]
#[allow(clippy::too_many_arguments)]
fn synth_factor(
    n: usize,
    t: usize,
    mean_corr: f64,
    seed: u64,
    beta_low: f64,
    beta_high: f64,
    drift_rate: f64,
    start_date: &str,
    start_price: f64,
    scale: f64,
) -> PyResult<PricePanel> {
    let betas = synth::random_betas(n, beta_low, beta_high, seed).map_err(err)?;
    let idio_sigma = synth::calibrate_idio_sigma(&betas, mean_corr).map_err(err)?;
    let drift = (drift_rate != 0.0).then(|| synth::bubble_drift(t, drift_rate));
    let raw = synth::generate_factor_panel(&synth::FactorModelSpec {
        n,
        t,
        betas,
        idio_sigma,
        factor_drift: drift,
        seed,
    })
    .map_err(err)?;
    compound(raw, start_date, start_price, scale)
}

#[pymodule]
fn panelcorr(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PricePanel>()?;
    m.add_class::<ReturnPanel>()?;
    m.add_class::<CorrelationMatrix>()?;
    m.add_class::<Spectrum>()?;
    m.add_class::<Partition>()?;
    m.add_class::<Eigenportfolio>()?;
    m.add_function(wrap_pyfunction!(mp_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(adjusted_rand_index, m)?)?;
    m.add_function(wrap_pyfunction!(synth_noise, m)?)?;
    m.add_function(wrap_pyfunction!(synth_block, m)?)?;
    m.add_function(wrap_pyfunction!(synth_paper71, m)?)?;
    m.add_function(wrap_pyfunction!(synth_pair, m)?)?;
    m.add_function(wrap_pyfunction!(synth_factor, m)?)?;
    Ok(())
}
