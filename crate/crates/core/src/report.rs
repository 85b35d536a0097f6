//! File formats for every pipeline artifact.
//!
//! All writers are deterministic: fixed column and field orders, floats
//! rendered with the shortest round-trippable representation, no
//! timestamps. Running the same configuration twice produces
//! byte-identical files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::correlation::{CoefficientHistogram, CorrelationMatrix};
use crate::ingest::{ClipRecord, FillRecord, PricePanel, ReturnPanel};
use crate::portfolio::{BuyAndHoldReport, Eigenportfolio};
use crate::seriation::{AffinityMatrix, ConsensusResult};
use crate::spectra::{EigenClass, MPBounds, PairLocalization, SpectralDecomposition};
use crate::{Error, Result};

fn writer(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = writer(path)?;
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| Error::Parse(format!("serializing {}: {e}", path.display())))?;
    writeln!(w)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let f = File::open(path)?;
    serde_json::from_reader(BufReader::new(f))
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn parse_f64(s: &str, path: &Path) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| Error::Parse(format!("{}: bad number {s:?}: {e}", path.display())))
}

fn parse_date(s: &str, path: &Path) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
        .map_err(|e| Error::Parse(format!("{}: bad date {s:?}: {e}", path.display())))
}

// ---------------------------------------------------------------------
// Price and return panels
// ---------------------------------------------------------------------

/// Wide CSV: `date,<label>,...`, one row per date.
pub fn write_price_panel(path: &Path, panel: &PricePanel) -> Result<()> {
    let mut w = writer(path)?;
    write!(w, "date")?;
    for l in &panel.labels {
        write!(w, ",{l}")?;
    }
    writeln!(w)?;
    for (t, date) in panel.dates.iter().enumerate() {
        write!(w, "{date}")?;
        for i in 0..panel.n_series() {
            write!(w, ",{}", panel.prices[(t, i)])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Wide CSV of returns: `date,<label>,...`.
pub fn write_return_panel(path: &Path, panel: &ReturnPanel) -> Result<()> {
    let mut w = writer(path)?;
    write!(w, "date")?;
    for l in &panel.labels {
        write!(w, ",{l}")?;
    }
    writeln!(w)?;
    for (t, date) in panel.dates.iter().enumerate() {
        write!(w, "{date}")?;
        for i in 0..panel.labels.len() {
            write!(w, ",{}", panel.returns[(t, i)])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Sidecar for a returns file: the horizon, per-series moments, and the
/// repair/clip logs accumulated upstream.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReturnMeta {
    pub labels: Vec<String>,
    pub delta_t: usize,
    pub clip_threshold: f64,
    pub means: Vec<f64>,
    pub stddevs: Vec<f64>,
    pub n_clipped: usize,
    pub clipped: Vec<ClipRecord>,
    pub n_filled: usize,
    pub fill_log: Vec<FillRecord>,
}

pub fn write_return_meta(
    path: &Path,
    panel: &ReturnPanel,
    clip_threshold: f64,
    fill_log: &[FillRecord],
) -> Result<()> {
    let meta = ReturnMeta {
        labels: panel.labels.clone(),
        delta_t: panel.delta_t,
        clip_threshold,
        means: panel.means.clone(),
        stddevs: panel.stddevs.clone(),
        n_clipped: panel.clipped.len(),
        clipped: panel.clipped.clone(),
        n_filled: fill_log.len(),
        fill_log: fill_log.to_vec(),
    };
    write_json(path, &meta)
}

/// Read a returns CSV and its sidecar back into a panel.
pub fn read_return_panel(csv_path: &Path, meta_path: &Path) -> Result<(ReturnPanel, ReturnMeta)> {
    let meta: ReturnMeta = read_json(meta_path)?;
    let f = File::open(csv_path)?;
    let mut lines = BufReader::new(f).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse(format!("{}: empty file", csv_path.display())))??;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() != meta.labels.len() + 1 || cols[0] != "date" {
        return Err(Error::Parse(format!(
            "{}: header does not match the sidecar labels",
            csv_path.display()
        )));
    }
    for (c, l) in cols[1..].iter().zip(meta.labels.iter()) {
        if c != l {
            return Err(Error::Parse(format!(
                "{}: column {c:?} does not match sidecar label {l:?}",
                csv_path.display()
            )));
        }
    }
    let mut dates = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for line in lines {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != meta.labels.len() + 1 {
            return Err(Error::Parse(format!(
                "{}: row with {} fields, expected {}",
                csv_path.display(),
                fields.len(),
                meta.labels.len() + 1
            )));
        }
        dates.push(parse_date(fields[0], csv_path)?);
        let row = fields[1..]
            .iter()
            .map(|s| parse_f64(s, csv_path))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse(format!(
            "{}: no data rows",
            csv_path.display()
        )));
    }
    let n = meta.labels.len();
    let returns = DMatrix::from_fn(rows.len(), n, |t, i| rows[t][i]);
    let panel = ReturnPanel {
        dates,
        labels: meta.labels.clone(),
        returns,
        delta_t: meta.delta_t,
        means: meta.means.clone(),
        stddevs: meta.stddevs.clone(),
        clipped: meta.clipped.clone(),
    };
    Ok((panel, meta))
}

// ---------------------------------------------------------------------
// Correlation matrix and histogram
// ---------------------------------------------------------------------

/// Square CSV with a label header row and a label first column.
pub fn write_matrix_csv(path: &Path, labels: &[String], m: &DMatrix<f64>) -> Result<()> {
    let mut w = writer(path)?;
    write!(w, "label")?;
    for l in labels {
        write!(w, ",{l}")?;
    }
    writeln!(w)?;
    for (i, l) in labels.iter().enumerate() {
        write!(w, "{l}")?;
        for j in 0..labels.len() {
            write!(w, ",{}", m[(i, j)])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn write_correlation_csv(path: &Path, c: &CorrelationMatrix) -> Result<()> {
    write_matrix_csv(path, &c.labels, &c.c)
}

/// JSON form of a correlation matrix (row-major entries).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrelationFile {
    pub labels: Vec<String>,
    pub t_effective: usize,
    pub mean_offdiagonal: f64,
    pub rows: Vec<Vec<f64>>,
}

pub fn write_correlation_json(path: &Path, c: &CorrelationMatrix) -> Result<()> {
    let n = c.n();
    let rows = (0..n)
        .map(|i| (0..n).map(|j| c.c[(i, j)]).collect())
        .collect();
    let file = CorrelationFile {
        labels: c.labels.clone(),
        t_effective: c.t_effective,
        mean_offdiagonal: crate::correlation::mean_offdiagonal(c),
        rows,
    };
    write_json(path, &file)
}

pub fn read_correlation_json(path: &Path) -> Result<CorrelationMatrix> {
    let file: CorrelationFile = read_json(path)?;
    let n = file.labels.len();
    if file.rows.len() != n || file.rows.iter().any(|r| r.len() != n) {
        return Err(Error::Parse(format!(
            "{}: matrix is not {n}x{n}",
            path.display()
        )));
    }
    let c = DMatrix::from_fn(n, n, |i, j| file.rows[i][j]);
    Ok(CorrelationMatrix {
        labels: file.labels,
        c,
        t_effective: file.t_effective,
    })
}

/// Two columns: bin_center,density.
pub fn write_histogram_csv(path: &Path, h: &CoefficientHistogram) -> Result<()> {
    let mut w = writer(path)?;
    writeln!(w, "bin_center,density")?;
    for (center, d) in h.bin_centers().iter().zip(h.densities.iter()) {
        writeln!(w, "{center},{d}")?;
    }
    Ok(())
}

// ---------------------------------------------------------------------
// Spectrum
// ---------------------------------------------------------------------

/// JSON form of a spectral decomposition. `eigenvectors[k]` holds the
/// components of the k-th eigenvector (sorted by descending eigenvalue).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumFile {
    pub labels: Vec<String>,
    pub bounds: MPBounds,
    pub eigenvalues: Vec<f64>,
    pub classes: Vec<EigenClass>,
    pub above: usize,
    pub bulk: usize,
    pub below: usize,
    pub lambda1_over_n: f64,
    pub eigenvectors: Vec<Vec<f64>>,
}

pub fn write_spectrum_json(
    path: &Path,
    labels: &[String],
    d: &SpectralDecomposition,
) -> Result<()> {
    let report = crate::spectra::bulk_deviation_report(d);
    let n = d.n();
    let eigenvectors = (0..n)
        .map(|k| (0..n).map(|i| d.eigenvectors[(i, k)]).collect())
        .collect();
    let file = SpectrumFile {
        labels: labels.to_vec(),
        bounds: d.bounds,
        eigenvalues: d.eigenvalues.clone(),
        classes: d.classes.clone(),
        above: report.above,
        bulk: report.bulk,
        below: report.below,
        lambda1_over_n: report.lambda1_over_n,
        eigenvectors,
    };
    write_json(path, &file)
}

pub fn read_spectrum_json(path: &Path) -> Result<(Vec<String>, SpectralDecomposition)> {
    let file: SpectrumFile = read_json(path)?;
    let n = file.eigenvalues.len();
    if file.labels.len() != n
        || file.classes.len() != n
        || file.eigenvectors.len() != n
        || file.eigenvectors.iter().any(|v| v.len() != n)
    {
        return Err(Error::Parse(format!(
            "{}: inconsistent spectrum dimensions",
            path.display()
        )));
    }
    let eigenvectors = DMatrix::from_fn(n, n, |i, k| file.eigenvectors[k][i]);
    Ok((
        file.labels,
        SpectralDecomposition {
            eigenvalues: file.eigenvalues,
            eigenvectors,
            bounds: file.bounds,
            classes: file.classes,
        },
    ))
}

/// Histogram of observed eigenvalues: bin_center,density over
/// [0, 1.02·max(λ_1, bound λ_max)].
pub fn write_eigenvalue_histogram_csv(
    path: &Path,
    d: &SpectralDecomposition,
    n_bins: usize,
) -> Result<()> {
    if n_bins == 0 {
        return Err(Error::InvalidParameter("histogram needs at least one bin".into()));
    }
    let top = 1.02 * d.eigenvalues[0].max(d.bounds.lambda_max);
    let width = top / n_bins as f64;
    let mut counts = vec![0usize; n_bins];
    for &v in &d.eigenvalues {
        let mut b = (v / width) as usize;
        if b >= n_bins {
            b = n_bins - 1;
        }
        counts[b] += 1;
    }
    let total = d.eigenvalues.len() as f64;
    let mut w = writer(path)?;
    writeln!(w, "bin_center,density")?;
    for (b, &k) in counts.iter().enumerate() {
        let center = (b as f64 + 0.5) * width;
        let density = k as f64 / (total * width);
        writeln!(w, "{center},{density}")?;
    }
    Ok(())
}

pub fn write_localization_json(path: &Path, reports: &[PairLocalization]) -> Result<()> {
    write_json(path, &reports)
}

pub fn read_localization_json(path: &Path) -> Result<Vec<PairLocalization>> {
    read_json(path)
}

/// The limiting density sampled on a uniform grid across the bulk,
/// endpoints included: lambda,density.
pub fn write_mp_curve_csv(path: &Path, bounds: &MPBounds, n_points: usize) -> Result<()> {
    if n_points < 2 {
        return Err(Error::InvalidParameter("curve needs at least two points".into()));
    }
    let mut w = writer(path)?;
    writeln!(w, "lambda,density")?;
    for k in 0..n_points {
        let frac = k as f64 / (n_points - 1) as f64;
        let lambda = bounds.lambda_min + frac * (bounds.lambda_max - bounds.lambda_min);
        let density = crate::spectra::mp_density(lambda, bounds);
        writeln!(w, "{lambda},{density}")?;
    }
    Ok(())
}

// ---------------------------------------------------------------------
// Clustering
// ---------------------------------------------------------------------

/// JSON form of a consensus clustering result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartitionFile {
    pub labels: Vec<String>,
    /// 1-based cluster id per label, aligned with `labels`.
    pub assignment: Vec<usize>,
    pub k: usize,
    pub score: f64,
    /// Seriation permutation: position -> original index.
    pub ordering: Vec<usize>,
    pub ordered_labels: Vec<String>,
    pub converged: bool,
    pub iterations: usize,
    pub seed: u64,
    pub n_runs: usize,
    pub gamma: f64,
}

pub fn partition_file(
    labels: &[String],
    result: &ConsensusResult,
    seed: u64,
    n_runs: usize,
    gamma: f64,
) -> PartitionFile {
    let p = &result.partition;
    PartitionFile {
        labels: labels.to_vec(),
        assignment: p.assignment.clone(),
        k: p.k,
        score: p.score,
        ordering: p.ordering.perm.clone(),
        ordered_labels: p.ordering.perm.iter().map(|&i| labels[i].clone()).collect(),
        converged: result.converged,
        iterations: result.iterations,
        seed,
        n_runs,
        gamma,
    }
}

pub fn write_partition_json(path: &Path, file: &PartitionFile) -> Result<()> {
    write_json(path, file)
}

pub fn read_partition_json(path: &Path) -> Result<PartitionFile> {
    read_json(path)
}

/// Two columns: label,cluster (original label order).
pub fn write_partition_csv(path: &Path, labels: &[String], assignment: &[usize]) -> Result<()> {
    let mut w = writer(path)?;
    writeln!(w, "label,cluster")?;
    for (l, c) in labels.iter().zip(assignment.iter()) {
        writeln!(w, "{l},{c}")?;
    }
    Ok(())
}

pub fn write_affinity_csv(path: &Path, labels: &[String], a: &AffinityMatrix) -> Result<()> {
    write_matrix_csv(path, labels, &a.a)
}

/// The correlation matrix permuted into cluster order, labels permuted to
/// match.
pub fn write_reordered_correlation_csv(
    path: &Path,
    c: &CorrelationMatrix,
    ordering: &[usize],
) -> Result<()> {
    let labels: Vec<String> = ordering.iter().map(|&i| c.labels[i].clone()).collect();
    let n = ordering.len();
    let m = DMatrix::from_fn(n, n, |i, j| c.c[(ordering[i], ordering[j])]);
    write_matrix_csv(path, &labels, &m)
}

// ---------------------------------------------------------------------
// Portfolios and indices
// ---------------------------------------------------------------------

/// JSON form of an eigenportfolio.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenportfolioFile {
    pub k: usize,
    pub r_squared: f64,
    pub labels: Vec<String>,
    pub weights: Vec<f64>,
    pub dates: Vec<NaiveDate>,
    pub returns: Vec<f64>,
}

pub fn eigenportfolio_file(panel: &ReturnPanel, p: &Eigenportfolio) -> EigenportfolioFile {
    EigenportfolioFile {
        k: p.k,
        r_squared: p.r_squared,
        labels: panel.labels.clone(),
        weights: p.weights.clone(),
        dates: panel.dates.clone(),
        returns: p.returns.clone(),
    }
}

pub fn write_eigenportfolio_json(path: &Path, file: &EigenportfolioFile) -> Result<()> {
    write_json(path, file)
}

pub fn read_eigenportfolio_json(path: &Path) -> Result<EigenportfolioFile> {
    read_json(path)
}

/// Plot-ready comparison: date,index,average_price.
pub fn write_index_csv(path: &Path, report: &BuyAndHoldReport) -> Result<()> {
    let mut w = writer(path)?;
    writeln!(w, "date,index,average_price")?;
    for t in 0..report.dates.len() {
        writeln!(
            w,
            "{},{},{}",
            report.dates[t], report.index_values[t], report.average_prices[t]
        )?;
    }
    Ok(())
}

/// Summary statistics of an index against the average price.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndexSummary {
    pub portfolio_k: usize,
    pub base: f64,
    pub r_squared: f64,
    pub terminal_ratio: f64,
    pub dominance_fraction: f64,
    pub ln_correlation: f64,
    /// Terminal level of this index divided by the uniform benchmark's.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub benchmark_terminal_ratio: Option<f64>,
}

pub fn write_index_summary_json(path: &Path, summary: &IndexSummary) -> Result<()> {
    write_json(path, summary)
}

pub fn read_index_summary_json(path: &Path) -> Result<IndexSummary> {
    read_json(path)
}

// ---------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------

/// Headline numbers for a run; each stage fills the fields it produced.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct Headline {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_series: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_effective: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_correlation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub above: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bulk: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub below: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda1_over_n: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_clusters: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_squared: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub terminal_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dominance_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ln_correlation: Option<f64>,
}

/// Top-level record of one command invocation: the configuration it ran
/// with, the headline numbers, and the files it wrote.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Manifest {
    pub schema_version: u32,
    pub command: String,
    pub config: serde_json::Value,
    pub headline: Headline,
    /// File names relative to the output directory, sorted.
    pub artifacts: Vec<String>,
}

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

impl Manifest {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        Manifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            command: command.to_string(),
            config,
            headline: Headline::default(),
            artifacts: Vec::new(),
        }
    }

    pub fn add_artifact(&mut self, name: &str) {
        self.artifacts.push(name.to_string());
    }

    pub fn finish(&mut self) {
        self.artifacts.sort();
        self.artifacts.dedup();
    }
}

pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    write_json(path, manifest)
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    read_json(path)
}
