//! Command-line front end of the pipeline.
//!
//! Every subcommand reads files, writes files, and records what it did in
//! a `manifest.json`, so each stage can be re-run (or replaced by a test
//! fixture) in isolation. Exit codes: 0 success, 2 bad input or
//! parameters, 3 numerical failure, 4 clustering stopped at the
//! iteration cap without converging (a soft failure unless `--strict`
//! hardens it to 3). On failure the output directory contains an
//! `error.log` naming the stage that failed and nothing else from the
//! failed stage.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use panelcorr_core::ingest::Layout;
use panelcorr_core::seriation::AnnealingConfig;

#[derive(Parser)]
#[command(
    name = "panelcorr",
    version,
    about = "Correlation-panel analysis: cleaning, spectra, clustering, indices"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Load a delimited price panel, repair and align it, and write
    /// log-returns with a cleaning sidecar.
    Ingest(IngestArgs),
    /// Correlation matrix and coefficient histogram of a return panel.
    Correlate(CorrelateArgs),
    /// Eigendecompose a correlation matrix and classify the spectrum
    /// against the noise bulk.
    Spectrum(SpectrumArgs),
    /// Reorder and cut a correlation matrix into clusters by consensus
    /// over repeated annealing runs.
    Cluster(ClusterArgs),
    /// Eigenportfolio weights, return series, and fit against the
    /// cross-sectional mean.
    Portfolio(PortfolioArgs),
    /// Compound a portfolio into a price-like index and compare it with
    /// buying and holding the average series.
    Index(IndexArgs),
    /// Generate a synthetic price panel with known ground truth.
    Synth(SynthArgs),
    /// Run every stage end to end and write a single manifest.
    Pipeline(PipelineArgs),
}

impl Command {
    fn out_dir(&self) -> &PathBuf {
        match self {
            Command::Ingest(a) => &a.out_dir,
            Command::Correlate(a) => &a.out_dir,
            Command::Spectrum(a) => &a.out_dir,
            Command::Cluster(a) => &a.out_dir,
            Command::Portfolio(a) => &a.out_dir,
            Command::Index(a) => &a.out_dir,
            Command::Synth(a) => &a.out_dir,
            Command::Pipeline(a) => &a.out_dir,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum LayoutArg {
    /// One date column plus one price column per series.
    Wide,
    /// Three columns: date, label, price.
    Long,
}

impl From<LayoutArg> for Layout {
    fn from(l: LayoutArg) -> Layout {
        match l {
            LayoutArg::Wide => Layout::Wide,
            LayoutArg::Long => Layout::Long,
        }
    }
}

impl LayoutArg {
    fn name(&self) -> &'static str {
        match self {
            LayoutArg::Wide => "wide",
            LayoutArg::Long => "long",
        }
    }
}

/// Annealing schedule knobs shared by `cluster` and `pipeline`. Defaults
/// mirror `AnnealingConfig::default()`.
#[derive(Args, Debug, Clone)]
pub struct AnnealArgs {
    /// Uphill acceptance rate targeted when calibrating the start
    /// temperature.
    #[arg(long, default_value_t = 0.8)]
    pub initial_acceptance: f64,

    /// Geometric cooling factor applied per temperature step.
    #[arg(long, default_value_t = 0.96)]
    pub cooling: f64,

    /// Moves tried per temperature, as a multiple of the matrix size.
    #[arg(long, default_value_t = 12)]
    pub proposals_per_site: usize,

    /// Stop after this many consecutive temperatures without an
    /// effective accepted move.
    #[arg(long, default_value_t = 5)]
    pub stall_temps: usize,

    /// Hard cap on temperature steps per run.
    #[arg(long, default_value_t = 400)]
    pub max_temps: usize,

    /// Stop once the temperature falls below this fraction of the start.
    #[arg(long, default_value_t = 1e-4)]
    pub temp_floor: f64,
}

impl AnnealArgs {
    fn to_config(&self) -> AnnealingConfig {
        AnnealingConfig {
            initial_acceptance: self.initial_acceptance,
            cooling: self.cooling,
            proposals_per_site: self.proposals_per_site,
            stall_temps: self.stall_temps,
            max_temps: self.max_temps,
            temp_floor: self.temp_floor,
        }
    }

    fn echo(&self) -> serde_json::Value {
        serde_json::json!({
            "initial_acceptance": self.initial_acceptance,
            "cooling": self.cooling,
            "proposals_per_site": self.proposals_per_site,
            "stall_temps": self.stall_temps,
            "max_temps": self.max_temps,
            "temp_floor": self.temp_floor,
        })
    }
}

#[derive(Args)]
pub struct IngestArgs {
    /// Delimited price panel to load.
    #[arg(long)]
    pub input: PathBuf,

    /// Input file layout.
    #[arg(long, value_enum, default_value_t = LayoutArg::Wide)]
    pub layout: LayoutArg,

    /// Return horizon in rows: r(t) = ln P(t) − ln P(t − delta_t rows).
    #[arg(long, default_value_t = 1)]
    pub delta_t: usize,

    /// Returns larger than this in magnitude are treated as data errors
    /// and zeroed (recorded in the sidecar).
    #[arg(long, default_value_t = 0.40)]
    pub clip_threshold: f64,

    /// Directory for `returns.csv`, `returns_meta.json`, `manifest.json`.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args)]
pub struct CorrelateArgs {
    /// Return panel CSV written by `ingest`.
    #[arg(long)]
    pub returns: PathBuf,

    /// Sidecar JSON written next to the return panel.
    #[arg(long)]
    pub meta: PathBuf,

    /// Histogram bins for the coefficient distribution.
    #[arg(long, default_value_t = 50)]
    pub bins: usize,

    /// Directory for the correlation matrix, histogram, and manifest.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args)]
pub struct SpectrumArgs {
    /// Correlation JSON written by `correlate`.
    #[arg(long)]
    pub correlation: PathBuf,

    /// Noise variance assumed for the bulk (1 for standardized returns).
    #[arg(long, default_value_t = 1.0)]
    pub sigma2: f64,

    /// Histogram bins for the eigenvalue distribution.
    #[arg(long, default_value_t = 50)]
    pub bins: usize,

    /// Grid points for the reference density curve.
    #[arg(long, default_value_t = 200)]
    pub curve_points: usize,

    /// Inspect this many smallest eigenvectors for near-duplicate pairs
    /// (0 disables the report).
    #[arg(long, default_value_t = 0)]
    pub localize: usize,

    /// Component magnitude above which an eigenvector entry counts as
    /// dominant in the localization report.
    #[arg(long, default_value_t = 0.25)]
    pub dominance: f64,

    /// Directory for the spectrum report, plot files, and manifest.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args)]
pub struct ClusterArgs {
    /// Correlation JSON written by `correlate`.
    #[arg(long)]
    pub correlation: PathBuf,

    /// Master seed for the stochastic search (required: runs must be
    /// reproducible).
    #[arg(long)]
    pub seed: u64,

    /// Annealing runs aggregated per consensus round.
    #[arg(long, default_value_t = 200)]
    pub n_runs: usize,

    /// Cap on consensus rounds before giving up on convergence.
    #[arg(long, default_value_t = 50)]
    pub max_iterations: usize,

    /// Resolution of the block segmentation: larger values demand denser
    /// blocks and so yield more, smaller clusters.
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,

    #[command(flatten)]
    pub anneal: AnnealArgs,

    /// Treat non-convergence as a hard failure (exit 3 instead of 4).
    #[arg(long)]
    pub strict: bool,

    /// Directory for the partition, affinity matrix, and manifest.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args)]
pub struct PortfolioArgs {
    /// Return panel CSV written by `ingest`.
    #[arg(long)]
    pub returns: PathBuf,

    /// Sidecar JSON written next to the return panel.
    #[arg(long)]
    pub meta: PathBuf,

    /// Spectrum JSON written by `spectrum`.
    #[arg(long)]
    pub spectrum: PathBuf,

    /// Which eigenportfolio to build (1 = largest eigenvalue; 0 = the
    /// uniform 1/N benchmark).
    #[arg(long, default_value_t = 1)]
    pub k: usize,

    /// Directory for the portfolio JSON and manifest.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args)]
pub struct IndexArgs {
    /// Eigenportfolio JSON written by `portfolio` (must come from 1-row
    /// returns so the index aligns with the price dates).
    #[arg(long)]
    pub portfolio: PathBuf,

    /// The price panel the portfolio was built from.
    #[arg(long)]
    pub prices: PathBuf,

    /// Price file layout.
    #[arg(long, value_enum, default_value_t = LayoutArg::Wide)]
    pub layout: LayoutArg,

    /// Starting level of the index; defaults to the first cross-sectional
    /// average price.
    #[arg(long)]
    pub base: Option<f64>,

    /// Clip threshold used when re-deriving returns for the uniform
    /// benchmark (match the value given to `ingest`).
    #[arg(long, default_value_t = 0.40)]
    pub clip_threshold: f64,

    /// Directory for the index CSV, summary, and manifest.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum Scenario {
    /// Independent standard-normal returns: a pure-noise panel.
    Noise,
    /// 71 series in six correlated blocks (sizes 8,7,13,5,31,7; intra
    /// 0.9, inter 0.25), 5272 prices.
    Paper71,
    /// 71 series in six blocks with two between-block levels, so the
    /// coefficient histogram shows three peaks.
    Trimodal,
    /// Custom block model: --sizes, --intra, --inter.
    Block,
    /// One-factor market with loadings in [--beta-low, --beta-high] and
    /// noise calibrated so the mean correlation hits --mean-corr.
    Factor,
    /// The factor market with a rise-then-fall drift in the factor.
    Bubble,
    /// Weakly coupled background with one planted near-duplicate pair.
    Pair,
}

impl Scenario {
    fn name(&self) -> &'static str {
        match self {
            Scenario::Noise => "noise",
            Scenario::Paper71 => "paper71",
            Scenario::Trimodal => "trimodal",
            Scenario::Block => "block",
            Scenario::Factor => "factor",
            Scenario::Bubble => "bubble",
            Scenario::Pair => "pair",
        }
    }
}

#[derive(Args)]
pub struct SynthArgs {
    /// Which generator to run.
    #[arg(long, value_enum)]
    pub scenario: Scenario,

    /// Generator seed (required: panels must be reproducible).
    #[arg(long)]
    pub seed: u64,

    /// Number of series (ignored by paper71/trimodal/block, which fix it).
    #[arg(long)]
    pub n: Option<usize>,

    /// Number of return rows (ignored by paper71/trimodal, which fix it).
    #[arg(long)]
    pub t: Option<usize>,

    /// Block sizes for --scenario block, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Vec<usize>,

    /// Within-block correlation for --scenario block.
    #[arg(long, default_value_t = 0.9)]
    pub intra: f64,

    /// Between-block correlation for --scenario block.
    #[arg(long, default_value_t = 0.25)]
    pub inter: f64,

    /// Planted correlation for --scenario pair.
    #[arg(long, default_value_t = 0.999)]
    pub pair_corr: f64,

    /// Mean-correlation target for --scenario factor/bubble.
    #[arg(long, default_value_t = 0.57)]
    pub mean_corr: f64,

    /// Smallest factor loading for --scenario factor/bubble.
    #[arg(long, default_value_t = 0.5)]
    pub beta_low: f64,

    /// Largest factor loading for --scenario factor/bubble.
    #[arg(long, default_value_t = 1.5)]
    pub beta_high: f64,

    /// Per-step factor drift for --scenario bubble (sign flips halfway).
    #[arg(long, default_value_t = 0.05)]
    pub drift_rate: f64,

    /// First date of the generated panel.
    #[arg(long, default_value = "2015-01-01")]
    pub start_date: chrono::NaiveDate,

    /// Price every series starts at.
    #[arg(long, default_value_t = 100.0)]
    pub start_price: f64,

    /// Return scale applied when compounding into prices (keeps synthetic
    /// unit-variance returns inside the clip threshold).
    #[arg(long, default_value_t = 0.01)]
    pub scale: f64,

    /// Directory for `prices.csv`, `truth.json`, `manifest.json`.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args)]
pub struct PipelineArgs {
    /// Delimited price panel to analyze.
    #[arg(long)]
    pub input: PathBuf,

    /// Input file layout.
    #[arg(long, value_enum, default_value_t = LayoutArg::Wide)]
    pub layout: LayoutArg,

    /// Return horizon in rows (the index stage only runs at 1, where
    /// compounded returns reproduce a price path).
    #[arg(long, default_value_t = 1)]
    pub delta_t: usize,

    /// Returns larger than this in magnitude are zeroed as data errors.
    #[arg(long, default_value_t = 0.40)]
    pub clip_threshold: f64,

    /// Noise variance assumed for the bulk.
    #[arg(long, default_value_t = 1.0)]
    pub sigma2: f64,

    /// Histogram bins (coefficients and eigenvalues).
    #[arg(long, default_value_t = 50)]
    pub bins: usize,

    /// Grid points for the reference density curve.
    #[arg(long, default_value_t = 200)]
    pub curve_points: usize,

    /// Master seed for the stochastic stages (required).
    #[arg(long)]
    pub seed: u64,

    /// Annealing runs aggregated per consensus round.
    #[arg(long, default_value_t = 200)]
    pub n_runs: usize,

    /// Cap on consensus rounds before giving up on convergence.
    #[arg(long, default_value_t = 50)]
    pub max_iterations: usize,

    /// Resolution of the block segmentation.
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,

    /// Which eigenportfolio to build and compound.
    #[arg(long, default_value_t = 1)]
    pub k: usize,

    /// Starting level of the index; defaults to the first cross-sectional
    /// average price.
    #[arg(long)]
    pub base: Option<f64>,

    /// Inspect this many smallest eigenvectors for near-duplicate pairs.
    #[arg(long, default_value_t = 0)]
    pub localize: usize,

    /// Dominance threshold for the localization report.
    #[arg(long, default_value_t = 0.25)]
    pub dominance: f64,

    #[command(flatten)]
    pub anneal: AnnealArgs,

    /// Treat non-convergence as a hard failure (exit 3 instead of 4).
    #[arg(long)]
    pub strict: bool,

    /// Directory for all artifacts and the manifest.
    #[arg(long)]
    pub out_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out_dir = cli.command.out_dir().clone();
    match commands::dispatch(&cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            let line = format!("[{}] {}", failure.stage, failure.error);
            eprintln!("error: {line}");
            if std::fs::create_dir_all(&out_dir).is_ok() {
                let _ = std::fs::write(out_dir.join("error.log"), format!("{line}\n"));
            }
            ExitCode::from(failure.exit_code())
        }
    }
}
