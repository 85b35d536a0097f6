//! One function per subcommand, plus the shared artifact plumbing.
//!
//! Commands follow a common shape: read inputs, compute, write artifacts,
//! then write the manifest last, so a manifest's presence means the stage
//! finished. Failures carry the stage they happened in.

use std::path::Path;

use panelcorr_core::correlation::{
    coefficient_histogram, correlation_from_returns, mean_offdiagonal, CorrelationMatrix,
};
use panelcorr_core::ingest::{compute_returns, load_panel, PricePanel, ReturnPanel};
use panelcorr_core::portfolio::{
    build_index, buy_and_hold_report, eigenportfolio, uniform_portfolio, Eigenportfolio,
};
use panelcorr_core::report::{self, Manifest};
use panelcorr_core::seriation::{consensus_cluster, ConsensusConfig, ConsensusResult};
use panelcorr_core::spectra::{
    bulk_deviation_report, eigendecompose, localize_pairs, mp_bounds, DeviationReport,
    SpectralDecomposition,
};
use panelcorr_core::synth::{
    bubble_drift, calibrate_idio_sigma, default_labels, generate_block_panel,
    generate_duplicate_pair_panel, generate_factor_panel, generate_noise_panel, random_betas,
    to_price_panel, BlockModelSpec, FactorModelSpec,
};
use panelcorr_core::Error;
use serde::Serialize;

use crate::{
    ClusterArgs, Command, CorrelateArgs, IndexArgs, IngestArgs, PipelineArgs, PortfolioArgs,
    Scenario, SpectrumArgs, SynthArgs,
};

/// An error plus the pipeline stage it happened in.
pub struct Failure {
    pub stage: &'static str,
    pub error: Error,
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        if self.error.is_input_error() {
            2
        } else {
            3
        }
    }
}

trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T, Failure>;
}

impl<T> StageExt<T> for panelcorr_core::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T, Failure> {
        self.map_err(|error| Failure { stage, error })
    }
}

pub fn dispatch(cmd: &Command) -> Result<u8, Failure> {
    match cmd {
        Command::Ingest(a) => cmd_ingest(a),
        Command::Correlate(a) => cmd_correlate(a),
        Command::Spectrum(a) => cmd_spectrum(a),
        Command::Cluster(a) => cmd_cluster(a),
        Command::Portfolio(a) => cmd_portfolio(a),
        Command::Index(a) => cmd_index(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Pipeline(a) => cmd_pipeline(a),
    }
}

fn ensure_dir(dir: &Path) -> panelcorr_core::Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn write_json_file<T: Serialize>(path: &Path, value: &T) -> panelcorr_core::Result<()> {
    use std::io::Write;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| Error::Parse(format!("serializing {}: {e}", path.display())))?;
    writeln!(w)?;
    Ok(())
}

/// Shared tail of `cluster` and `pipeline`: success, soft failure (exit
/// 4), or a hard failure under --strict.
fn convergence_exit(
    result: &ConsensusResult,
    strict: bool,
    max_iterations: usize,
) -> Result<u8, Failure> {
    if result.converged {
        return Ok(0);
    }
    let message = format!("consensus affinity still changing after {max_iterations} rounds");
    if strict {
        return Err(Failure { stage: "cluster", error: Error::Numerical(message) });
    }
    eprintln!("warning: [cluster] {message}; wrote the last round's partition");
    Ok(4)
}

// ---------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------

fn cmd_ingest(a: &IngestArgs) -> Result<u8, Failure> {
    let panel = load_panel(&a.input, a.layout.into()).stage("ingest")?;
    let returns = compute_returns(&panel, a.delta_t, a.clip_threshold).stage("ingest")?;

    ensure_dir(&a.out_dir).stage("report")?;
    write_return_artifacts(&a.out_dir, &panel, &returns, a.clip_threshold).stage("report")?;

    let mut manifest = Manifest::new(
        "ingest",
        serde_json::json!({
            "input": a.input.display().to_string(),
            "layout": a.layout.name(),
            "delta_t": a.delta_t,
            "clip_threshold": a.clip_threshold,
        }),
    );
    manifest.headline.n_series = Some(returns.n_series());
    manifest.headline.t_effective = Some(returns.n_samples());
    manifest.add_artifact("returns.csv");
    manifest.add_artifact("returns_meta.json");
    finish_manifest(&a.out_dir, manifest)?;
    Ok(0)
}

fn write_return_artifacts(
    dir: &Path,
    panel: &PricePanel,
    returns: &ReturnPanel,
    clip_threshold: f64,
) -> panelcorr_core::Result<()> {
    report::write_return_panel(&dir.join("returns.csv"), returns)?;
    report::write_return_meta(
        &dir.join("returns_meta.json"),
        returns,
        clip_threshold,
        &panel.fill_log,
    )
}

// ---------------------------------------------------------------------
// correlate
// ---------------------------------------------------------------------

fn cmd_correlate(a: &CorrelateArgs) -> Result<u8, Failure> {
    let (panel, _meta) = report::read_return_panel(&a.returns, &a.meta).stage("correlate")?;
    let c = correlation_from_returns(&panel).stage("correlate")?;

    ensure_dir(&a.out_dir).stage("report")?;
    write_correlation_artifacts(&a.out_dir, &c, a.bins).stage("report")?;

    let mut manifest = Manifest::new(
        "correlate",
        serde_json::json!({
            "returns": a.returns.display().to_string(),
            "meta": a.meta.display().to_string(),
            "bins": a.bins,
        }),
    );
    manifest.headline.n_series = Some(c.n());
    manifest.headline.t_effective = Some(c.t_effective);
    manifest.headline.mean_correlation = Some(mean_offdiagonal(&c));
    manifest.add_artifact("correlation.csv");
    manifest.add_artifact("correlation.json");
    manifest.add_artifact("coefficient_histogram.csv");
    finish_manifest(&a.out_dir, manifest)?;
    Ok(0)
}

fn write_correlation_artifacts(
    dir: &Path,
    c: &CorrelationMatrix,
    bins: usize,
) -> panelcorr_core::Result<()> {
    report::write_correlation_csv(&dir.join("correlation.csv"), c)?;
    report::write_correlation_json(&dir.join("correlation.json"), c)?;
    let hist = coefficient_histogram(c, bins)?;
    report::write_histogram_csv(&dir.join("coefficient_histogram.csv"), &hist)
}

// ---------------------------------------------------------------------
// spectrum
// ---------------------------------------------------------------------

fn cmd_spectrum(a: &SpectrumArgs) -> Result<u8, Failure> {
    let c = report::read_correlation_json(&a.correlation).stage("spectrum")?;
    let bounds = mp_bounds(c.t_effective, c.n(), a.sigma2).stage("spectrum")?;
    let d = eigendecompose(&c, bounds).stage("spectrum")?;
    let deviations = bulk_deviation_report(&d);

    ensure_dir(&a.out_dir).stage("report")?;
    write_spectrum_artifacts(&a.out_dir, &c, &d, a.bins, a.curve_points).stage("report")?;

    let mut manifest = Manifest::new(
        "spectrum",
        serde_json::json!({
            "correlation": a.correlation.display().to_string(),
            "sigma2": a.sigma2,
            "bins": a.bins,
            "curve_points": a.curve_points,
            "localize": a.localize,
            "dominance": a.dominance,
        }),
    );
    set_spectrum_headline(&mut manifest, &c, &deviations);
    manifest.add_artifact("spectrum.json");
    manifest.add_artifact("eigenvalue_histogram.csv");
    manifest.add_artifact("mp_curve.csv");
    if a.localize > 0 {
        let reports = localize_pairs(&d, &c, a.localize, a.dominance).stage("spectrum")?;
        report::write_localization_json(&a.out_dir.join("localization.json"), &reports)
            .stage("report")?;
        manifest.add_artifact("localization.json");
    }
    finish_manifest(&a.out_dir, manifest)?;
    Ok(0)
}

fn write_spectrum_artifacts(
    dir: &Path,
    c: &CorrelationMatrix,
    d: &SpectralDecomposition,
    bins: usize,
    curve_points: usize,
) -> panelcorr_core::Result<()> {
    report::write_spectrum_json(&dir.join("spectrum.json"), &c.labels, d)?;
    report::write_eigenvalue_histogram_csv(&dir.join("eigenvalue_histogram.csv"), d, bins)?;
    report::write_mp_curve_csv(&dir.join("mp_curve.csv"), &d.bounds, curve_points)
}

fn set_spectrum_headline(
    manifest: &mut Manifest,
    c: &CorrelationMatrix,
    deviations: &DeviationReport,
) {
    manifest.headline.n_series = Some(c.n());
    manifest.headline.t_effective = Some(c.t_effective);
    manifest.headline.above = Some(deviations.above);
    manifest.headline.bulk = Some(deviations.bulk);
    manifest.headline.below = Some(deviations.below);
    manifest.headline.lambda1_over_n = Some(deviations.lambda1_over_n);
}

// ---------------------------------------------------------------------
// cluster
// ---------------------------------------------------------------------

fn cmd_cluster(a: &ClusterArgs) -> Result<u8, Failure> {
    let c = report::read_correlation_json(&a.correlation).stage("cluster")?;
    let cfg = ConsensusConfig {
        n_runs: a.n_runs,
        max_iterations: a.max_iterations,
        gamma: a.gamma,
    };
    let result = consensus_cluster(&c, &cfg, &a.anneal.to_config(), a.seed).stage("cluster")?;

    ensure_dir(&a.out_dir).stage("report")?;
    write_cluster_artifacts(&a.out_dir, &c, &result, a.seed, a.n_runs, a.gamma).stage("report")?;

    let mut manifest = Manifest::new(
        "cluster",
        serde_json::json!({
            "correlation": a.correlation.display().to_string(),
            "seed": a.seed,
            "n_runs": a.n_runs,
            "max_iterations": a.max_iterations,
            "gamma": a.gamma,
            "annealing": a.anneal.echo(),
            "strict": a.strict,
        }),
    );
    manifest.headline.n_series = Some(c.n());
    manifest.headline.k_clusters = Some(result.partition.k);
    manifest.headline.converged = Some(result.converged);
    for name in CLUSTER_ARTIFACTS {
        manifest.add_artifact(name);
    }
    finish_manifest(&a.out_dir, manifest)?;
    convergence_exit(&result, a.strict, a.max_iterations)
}

const CLUSTER_ARTIFACTS: [&str; 4] = [
    "partition.json",
    "partition.csv",
    "affinity.csv",
    "reordered_correlation.csv",
];

fn write_cluster_artifacts(
    dir: &Path,
    c: &CorrelationMatrix,
    result: &ConsensusResult,
    seed: u64,
    n_runs: usize,
    gamma: f64,
) -> panelcorr_core::Result<()> {
    let file = report::partition_file(&c.labels, result, seed, n_runs, gamma);
    report::write_partition_json(&dir.join("partition.json"), &file)?;
    report::write_partition_csv(&dir.join("partition.csv"), &c.labels, &file.assignment)?;
    report::write_affinity_csv(&dir.join("affinity.csv"), &c.labels, &result.affinity)?;
    report::write_reordered_correlation_csv(
        &dir.join("reordered_correlation.csv"),
        c,
        &file.ordering,
    )
}

// ---------------------------------------------------------------------
// portfolio
// ---------------------------------------------------------------------

fn cmd_portfolio(a: &PortfolioArgs) -> Result<u8, Failure> {
    let (panel, _meta) = report::read_return_panel(&a.returns, &a.meta).stage("portfolio")?;
    let (labels, d) = report::read_spectrum_json(&a.spectrum).stage("portfolio")?;
    if labels != panel.labels {
        return Err(Failure {
            stage: "portfolio",
            error: Error::InvalidInput(
                "spectrum and return panel disagree on series labels".into(),
            ),
        });
    }
    let p = make_portfolio(&d, &panel, a.k).stage("portfolio")?;

    ensure_dir(&a.out_dir).stage("report")?;
    let name = format!("eigenportfolio_k{}.json", a.k);
    let file = report::eigenportfolio_file(&panel, &p);
    report::write_eigenportfolio_json(&a.out_dir.join(&name), &file).stage("report")?;

    let mut manifest = Manifest::new(
        "portfolio",
        serde_json::json!({
            "returns": a.returns.display().to_string(),
            "meta": a.meta.display().to_string(),
            "spectrum": a.spectrum.display().to_string(),
            "k": a.k,
        }),
    );
    manifest.headline.n_series = Some(panel.n_series());
    manifest.headline.t_effective = Some(panel.n_samples());
    manifest.headline.r_squared = Some(p.r_squared);
    manifest.add_artifact(&name);
    finish_manifest(&a.out_dir, manifest)?;
    Ok(0)
}

/// k = 0 is the uniform 1/N benchmark; k ≥ 1 picks an eigenvector.
fn make_portfolio(
    d: &SpectralDecomposition,
    panel: &ReturnPanel,
    k: usize,
) -> panelcorr_core::Result<Eigenportfolio> {
    if k == 0 {
        Ok(uniform_portfolio(panel))
    } else {
        eigenportfolio(d, panel, k)
    }
}

// ---------------------------------------------------------------------
// index
// ---------------------------------------------------------------------

fn cmd_index(a: &IndexArgs) -> Result<u8, Failure> {
    let pf = report::read_eigenportfolio_json(&a.portfolio).stage("index")?;
    let panel = load_panel(&a.prices, a.layout.into()).stage("index")?;
    if pf.labels != panel.labels {
        return Err(Failure {
            stage: "index",
            error: Error::InvalidInput(
                "portfolio and price panel disagree on series labels".into(),
            ),
        });
    }
    let p = Eigenportfolio {
        k: pf.k,
        weights: pf.weights.clone(),
        returns: pf.returns.clone(),
        r_squared: pf.r_squared,
    };
    let base = a.base.unwrap_or_else(|| panel.average_prices()[0]);
    let summary = index_stage(&a.out_dir, &p, &panel, base, a.clip_threshold).stage("index")?;

    let mut manifest = Manifest::new(
        "index",
        serde_json::json!({
            "portfolio": a.portfolio.display().to_string(),
            "prices": a.prices.display().to_string(),
            "layout": a.layout.name(),
            "base": a.base,
            "clip_threshold": a.clip_threshold,
        }),
    );
    manifest.headline.r_squared = Some(summary.r_squared);
    manifest.headline.terminal_ratio = Some(summary.terminal_ratio);
    manifest.headline.dominance_fraction = Some(summary.dominance_fraction);
    manifest.headline.ln_correlation = Some(summary.ln_correlation);
    manifest.add_artifact("index.csv");
    manifest.add_artifact("index_summary.json");
    finish_manifest(&a.out_dir, manifest)?;
    Ok(0)
}

/// Compound the portfolio, compare it with holding the average series,
/// benchmark it against the uniform portfolio, and write both artifacts.
fn index_stage(
    dir: &Path,
    p: &Eigenportfolio,
    panel: &PricePanel,
    base: f64,
    clip_threshold: f64,
) -> panelcorr_core::Result<report::IndexSummary> {
    ensure_dir(dir)?;
    let index = build_index(p, base)?;
    let comparison = buy_and_hold_report(&index, panel)?;

    // 1/N benchmark over the same horizon, compounded from the same base.
    let returns = compute_returns(panel, 1, clip_threshold)?;
    let benchmark = build_index(&uniform_portfolio(&returns), base)?;
    let benchmark_terminal_ratio =
        index.values[index.values.len() - 1] / benchmark.values[benchmark.values.len() - 1];

    report::write_index_csv(&dir.join("index.csv"), &comparison)?;
    let summary = report::IndexSummary {
        portfolio_k: p.k,
        base,
        r_squared: p.r_squared,
        terminal_ratio: comparison.terminal_ratio,
        dominance_fraction: comparison.dominance_fraction,
        ln_correlation: comparison.ln_correlation,
        benchmark_terminal_ratio: Some(benchmark_terminal_ratio),
    };
    report::write_index_summary_json(&dir.join("index_summary.json"), &summary)?;
    Ok(summary)
}

// ---------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------

/// Ground truth of a generated panel, for scoring recovery end to end.
#[derive(Serialize)]
struct SynthTruth {
    scenario: &'static str,
    n_series: usize,
    t_returns: usize,
    seed: u64,
    scale: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    cluster_labels: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pair: Option<(usize, usize)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pair_corr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    betas: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    idio_sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    drift_rate: Option<f64>,
}

impl SynthTruth {
    fn new(scenario: &'static str, n: usize, t: usize, seed: u64, scale: f64) -> Self {
        SynthTruth {
            scenario,
            n_series: n,
            t_returns: t,
            seed,
            scale,
            cluster_labels: None,
            pair: None,
            pair_corr: None,
            betas: None,
            idio_sigma: None,
            drift_rate: None,
        }
    }
}

fn cmd_synth(a: &SynthArgs) -> Result<u8, Failure> {
    let (raw, truth) = generate_scenario(a).stage("synth")?;
    let labels = default_labels(raw.ncols());
    let prices = to_price_panel(&raw, &labels, a.start_date, a.start_price, a.scale)
        .stage("synth")?;

    ensure_dir(&a.out_dir).stage("report")?;
    report::write_price_panel(&a.out_dir.join("prices.csv"), &prices).stage("report")?;
    write_json_file(&a.out_dir.join("truth.json"), &truth).stage("report")?;

    let mut manifest = Manifest::new(
        "synth",
        serde_json::json!({
            "scenario": a.scenario.name(),
            "seed": a.seed,
            "n": truth.n_series,
            "t": truth.t_returns,
            "start_date": a.start_date.to_string(),
            "start_price": a.start_price,
            "scale": a.scale,
        }),
    );
    manifest.headline.n_series = Some(truth.n_series);
    manifest.headline.t_effective = Some(truth.t_returns);
    manifest.add_artifact("prices.csv");
    manifest.add_artifact("truth.json");
    finish_manifest(&a.out_dir, manifest)?;
    Ok(0)
}

fn generate_scenario(a: &SynthArgs) -> panelcorr_core::Result<(nalgebra::DMatrix<f64>, SynthTruth)> {
    let seed = a.seed;
    match a.scenario {
        Scenario::Noise => {
            let (n, t) = (a.n.unwrap_or(70), a.t.unwrap_or(5000));
            let raw = generate_noise_panel(t, n, seed)?;
            Ok((raw, SynthTruth::new("noise", n, t, seed, a.scale)))
        }
        Scenario::Paper71 => {
            block_scenario("paper71", BlockModelSpec::standard71(seed), a)
        }
        Scenario::Trimodal => {
            block_scenario("trimodal", BlockModelSpec::trimodal(seed), a)
        }
        Scenario::Block => {
            if a.sizes.is_empty() {
                return Err(Error::InvalidParameter(
                    "--scenario block needs --sizes".into(),
                ));
            }
            let spec = BlockModelSpec::with_uniform_inter(
                a.sizes.clone(),
                a.intra,
                a.inter,
                a.t.unwrap_or(5000),
                seed,
            );
            block_scenario("block", spec, a)
        }
        Scenario::Factor => {
            let (n, t) = (a.n.unwrap_or(60), a.t.unwrap_or(3000));
            factor_scenario("factor", n, t, None, a)
        }
        Scenario::Bubble => {
            let (n, t) = (a.n.unwrap_or(50), a.t.unwrap_or(2000));
            let drift = bubble_drift(t, a.drift_rate);
            let (raw, mut truth) = factor_scenario("bubble", n, t, Some(drift), a)?;
            truth.drift_rate = Some(a.drift_rate);
            Ok((raw, truth))
        }
        Scenario::Pair => {
            let (n, t) = (a.n.unwrap_or(40), a.t.unwrap_or(4000));
            let (raw, pair) = generate_duplicate_pair_panel(n, t, a.pair_corr, seed)?;
            let mut truth = SynthTruth::new("pair", n, t, seed, a.scale);
            truth.pair = Some(pair);
            truth.pair_corr = Some(a.pair_corr);
            Ok((raw, truth))
        }
    }
}

fn block_scenario(
    name: &'static str,
    spec: BlockModelSpec,
    a: &SynthArgs,
) -> panelcorr_core::Result<(nalgebra::DMatrix<f64>, SynthTruth)> {
    let (raw, labels) = generate_block_panel(&spec)?;
    let mut truth = SynthTruth::new(name, spec.n_series(), spec.t, a.seed, a.scale);
    truth.cluster_labels = Some(labels);
    Ok((raw, truth))
}

fn factor_scenario(
    name: &'static str,
    n: usize,
    t: usize,
    drift: Option<Vec<f64>>,
    a: &SynthArgs,
) -> panelcorr_core::Result<(nalgebra::DMatrix<f64>, SynthTruth)> {
    let betas = random_betas(n, a.beta_low, a.beta_high, a.seed)?;
    let idio_sigma = calibrate_idio_sigma(&betas, a.mean_corr)?;
    let raw = generate_factor_panel(&FactorModelSpec {
        n,
        t,
        betas: betas.clone(),
        idio_sigma,
        factor_drift: drift,
        seed: a.seed,
    })?;
    let mut truth = SynthTruth::new(name, n, t, a.seed, a.scale);
    truth.betas = Some(betas);
    truth.idio_sigma = Some(idio_sigma);
    Ok((raw, truth))
}

// ---------------------------------------------------------------------
// pipeline
// ---------------------------------------------------------------------

fn cmd_pipeline(a: &PipelineArgs) -> Result<u8, Failure> {
    ensure_dir(&a.out_dir).stage("report")?;
    let dir = &a.out_dir;

    let panel = load_panel(&a.input, a.layout.into()).stage("ingest")?;
    let returns = compute_returns(&panel, a.delta_t, a.clip_threshold).stage("ingest")?;
    write_return_artifacts(dir, &panel, &returns, a.clip_threshold).stage("report")?;

    let c = correlation_from_returns(&returns).stage("correlate")?;
    write_correlation_artifacts(dir, &c, a.bins).stage("report")?;

    let bounds = mp_bounds(c.t_effective, c.n(), a.sigma2).stage("spectrum")?;
    let d = eigendecompose(&c, bounds).stage("spectrum")?;
    let deviations = bulk_deviation_report(&d);
    write_spectrum_artifacts(dir, &c, &d, a.bins, a.curve_points).stage("report")?;
    if a.localize > 0 {
        let reports = localize_pairs(&d, &c, a.localize, a.dominance).stage("spectrum")?;
        report::write_localization_json(&dir.join("localization.json"), &reports)
            .stage("report")?;
    }

    let cfg = ConsensusConfig {
        n_runs: a.n_runs,
        max_iterations: a.max_iterations,
        gamma: a.gamma,
    };
    let result = consensus_cluster(&c, &cfg, &a.anneal.to_config(), a.seed).stage("cluster")?;
    write_cluster_artifacts(dir, &c, &result, a.seed, a.n_runs, a.gamma).stage("report")?;

    let p = make_portfolio(&d, &returns, a.k).stage("portfolio")?;
    let portfolio_name = format!("eigenportfolio_k{}.json", a.k);
    report::write_eigenportfolio_json(
        &dir.join(&portfolio_name),
        &report::eigenportfolio_file(&returns, &p),
    )
    .stage("report")?;

    // Compounded returns reproduce a price path only at a 1-row horizon;
    // longer horizons overlap, so the index comparison is skipped there.
    let summary = if a.delta_t == 1 {
        let base = a.base.unwrap_or_else(|| panel.average_prices()[0]);
        Some(index_stage(dir, &p, &panel, base, a.clip_threshold).stage("index")?)
    } else {
        eprintln!("note: [index] skipped (needs --delta-t 1, got {})", a.delta_t);
        None
    };

    let mut manifest = Manifest::new(
        "pipeline",
        serde_json::json!({
            "input": a.input.display().to_string(),
            "layout": a.layout.name(),
            "delta_t": a.delta_t,
            "clip_threshold": a.clip_threshold,
            "sigma2": a.sigma2,
            "bins": a.bins,
            "curve_points": a.curve_points,
            "seed": a.seed,
            "n_runs": a.n_runs,
            "max_iterations": a.max_iterations,
            "gamma": a.gamma,
            "k": a.k,
            "base": a.base,
            "localize": a.localize,
            "dominance": a.dominance,
            "annealing": a.anneal.echo(),
            "strict": a.strict,
        }),
    );
    manifest.headline.n_series = Some(c.n());
    manifest.headline.t_effective = Some(c.t_effective);
    manifest.headline.mean_correlation = Some(mean_offdiagonal(&c));
    manifest.headline.above = Some(deviations.above);
    manifest.headline.bulk = Some(deviations.bulk);
    manifest.headline.below = Some(deviations.below);
    manifest.headline.lambda1_over_n = Some(deviations.lambda1_over_n);
    manifest.headline.k_clusters = Some(result.partition.k);
    manifest.headline.converged = Some(result.converged);
    manifest.headline.r_squared = Some(p.r_squared);
    if let Some(s) = &summary {
        manifest.headline.terminal_ratio = Some(s.terminal_ratio);
        manifest.headline.dominance_fraction = Some(s.dominance_fraction);
        manifest.headline.ln_correlation = Some(s.ln_correlation);
    }

    for name in [
        "returns.csv",
        "returns_meta.json",
        "correlation.csv",
        "correlation.json",
        "coefficient_histogram.csv",
        "spectrum.json",
        "eigenvalue_histogram.csv",
        "mp_curve.csv",
    ] {
        manifest.add_artifact(name);
    }
    if a.localize > 0 {
        manifest.add_artifact("localization.json");
    }
    for name in CLUSTER_ARTIFACTS {
        manifest.add_artifact(name);
    }
    manifest.add_artifact(&portfolio_name);
    if summary.is_some() {
        manifest.add_artifact("index.csv");
        manifest.add_artifact("index_summary.json");
    }
    finish_manifest(&a.out_dir, manifest)?;
    convergence_exit(&result, a.strict, a.max_iterations)
}

fn finish_manifest(dir: &Path, mut manifest: Manifest) -> Result<(), Failure> {
    manifest.finish();
    report::write_manifest(&dir.join("manifest.json"), &manifest).stage("report")
}
