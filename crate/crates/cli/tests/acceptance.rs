//! The release gate: ten numbered checks covering every stage of the
//! pipeline, from closed-form bound values to byte-level determinism of
//! the full binary. Each check prints one PASS/FAIL line (visible under
//! `--nocapture`); test names are numbered so the harness runs them in
//! order on a single thread.
//!
//! Oracles are independent of the implementation under test: brute-force
//! enumeration for the combinatorial stages, quadrature of the limiting
//! density for the spectral ones, and generator ground truth for the
//! synthetic panels.

use std::path::Path;
use std::process::Command;

use nalgebra::DMatrix;
use panelcorr_core::correlation::{correlation_matrix, CorrelationMatrix};
use panelcorr_core::portfolio::{build_index, buy_and_hold_report, eigenportfolio};
use panelcorr_core::seriation::{
    adjusted_rand_index, anneal_ordering, consensus_cluster, segment_blocks, seriation_cost,
    AnnealingConfig, ConsensusConfig, Ordering,
};
use panelcorr_core::spectra::{bulk_deviation_report, eigendecompose, localize_pairs, mp_bounds};
use panelcorr_core::synth::{
    bubble_drift, calibrate_idio_sigma, default_labels, generate_block_panel,
    generate_duplicate_pair_panel, generate_factor_panel, generate_noise_panel, random_betas,
    to_price_panel, BlockModelSpec, FactorModelSpec,
};
use panelcorr_testutil::{brute_force_min_cost, brute_force_segmentation, ks_statistic, mp_cdf};

fn verdict(number: usize, name: &str, pass: bool, detail: &str) {
    println!(
        "ACCEPTANCE {number:2} {name}: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "acceptance {number} ({name}) failed: {detail}");
}

fn labels(n: usize) -> Vec<String> {
    default_labels(n)
}

fn correlation_of(panel: &DMatrix<f64>) -> CorrelationMatrix {
    let mut g = panel.clone();
    let t = g.nrows() as f64;
    for c in 0..g.ncols() {
        let mean = g.column(c).sum() / t;
        let sd = (g.column(c).iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / t).sqrt();
        for r in 0..g.nrows() {
            g[(r, c)] = (g[(r, c)] - mean) / sd;
        }
    }
    correlation_matrix(&g, &labels(panel.ncols())).unwrap()
}

fn to_rows(c: &CorrelationMatrix) -> Vec<Vec<f64>> {
    (0..c.n())
        .map(|i| (0..c.n()).map(|j| c.c[(i, j)]).collect())
        .collect()
}

#[test]
fn acceptance_01_bound_formulas() {
    let b = mp_bounds(5272, 71, 1.0).unwrap();
    let (err_max, err_min) = ((b.lambda_max - 1.2456).abs(), (b.lambda_min - 0.7814).abs());
    verdict(
        1,
        "noise-bulk bounds",
        err_max < 1e-3 && err_min < 1e-3,
        &format!("lambda_max={:.4}, lambda_min={:.4}", b.lambda_max, b.lambda_min),
    );
}

#[test]
fn acceptance_02_noise_spectrum_follows_the_limit_law() {
    let (t, n) = (5000, 70);
    let g = generate_noise_panel(t, n, 42).unwrap();
    let c = correlation_matrix(&g, &labels(n)).unwrap();
    let bounds = mp_bounds(t, n, 1.0).unwrap();
    let d = eigendecompose(&c, bounds).unwrap();

    let q = t as f64 / n as f64;
    let ks = ks_statistic(&d.eigenvalues, |x| mp_cdf(q, 1.0, x));
    let outside = d
        .eigenvalues
        .iter()
        .filter(|&&v| v < bounds.lambda_min || v > bounds.lambda_max)
        .count();
    verdict(
        2,
        "noise spectrum vs integrated density",
        ks <= 0.05 && (outside as f64) < 0.02 * n as f64,
        &format!("Kolmogorov distance {ks:.4}, {outside}/{n} outside the bulk"),
    );
}

#[test]
fn acceptance_03_equicorrelated_spectrum_closed_form() {
    let n = 71;
    let c_level = 0.57;
    let m = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { c_level });
    let c = CorrelationMatrix { labels: labels(n), c: m, t_effective: 5272 };
    let d = eigendecompose(&c, mp_bounds(5272, n, 1.0).unwrap()).unwrap();

    let lambda1 = 1.0 + (n as f64 - 1.0) * c_level; // 40.9
    let rest = 1.0 - c_level; // 0.43
    let top_err = (d.eigenvalues[0] - lambda1).abs();
    let rest_err = d.eigenvalues[1..]
        .iter()
        .map(|v| (v - rest).abs())
        .fold(0.0, f64::max);
    let share = d.eigenvalues[0] / n as f64;
    verdict(
        3,
        "equicorrelated spectrum",
        top_err < 1e-8 && rest_err < 1e-8 && (share - 0.6163).abs() < 0.10,
        &format!(
            "lambda_1 err {top_err:.2e}, degenerate err {rest_err:.2e}, lambda_1/N = {:.2}%",
            100.0 * share
        ),
    );
}

#[test]
fn acceptance_04_annealing_reaches_brute_force_optimum() {
    let schedule = AnnealingConfig::default();
    let mut optimal = 0;
    let mut identity_violations = 0;
    for seed in 0..100u64 {
        let g = generate_noise_panel(40, 8, 1000 + seed).unwrap();
        let c = correlation_of(&g);
        let (best_cost, _) = brute_force_min_cost(&to_rows(&c));
        let ordering = anneal_ordering(&c, &schedule, seed);
        if (ordering.cost - best_cost).abs() < 1e-9 {
            optimal += 1;
        }
        let identity: Vec<usize> = (0..8).collect();
        if ordering.cost > seriation_cost(&c, &identity).unwrap() + 1e-12 {
            identity_violations += 1;
        }
    }
    verdict(
        4,
        "seriation optimality on 8x8",
        optimal >= 95 && identity_violations == 0,
        &format!("{optimal}/100 optimal, {identity_violations} identity violations"),
    );
}

#[test]
fn acceptance_05_segmentation_matches_exhaustive_search() {
    let mut mismatches = 0;
    for seed in 0..50u64 {
        let n = 4 + (seed as usize % 9); // 4..=12
        // Alternate unstructured and planted-block matrices so both
        // trivial and interesting cuts are exercised.
        let c = if seed % 2 == 0 {
            correlation_of(&generate_noise_panel(5 * n, n, 2000 + seed).unwrap())
        } else {
            let half = n / 2;
            let spec = BlockModelSpec::with_uniform_inter(
                vec![half, n - half],
                0.8,
                0.1,
                5 * n,
                2000 + seed,
            );
            correlation_of(&generate_block_panel(&spec).unwrap().0)
        };
        let identity = Ordering {
            perm: (0..n).collect(),
            cost: seriation_cost(&c, &(0..n).collect::<Vec<_>>()).unwrap(),
        };
        let partition = segment_blocks(&c, &identity, 1.0).unwrap();
        let mut starts = vec![0];
        for i in 1..n {
            if partition.assignment[i] != partition.assignment[i - 1] {
                starts.push(i);
            }
        }
        let (oracle_starts, oracle_score) = brute_force_segmentation(&to_rows(&c), 1.0);
        if starts != oracle_starts || (partition.score - oracle_score).abs() > 1e-9 {
            mismatches += 1;
        }
    }
    verdict(
        5,
        "segmentation vs enumeration",
        mismatches == 0,
        &format!("{mismatches}/50 mismatches"),
    );
}

#[test]
fn acceptance_06_planted_blocks_recovered_across_master_seeds() {
    let spec = BlockModelSpec::standard71(4242);
    let (panel, truth) = generate_block_panel(&spec).unwrap();
    let c = correlation_of(&panel);
    let d = eigendecompose(&c, mp_bounds(spec.t, spec.n_series(), 1.0).unwrap()).unwrap();
    let above = bulk_deviation_report(&d).above;

    let cfg = ConsensusConfig { n_runs: 50, ..Default::default() };
    let schedule = AnnealingConfig::default();
    let mut min_ari: f64 = 1.0;
    for master in 0..10u64 {
        let result = consensus_cluster(&c, &cfg, &schedule, master).unwrap();
        min_ari = min_ari.min(adjusted_rand_index(&result.partition.assignment, &truth));
    }
    verdict(
        6,
        "planted six-block recovery",
        min_ari >= 0.95 && above == 6,
        &format!("worst adjusted Rand index {min_ari:.3}, {above} above the bulk"),
    );
}

#[test]
fn acceptance_07_market_mode_regression() {
    let n = 60;
    let betas = random_betas(n, 0.5, 1.5, 11).unwrap();
    let sigma = calibrate_idio_sigma(&betas, 0.57).unwrap();
    let raw = generate_factor_panel(&FactorModelSpec {
        n,
        t: 3000,
        betas,
        idio_sigma: sigma,
        factor_drift: None,
        seed: 11,
    })
    .unwrap();
    let prices = to_price_panel(
        &raw,
        &labels(n),
        chrono::NaiveDate::from_ymd_opt(2015, 1, 1).unwrap(),
        100.0,
        0.01,
    )
    .unwrap();
    let panel = panelcorr_core::ingest::compute_returns(&prices, 1, 10.0).unwrap();
    let c = panelcorr_core::correlation::correlation_from_returns(&panel).unwrap();
    let d = eigendecompose(&c, mp_bounds(panel.n_samples(), n, 1.0).unwrap()).unwrap();

    let p1 = eigenportfolio(&d, &panel, 1).unwrap();
    let p2 = eigenportfolio(&d, &panel, 2).unwrap();
    let signs = d.eigenvectors.column(0).iter().map(|x| x.signum()).sum::<f64>().abs();
    let one_sign = signs == n as f64;
    verdict(
        7,
        "market-mode regression",
        p1.r_squared >= 0.95 && p2.r_squared < 0.2 && one_sign,
        &format!(
            "R2(k=1)={:.3}, R2(k=2)={:.3}, single-sign={one_sign}",
            p1.r_squared, p2.r_squared
        ),
    );
}

#[test]
fn acceptance_08_pair_localization_across_seeds() {
    let (n, t) = (40, 4000);
    let mut recovered = 0;
    for seed in 0..20u64 {
        let (raw, pair) = generate_duplicate_pair_panel(n, t, 0.999, seed).unwrap();
        let c = correlation_of(&raw);
        let d = eigendecompose(&c, mp_bounds(t, n, 1.0).unwrap()).unwrap();
        let report = &localize_pairs(&d, &c, 1, 0.5).unwrap()[0];
        let two = report.dominant_components.len() == 2;
        if !two {
            continue;
        }
        let (a, b) = (report.dominant_components[0], report.dominant_components[1]);
        let found = (a.0.min(b.0), a.0.max(b.0));
        if found == pair && a.1 * b.1 < 0.0 {
            recovered += 1;
        }
    }
    verdict(
        8,
        "duplicate-pair localization",
        recovered == 20,
        &format!("{recovered}/20 seeds recovered the planted pair"),
    );
}

#[test]
fn acceptance_09_index_round_trip_and_bubble_tracking() {
    let n = 50;
    let t = 2000;
    let betas = random_betas(n, 0.5, 1.5, 23).unwrap();
    let sigma = calibrate_idio_sigma(&betas, 0.5).unwrap();
    let raw = generate_factor_panel(&FactorModelSpec {
        n,
        t,
        betas,
        idio_sigma: sigma,
        factor_drift: Some(bubble_drift(t, 0.05)),
        seed: 23,
    })
    .unwrap();
    let prices = to_price_panel(
        &raw,
        &labels(n),
        chrono::NaiveDate::from_ymd_opt(2015, 1, 1).unwrap(),
        100.0,
        0.01,
    )
    .unwrap();
    let panel = panelcorr_core::ingest::compute_returns(&prices, 1, 10.0).unwrap();
    let c = panelcorr_core::correlation::correlation_from_returns(&panel).unwrap();
    let d = eigendecompose(&c, mp_bounds(panel.n_samples(), n, 1.0).unwrap()).unwrap();
    let p1 = eigenportfolio(&d, &panel, 1).unwrap();

    let index = build_index(&p1, 19.4704).unwrap();
    let exact_base = index.values[0] == 19.4704;
    let mut round_trip = true;
    for (step, r) in p1.returns.iter().enumerate() {
        if ((index.values[step + 1] / index.values[step]).ln() - r).abs() > 1e-10 {
            round_trip = false;
        }
    }

    let tracking = build_index(&p1, prices.average_prices()[0]).unwrap();
    let report = buy_and_hold_report(&tracking, &prices).unwrap();
    verdict(
        9,
        "index construction",
        exact_base && round_trip && report.ln_correlation >= 0.95,
        &format!(
            "base exact={exact_base}, returns round-trip={round_trip}, ln-correlation {:.3}",
            report.ln_correlation
        ),
    );
}

#[test]
fn acceptance_10_pipeline_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_panelcorr");
    let path = |p: &Path| p.to_str().unwrap().to_string();

    let synth = tmp.path().join("synth");
    let status = Command::new(bin)
        .args([
            "synth", "--scenario", "paper71", "--seed", "4242", "--out-dir", &path(&synth),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let prices = synth.join("prices.csv");

    let mut manifests: Vec<Vec<u8>> = Vec::new();
    for (label, threads) in [("a", None), ("b", None), ("c", Some("1")), ("d", Some("4"))] {
        let out = tmp.path().join(label);
        let mut cmd = Command::new(bin);
        cmd.args([
            "pipeline",
            "--input",
            &path(&prices),
            "--seed",
            "7",
            "--n-runs",
            "50",
            "--out-dir",
            &path(&out),
        ]);
        if let Some(t) = threads {
            cmd.env("RAYON_NUM_THREADS", t);
        }
        let status = cmd.status().unwrap();
        assert!(status.success(), "pipeline run {label} failed");
        manifests.push(std::fs::read(out.join("manifest.json")).unwrap());
    }
    let identical = manifests.iter().all(|m| m == &manifests[0]);
    verdict(
        10,
        "pipeline determinism",
        identical,
        "manifests byte-identical across reruns and thread counts",
    );
}
