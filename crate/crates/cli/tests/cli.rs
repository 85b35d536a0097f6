//! Black-box tests of the binary: exit codes, artifact layout, stage
//! chaining, and rerun determinism on small panels.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_panelcorr"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn assert_exit(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn file_names(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    names
}

/// Small two-block panel most tests run on: quick, but structured enough
/// to cluster reliably.
fn small_panel(dir: &Path) -> PathBuf {
    let out = dir.join("synth");
    let r = run(&[
        "synth",
        "--scenario",
        "block",
        "--sizes",
        "6,6",
        "--t",
        "1500",
        "--seed",
        "42",
        "--out-dir",
        path_str(&out),
    ]);
    assert_exit(&r, 0);
    out.join("prices.csv")
}

#[test]
fn pipeline_writes_every_artifact_and_a_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let prices = small_panel(tmp.path());
    let out = tmp.path().join("run");
    let r = run(&[
        "pipeline",
        "--input",
        path_str(&prices),
        "--seed",
        "7",
        "--n-runs",
        "8",
        "--out-dir",
        path_str(&out),
    ]);
    assert_exit(&r, 0);

    let manifest: serde_json::Value =
        serde_json::from_slice(&read(&out.join("manifest.json"))).unwrap();
    assert_eq!(manifest["schema_version"], 1);
    assert_eq!(manifest["command"], "pipeline");
    assert_eq!(manifest["config"]["seed"], 7);
    assert_eq!(manifest["headline"]["n_series"], 12);
    assert_eq!(manifest["headline"]["k_clusters"], 2);
    assert_eq!(manifest["headline"]["converged"], true);

    // Every artifact the manifest lists must exist.
    for name in manifest["artifacts"].as_array().unwrap() {
        let p = out.join(name.as_str().unwrap());
        assert!(p.is_file(), "missing artifact {}", p.display());
    }
}

#[test]
fn rerunning_with_the_same_seed_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let prices = small_panel(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let r = run(&[
            "pipeline",
            "--input",
            path_str(&prices),
            "--seed",
            "7",
            "--n-runs",
            "8",
            "--out-dir",
            path_str(out),
        ]);
        assert_exit(&r, 0);
    }
    for name in file_names(&a) {
        assert_eq!(
            read(&a.join(&name)),
            read(&b.join(&name)),
            "artifact {name} differs between identical runs"
        );
    }
}

#[test]
fn stagewise_run_matches_the_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let prices = small_panel(tmp.path());
    let pipe = tmp.path().join("pipe");
    assert_exit(
        &run(&[
            "pipeline",
            "--input",
            path_str(&prices),
            "--seed",
            "7",
            "--n-runs",
            "8",
            "--out-dir",
            path_str(&pipe),
        ]),
        0,
    );

    let (i, c, s, k, p, x) = (
        tmp.path().join("i"),
        tmp.path().join("c"),
        tmp.path().join("s"),
        tmp.path().join("k"),
        tmp.path().join("p"),
        tmp.path().join("x"),
    );
    assert_exit(
        &run(&["ingest", "--input", path_str(&prices), "--out-dir", path_str(&i)]),
        0,
    );
    let returns = i.join("returns.csv");
    let meta = i.join("returns_meta.json");
    assert_exit(
        &run(&[
            "correlate",
            "--returns",
            path_str(&returns),
            "--meta",
            path_str(&meta),
            "--out-dir",
            path_str(&c),
        ]),
        0,
    );
    let correlation = c.join("correlation.json");
    assert_exit(
        &run(&["spectrum", "--correlation", path_str(&correlation), "--out-dir", path_str(&s)]),
        0,
    );
    assert_exit(
        &run(&[
            "cluster",
            "--correlation",
            path_str(&correlation),
            "--seed",
            "7",
            "--n-runs",
            "8",
            "--out-dir",
            path_str(&k),
        ]),
        0,
    );
    assert_exit(
        &run(&[
            "portfolio",
            "--returns",
            path_str(&returns),
            "--meta",
            path_str(&meta),
            "--spectrum",
            path_str(&s.join("spectrum.json")),
            "--out-dir",
            path_str(&p),
        ]),
        0,
    );
    assert_exit(
        &run(&[
            "index",
            "--portfolio",
            path_str(&p.join("eigenportfolio_k1.json")),
            "--prices",
            path_str(&prices),
            "--out-dir",
            path_str(&x),
        ]),
        0,
    );

    // Stage outputs must equal the pipeline's, byte for byte.
    for (stage_dir, name) in [
        (&i, "returns.csv"),
        (&i, "returns_meta.json"),
        (&c, "correlation.json"),
        (&c, "coefficient_histogram.csv"),
        (&s, "spectrum.json"),
        (&s, "mp_curve.csv"),
        (&k, "partition.json"),
        (&k, "affinity.csv"),
        (&p, "eigenportfolio_k1.json"),
        (&x, "index.csv"),
        (&x, "index_summary.json"),
    ] {
        assert_eq!(
            read(&stage_dir.join(name)),
            read(&pipe.join(name)),
            "{name} differs between staged and pipeline runs"
        );
    }
}

#[test]
fn malformed_input_leaves_only_an_error_log() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("bad.csv");
    std::fs::write(&input, "date,a,b\n2020-01-01,1.0,oops\n2020-01-02,1.1,2.0\n").unwrap();
    let out = tmp.path().join("run");
    let r = run(&[
        "pipeline",
        "--input",
        path_str(&input),
        "--seed",
        "1",
        "--out-dir",
        path_str(&out),
    ]);
    assert_exit(&r, 2);
    assert_eq!(file_names(&out), vec!["error.log"]);
    let log = String::from_utf8(read(&out.join("error.log"))).unwrap();
    assert!(log.starts_with("[ingest]"), "log: {log}");
}

#[test]
fn missing_input_file_exits_with_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let r = run(&[
        "ingest",
        "--input",
        path_str(&tmp.path().join("nonexistent.csv")),
        "--out-dir",
        path_str(&out),
    ]);
    assert_exit(&r, 2);
}

#[test]
fn stochastic_subcommands_require_a_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let out = path_str(tmp.path()).to_string();
    for args in [
        vec!["synth", "--scenario", "noise", "--out-dir", &out],
        vec!["cluster", "--correlation", "whatever.json", "--out-dir", &out],
        vec!["pipeline", "--input", "whatever.csv", "--out-dir", &out],
    ] {
        let r = run(&args);
        assert_exit(&r, 2);
        let err = String::from_utf8_lossy(&r.stderr);
        assert!(err.contains("--seed"), "{args:?}: {err}");
    }
}

#[test]
fn nonconvergence_is_a_soft_failure_unless_strict() {
    let tmp = tempfile::tempdir().unwrap();
    let prices = small_panel(tmp.path());
    let i = tmp.path().join("i");
    let c = tmp.path().join("c");
    assert_exit(
        &run(&["ingest", "--input", path_str(&prices), "--out-dir", path_str(&i)]),
        0,
    );
    assert_exit(
        &run(&[
            "correlate",
            "--returns",
            path_str(&i.join("returns.csv")),
            "--meta",
            path_str(&i.join("returns_meta.json")),
            "--out-dir",
            path_str(&c),
        ]),
        0,
    );

    // --max-iterations 0 cannot converge, so the soft/strict split is
    // deterministic.
    let soft = tmp.path().join("soft");
    let r = run(&[
        "cluster",
        "--correlation",
        path_str(&c.join("correlation.json")),
        "--seed",
        "3",
        "--n-runs",
        "4",
        "--max-iterations",
        "0",
        "--out-dir",
        path_str(&soft),
    ]);
    assert_exit(&r, 4);
    // Soft failure still writes the partition and the manifest.
    let manifest: serde_json::Value =
        serde_json::from_slice(&read(&soft.join("manifest.json"))).unwrap();
    assert_eq!(manifest["headline"]["converged"], false);
    assert!(soft.join("partition.json").is_file());
    assert!(!soft.join("error.log").exists());

    let hard = tmp.path().join("hard");
    let r = run(&[
        "cluster",
        "--correlation",
        path_str(&c.join("correlation.json")),
        "--seed",
        "3",
        "--n-runs",
        "4",
        "--max-iterations",
        "0",
        "--strict",
        "--out-dir",
        path_str(&hard),
    ]);
    assert_exit(&r, 3);
    assert!(hard.join("error.log").is_file());
}

#[test]
fn synth_truth_records_the_planted_structure() {
    let tmp = tempfile::tempdir().unwrap();
    let block = tmp.path().join("block");
    assert_exit(
        &run(&[
            "synth", "--scenario", "paper71", "--seed", "9", "--out-dir", path_str(&block),
        ]),
        0,
    );
    let truth: serde_json::Value =
        serde_json::from_slice(&read(&block.join("truth.json"))).unwrap();
    assert_eq!(truth["n_series"], 71);
    assert_eq!(truth["t_returns"], 5272);
    assert_eq!(truth["cluster_labels"].as_array().unwrap().len(), 71);

    let pair = tmp.path().join("pair");
    assert_exit(
        &run(&[
            "synth", "--scenario", "pair", "--n", "10", "--t", "600", "--seed", "9",
            "--out-dir", path_str(&pair),
        ]),
        0,
    );
    let truth: serde_json::Value =
        serde_json::from_slice(&read(&pair.join("truth.json"))).unwrap();
    let planted = truth["pair"].as_array().unwrap();
    assert_eq!(planted.len(), 2);
    assert!(truth["cluster_labels"].is_null());
}

#[test]
fn portfolio_rejects_mismatched_spectrum() {
    let tmp = tempfile::tempdir().unwrap();
    let prices = small_panel(tmp.path());
    let i = tmp.path().join("i");
    assert_exit(
        &run(&["ingest", "--input", path_str(&prices), "--out-dir", path_str(&i)]),
        0,
    );

    // A spectrum from a different panel: same pipeline, different labels.
    let other = tmp.path().join("other_synth");
    assert_exit(
        &run(&[
            "synth", "--scenario", "noise", "--n", "5", "--t", "600", "--seed", "1",
            "--out-dir", path_str(&other),
        ]),
        0,
    );
    let oi = tmp.path().join("oi");
    let oc = tmp.path().join("oc");
    let os = tmp.path().join("os");
    assert_exit(
        &run(&[
            "ingest", "--input", path_str(&other.join("prices.csv")),
            "--out-dir", path_str(&oi),
        ]),
        0,
    );
    assert_exit(
        &run(&[
            "correlate",
            "--returns", path_str(&oi.join("returns.csv")),
            "--meta", path_str(&oi.join("returns_meta.json")),
            "--out-dir", path_str(&oc),
        ]),
        0,
    );
    assert_exit(
        &run(&[
            "spectrum",
            "--correlation", path_str(&oc.join("correlation.json")),
            "--out-dir", path_str(&os),
        ]),
        0,
    );

    let out = tmp.path().join("p");
    let r = run(&[
        "portfolio",
        "--returns", path_str(&i.join("returns.csv")),
        "--meta", path_str(&i.join("returns_meta.json")),
        "--spectrum", path_str(&os.join("spectrum.json")),
        "--out-dir", path_str(&out),
    ]);
    assert_exit(&r, 2);
}

#[test]
fn spectrum_localization_is_written_on_request() {
    let tmp = tempfile::tempdir().unwrap();
    let synth = tmp.path().join("synth");
    assert_exit(
        &run(&[
            "synth", "--scenario", "pair", "--n", "12", "--t", "2000", "--seed", "5",
            "--out-dir", path_str(&synth),
        ]),
        0,
    );
    let out = tmp.path().join("run");
    assert_exit(
        &run(&[
            "pipeline",
            "--input", path_str(&synth.join("prices.csv")),
            "--seed", "5",
            "--n-runs", "8",
            "--localize", "1",
            "--dominance", "0.5",
            "--out-dir", path_str(&out),
        ]),
        0,
    );
    let truth: serde_json::Value =
        serde_json::from_slice(&read(&synth.join("truth.json"))).unwrap();
    let planted: Vec<usize> = truth["pair"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap() as usize)
        .collect();

    let loc: serde_json::Value =
        serde_json::from_slice(&read(&out.join("localization.json"))).unwrap();
    let implied = &loc[0]["implied_pairs"][0][0];
    let found: Vec<usize> = implied
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap() as usize)
        .collect();
    assert_eq!(found, planted);
}
