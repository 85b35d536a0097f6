//! The eigenvalue distribution of a pure-noise correlation matrix must
//! follow the limiting law: bounded bulk, matching CDF.

use panelcorr_core::correlation::correlation_matrix;
use panelcorr_core::spectra::{bulk_deviation_report, eigendecompose, mp_bounds};
use panelcorr_core::synth::{default_labels, generate_noise_panel};
use panelcorr_testutil::{ks_statistic, mp_cdf};

#[test]
fn noise_eigenvalues_stay_inside_the_predicted_bulk() {
    let (t, n) = (5000, 70);
    let g = generate_noise_panel(t, n, 42).unwrap();
    let c = correlation_matrix(&g, &default_labels(n)).unwrap();
    let bounds = mp_bounds(t, n, 1.0).unwrap();
    let d = eigendecompose(&c, bounds).unwrap();

    let q = t as f64 / n as f64;
    let ks = ks_statistic(&d.eigenvalues, |x| mp_cdf(q, 1.0, x));
    assert!(ks <= 0.05, "Kolmogorov distance {ks}");

    let outside = d
        .eigenvalues
        .iter()
        .filter(|&&v| v < bounds.lambda_min || v > bounds.lambda_max)
        .count();
    assert!(
        (outside as f64) < 0.02 * n as f64,
        "{outside} of {n} eigenvalues outside the bulk"
    );

    let report = bulk_deviation_report(&d);
    assert!(report.above <= 1, "above-bulk count {}", report.above);
}

#[test]
fn kolmogorov_distance_is_stable_across_seeds() {
    let (t, n) = (2500, 50);
    let q = t as f64 / n as f64;
    for seed in [7u64, 8, 9] {
        let g = generate_noise_panel(t, n, seed).unwrap();
        let c = correlation_matrix(&g, &default_labels(n)).unwrap();
        let d = eigendecompose(&c, mp_bounds(t, n, 1.0).unwrap()).unwrap();
        let ks = ks_statistic(&d.eigenvalues, |x| mp_cdf(q, 1.0, x));
        assert!(ks <= 0.08, "seed {seed}: Kolmogorov distance {ks}");
    }
}
