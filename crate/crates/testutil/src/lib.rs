//! Reference implementations used only by tests: small, slow, and written
//! as directly from the definitions as possible so they make independent
//! oracles for the optimized code under test.

use itertools::Itertools;
use nalgebra::DMatrix;

/// Pearson correlation of every pair of columns, computed from scratch
/// with plain loops (means, population deviations, normalized
/// cross-products). No clamping or diagonal forcing.
pub fn naive_correlation(g: &DMatrix<f64>) -> Vec<Vec<f64>> {
    let t = g.nrows();
    let n = g.ncols();
    let mut means = vec![0.0; n];
    for i in 0..n {
        for s in 0..t {
            means[i] += g[(s, i)];
        }
        means[i] /= t as f64;
    }
    let mut sds = vec![0.0; n];
    for i in 0..n {
        for s in 0..t {
            let d = g[(s, i)] - means[i];
            sds[i] += d * d;
        }
        sds[i] = (sds[i] / t as f64).sqrt();
    }
    let mut c = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for s in 0..t {
                acc += (g[(s, i)] - means[i]) * (g[(s, j)] - means[j]);
            }
            c[i][j] = acc / (t as f64 * sds[i] * sds[j]);
        }
    }
    c
}

/// Cost of placing the series of `c` in order `perm`:
/// Σ over ordered pairs of C[π(i)][π(j)]·|i−j|.
pub fn ordering_cost(c: &[Vec<f64>], perm: &[usize]) -> f64 {
    let n = perm.len();
    let mut cost = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                cost += c[perm[i]][perm[j]] * i.abs_diff(j) as f64;
            }
        }
    }
    cost
}

/// Global minimum of the ordering cost over all n! permutations, by
/// enumeration. Returns the cost and the first permutation (in
/// lexicographic enumeration order) that attains it.
pub fn brute_force_min_cost(c: &[Vec<f64>]) -> (f64, Vec<usize>) {
    let n = c.len();
    let mut best_cost = f64::INFINITY;
    let mut best_perm = Vec::new();
    for perm in (0..n).permutations(n) {
        let cost = ordering_cost(c, &perm);
        if cost < best_cost {
            best_cost = cost;
            best_perm = perm;
        }
    }
    (best_cost, best_perm)
}

/// Tolerance for float ties; matches the comparator under test.
const TIE_EPS: f64 = 1e-9;

#[derive(Debug, Clone)]
struct Segmentation {
    score: f64,
    mass: f64,
    starts: Vec<usize>,
}

fn segmentation_beats(a: &Segmentation, b: &Segmentation) -> bool {
    if a.score > b.score + TIE_EPS {
        return true;
    }
    if a.score < b.score - TIE_EPS {
        return false;
    }
    if a.mass > b.mass + TIE_EPS {
        return true;
    }
    if a.mass < b.mass - TIE_EPS {
        return false;
    }
    if a.starts.len() != b.starts.len() {
        return a.starts.len() > b.starts.len();
    }
    a.starts < b.starts
}

/// Best segmentation of an ordered matrix into contiguous blocks by
/// enumerating all 2^(n-1) boundary sets. The objective per block of size
/// m is (off-diagonal ordered-pair mass) − gamma·⟨c⟩·m(m−1), with ⟨c⟩ the
/// mean upper-triangle coefficient of the whole matrix. Ties break toward
/// larger total mass, then more blocks, then lexicographically smallest
/// block starts. Returns the block start positions and the score.
pub fn brute_force_segmentation(c: &[Vec<f64>], gamma: f64) -> (Vec<usize>, f64) {
    let n = c.len();
    assert!(n >= 1 && n <= 20, "enumeration only works for small n");
    let mut cbar = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            cbar += c[i][j];
        }
    }
    cbar /= (n * (n - 1) / 2) as f64;

    let block_mass = |lo: usize, hi: usize| -> f64 {
        let mut acc = 0.0;
        for i in lo..hi {
            for j in lo..hi {
                if i != j {
                    acc += c[i][j];
                }
            }
        }
        acc
    };

    let mut best: Option<Segmentation> = None;
    for mask in 0..(1u32 << (n - 1)) {
        let mut starts = vec![0usize];
        for b in 0..(n - 1) {
            if mask & (1 << b) != 0 {
                starts.push(b + 1);
            }
        }
        let mut score = 0.0;
        let mut mass = 0.0;
        for (idx, &lo) in starts.iter().enumerate() {
            let hi = if idx + 1 < starts.len() { starts[idx + 1] } else { n };
            let m = (hi - lo) as f64;
            let bm = block_mass(lo, hi);
            mass += bm;
            score += bm - gamma * cbar * m * (m - 1.0);
        }
        let cand = Segmentation { score, mass, starts };
        match &best {
            Some(b) if !segmentation_beats(&cand, b) => {}
            _ => best = Some(cand),
        }
    }
    let best = best.expect("at least one segmentation");
    (best.starts, best.score)
}

/// CDF of the limiting spectral law with ratio `q` = T/N and scale
/// `sigma2`, integrated by Simpson's rule after the substitution
/// λ = λ_min + (λ_max − λ_min)·sin²θ, which removes the edge
/// singularities of the density.
pub fn mp_cdf(q: f64, sigma2: f64, lambda: f64) -> f64 {
    let inv_q = 1.0 / q;
    let lo = sigma2 * (1.0 + inv_q - 2.0 * inv_q.sqrt());
    let hi = sigma2 * (1.0 + inv_q + 2.0 * inv_q.sqrt());
    if lambda <= lo {
        return 0.0;
    }
    if lambda >= hi {
        return 1.0;
    }
    let span = hi - lo;
    let theta_max = ((lambda - lo) / span).sqrt().asin();
    // Integrand after substitution: f(λ(θ))·dλ/dθ
    //   = Q/(2πσ²)·span²·sin²θ·cos²θ·2 / λ(θ).
    let f = |theta: f64| {
        let s = theta.sin();
        let x = lo + span * s * s;
        q / (2.0 * std::f64::consts::PI * sigma2) * span * span * (s * theta.cos()).powi(2) * 2.0
            / x
    };
    simpson(f, 0.0, theta_max, 4000)
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n_intervals: usize) -> f64 {
    let n = if n_intervals % 2 == 0 { n_intervals } else { n_intervals + 1 };
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + k as f64 * h);
    }
    acc * h / 3.0
}

/// Two-sided Kolmogorov-Smirnov statistic of `samples` against `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs());
        d = d.max((f - (i as f64 + 1.0) / n).abs());
    }
    d
}
