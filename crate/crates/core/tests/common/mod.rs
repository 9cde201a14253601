//! Oracles shared by the integration test targets.
#![allow(dead_code)]

use eigenspot::simulator::{sample_poisson, SimRng};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::gamma::ln_gamma;

/// Exact Poisson pmf through log-space evaluation.
pub fn poisson_pmf(lambda: f64, k: u64) -> f64 {
    (k as f64 * lambda.ln() - lambda - ln_gamma(k as f64 + 1.0)).exp()
}

pub fn poisson_draws(lambda: f64, n: usize, seed: u64) -> Vec<u64> {
    let mut rng = SimRng::new(seed);
    (0..n).map(|_| sample_poisson(lambda, &mut rng).unwrap()).collect()
}

/// Pearson chi-square goodness of fit of `draws` against Poisson(lambda).
/// Cells with expected count below 5 are pooled into the two tails.
/// Returns `(statistic, degrees of freedom, p-value)`.
pub fn poisson_chi_square(lambda: f64, draws: &[u64]) -> (f64, usize, f64) {
    let n = draws.len() as f64;
    let max_k = *draws.iter().max().unwrap() as usize;
    let upper = (lambda + 20.0 * lambda.sqrt() + 20.0) as usize;
    let mut observed = vec![0.0f64; upper.max(max_k) + 1];
    for &d in draws {
        observed[d as usize] += 1.0;
    }
    let expected: Vec<f64> = (0..observed.len())
        .map(|k| n * poisson_pmf(lambda, k as u64))
        .collect();

    // Merge bins from the left until each has >= 5 expected, then fold the
    // remaining right tail (including the mass beyond `upper`) into the last.
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut o_acc, mut e_acc) = (0.0, 0.0);
    for k in 0..observed.len() {
        o_acc += observed[k];
        e_acc += expected[k];
        if e_acc >= 5.0 {
            bins.push((o_acc, e_acc));
            o_acc = 0.0;
            e_acc = 0.0;
        }
    }
    let tail_mass = n - expected.iter().sum::<f64>();
    let last = bins.last_mut().unwrap();
    last.0 += o_acc;
    last.1 += e_acc + tail_mass.max(0.0);

    let stat: f64 = bins.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = bins.len() - 1;
    let p = 1.0 - ChiSquared::new(dof as f64).unwrap().cdf(stat);
    (stat, dof, p)
}

/// Worst `|empirical - exact| / standard error` over `k = 0..=k_max`.
pub fn poisson_worst_z(lambda: f64, draws: &[u64], k_max: u64) -> f64 {
    let n = draws.len() as f64;
    (0..=k_max)
        .map(|k| {
            let p = poisson_pmf(lambda, k);
            let emp = draws.iter().filter(|&&d| d == k).count() as f64 / n;
            let se = (p * (1.0 - p) / n).sqrt();
            (emp - p).abs() / se
        })
        .fold(0.0, f64::max)
}

/// Kolmogorov distance between a sample and Uniform(0, 1).
pub fn ks_uniform(sample: &[f64]) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let lo = x - i as f64 / n;
            let hi = (i + 1) as f64 / n - x;
            lo.max(hi)
        })
        .fold(0.0, f64::max)
}

/// Standard normal pair by Box-Muller.
pub fn normal_pair(rng: &mut SimRng) -> (f64, f64) {
    let r = (-2.0 * rng.uniform().ln()).sqrt();
    let theta = 2.0 * std::f64::consts::PI * rng.uniform();
    (r * theta.cos(), r * theta.sin())
}

/// `(z, Phi(z))` rows of the high-precision reference table.
pub fn normal_cdf_reference() -> Vec<(f64, f64)> {
    include_str!("../fixtures/normal_cdf.csv")
        .lines()
        .skip(1)
        .map(|line| {
            let (z, phi) = line.split_once(',').unwrap();
            (z.parse().unwrap(), phi.parse().unwrap())
        })
        .collect()
}
