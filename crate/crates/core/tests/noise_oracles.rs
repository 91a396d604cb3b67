//! Monte Carlo checks of the noise samplers and ρ against closed forms.

use fastbal::noise::{estimate_rho_from_replicates, sample_colored, sample_white};
use fastbal::regularization::{regularized_solution, rho_stochastic, FilterKind, RegGrid};
use fastbal::spectral::{make_operator, Decay, SpectralVector};

/// Per-mode sample variance, and its standard error under Gaussianity.
fn variance_check(draws: &[SpectralVector], std: &[f64]) {
    let m = draws.len() as f64;
    for (k, &s) in std.iter().enumerate() {
        let var = draws.iter().map(|d| d.0[k] * d.0[k]).sum::<f64>() / m;
        let se = s * s * (2.0 / m).sqrt();
        assert!((var - s * s).abs() <= 3.0 * se, "mode {k}: {var} vs {}", s * s);
    }
}

#[test]
fn white_noise_has_the_requested_variance() {
    let delta = 0.3;
    let draws: Vec<SpectralVector> = (0..100_000).map(|s| sample_white(4, delta, s).unwrap().xi).collect();
    variance_check(&draws, &[delta; 4]);
}

#[test]
fn colored_noise_has_the_requested_variance() {
    let std = [2.0, 0.5, 0.1, 0.0];
    let draws: Vec<SpectralVector> = (0..100_000).map(|s| sample_colored(&std, s).unwrap().xi).collect();
    variance_check(&draws[..], &std[..3]);
    assert!(draws.iter().all(|d| d.0[3] == 0.0));
}

#[test]
fn rho_matches_propagated_noise_energy() {
    let dim = 50;
    let delta = 0.01;
    let op = make_operator(Decay::Polynomial { exponent: 1.0 }, dim, 1.0).unwrap();
    let grid = RegGrid::default_for(&op);
    let n = 20;
    let rho = rho_stochastic(&op, &grid, FilterKind::Tikhonov, n, &vec![delta; dim]).unwrap();
    let samples = 100_000;
    let sq: Vec<f64> = (0..samples)
        .map(|s| {
            let xi = sample_white(dim, delta, s as u64).unwrap().xi;
            regularized_solution(&op, &xi, &grid, FilterKind::Tikhonov, n).unwrap().norm().powi(2)
        })
        .collect();
    let m = samples as f64;
    let mean = sq.iter().sum::<f64>() / m;
    let var = sq.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    let se = (var / m).sqrt();
    assert!((mean - rho * rho).abs() <= 3.0 * se, "{mean} vs {}", rho * rho);
}

#[test]
fn replicate_estimate_is_within_five_percent() {
    let dim = 100;
    let delta = 0.05;
    let op = make_operator(Decay::Geometric { base: 0.8 }, dim, 1.0).unwrap();
    let grid = RegGrid::default_for(&op);
    let reps: Vec<SpectralVector> = (0..1000).map(|s| sample_white(dim, delta, 7_000 + s).unwrap().xi).collect();
    let est = estimate_rho_from_replicates(&reps, &op, &grid, FilterKind::Tikhonov).unwrap();
    assert!(!est.low_confidence);
    for n in 0..grid.len() {
        let exact = rho_stochastic(&op, &grid, FilterKind::Tikhonov, n, &vec![delta; dim]).unwrap();
        assert!((est.rho[n] / exact - 1.0).abs() <= 0.05, "level {n}: {} vs {exact}", est.rho[n]);
    }
}
