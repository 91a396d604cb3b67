//! Monte Carlo and structural checks of the assumptions behind the oracle
//! bounds.
//!
//! Every probe returns a plain report struct; callers decide whether a
//! failed check is fatal. Monte Carlo probes split their samples into fixed
//! chunks, each chunk drawing from its own derived stream, so results are
//! identical regardless of how many threads run them.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::noise::NoiseSpec;
use crate::regularization::{noise_free_error_curve, FilterKind, NoiseBehavior, RegGrid};
use crate::rng::{self, StreamTag};
use crate::spectral::{ProblemInstance, SpectralOperator, SpectralVector};

/// Samples per derived stream in Monte Carlo probes.
const CHUNK: usize = 1000;

/// Default sample count for tail probes.
pub const TAIL_SAMPLES: usize = 100_000;
/// Default sample count for decomposition and moment probes.
pub const DECOMPOSITION_SAMPLES: usize = 10_000;
/// Monte Carlo tolerance in standard errors.
pub const MC_SIGMAS: f64 = 3.0;

/// Relative increment of the inverse-norm partial sums over the last tenth
/// of modes below which the sum counts as converged.
pub const INVERSE_NORM_TOL: f64 = 1e-6;

fn chunks(samples: usize) -> Vec<(u64, usize)> {
    (0..samples.div_ceil(CHUNK))
        .map(|c| (c as u64, CHUNK.min(samples - c * CHUNK)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssumptionVariant {
    /// `‖(A*A)⁻¹x‖ < ∞`.
    InverseNorm,
    /// `C²t^(2ν) ≤ Σ_{σ_k² ≤ t} x_k² ≤ D²t^(2ν)`.
    TwoSidedPower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    /// Variant the solution is judged to satisfy; `TwoSidedPower` when
    /// neither holds.
    pub variant: AssumptionVariant,
    pub nu_fit: Option<f64>,
    pub c_fit: Option<f64>,
    pub d_fit: Option<f64>,
    /// Range of `t` used by the power fit.
    pub fit_t_range: Option<(f64, f64)>,
    /// `Σ x_k²/σ_k⁴` over all modes.
    pub inverse_norm_partial: f64,
    /// Share of that sum contributed by the last tenth of modes.
    pub inverse_norm_increment: f64,
    pub satisfied: bool,
}

/// Fits the tail sums `S(t) = Σ_{σ_k² ≤ t} x_k²` at `t = σ_j²` by a straight
/// line in log-log coordinates over the middle half of the modes, and checks
/// convergence of `Σ x_k²/σ_k⁴`.
pub fn check_source_assumption(x: &SpectralVector, op: &SpectralOperator) -> Result<AssumptionReport> {
    check_len(op.dim(), x.len())?;
    if x.coeffs().iter().all(|&v| v == 0.0) {
        return Err(Error::domain("x", "all coefficients are zero"));
    }
    let sigma = op.sigma();
    let dim = op.dim();

    // suffix sums; ties in σ share the sum starting at their first index
    let mut suffix = vec![0.0; dim + 1];
    for k in (0..dim).rev() {
        suffix[k] = suffix[k + 1] + x.0[k] * x.0[k];
    }
    let mut tail = vec![0.0; dim];
    let mut first = 0;
    for j in 0..dim {
        if sigma[j] != sigma[first] {
            first = j;
        }
        tail[j] = suffix[first];
    }

    let lo = dim / 4;
    let hi = (3 * dim / 4).max(lo + 2).min(dim);
    let pts: Vec<(f64, f64)> = (lo..hi)
        .filter(|&j| tail[j] > 0.0)
        .map(|j| ((sigma[j] * sigma[j]).ln(), tail[j].ln()))
        .collect();
    let (nu_fit, c_fit, d_fit, fit_t_range) = match fit_slope(&pts) {
        Some(slope) => {
            let nu = slope / 2.0;
            let offsets = pts.iter().map(|(lt, ls)| ls - 2.0 * nu * lt);
            let (mn, mx) = offsets.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), o| (a.min(o), b.max(o)));
            let t_lo = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min).exp();
            let t_hi = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max).exp();
            (Some(nu), Some((mn / 2.0).exp()), Some((mx / 2.0).exp()), Some((t_lo, t_hi)))
        }
        None => (None, None, None, None),
    };

    let terms: Vec<f64> = sigma
        .iter()
        .zip(x.coeffs())
        .map(|(s, v)| (v * v) / (s * s * s * s))
        .collect();
    let total: f64 = terms.iter().sum();
    let last = dim - (dim / 10).max(1);
    let increment = if total > 0.0 && total.is_finite() {
        terms[last..].iter().sum::<f64>() / total
    } else {
        f64::INFINITY
    };
    let inverse_ok = increment < INVERSE_NORM_TOL;
    let power_ok = nu_fit.is_some_and(|nu| nu > 0.0 && nu < 1.0);

    Ok(AssumptionReport {
        variant: if inverse_ok {
            AssumptionVariant::InverseNorm
        } else {
            AssumptionVariant::TwoSidedPower
        },
        nu_fit,
        c_fit,
        d_fit,
        fit_t_range,
        inverse_norm_partial: total,
        inverse_norm_increment: increment,
        satisfied: inverse_ok || power_ok,
    })
}

/// Least-squares slope; `None` for fewer than two distinct abscissae.
fn fit_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Thresholds at which the tail bound is checked by default.
pub const TAIL_Z_GRID: [f64; 6] = [0.0, 1.0, 2.0, 4.0, 8.0, 16.0];

/// Normalized weight vectors covering the extremes of the tail lemma: one
/// mode, ten equal modes, and 100 modes with `α_k² ∝ 0.9^k`.
pub fn standard_weight_sets() -> Vec<(&'static str, Vec<f64>)> {
    let normalize = |w: Vec<f64>| {
        let s = w.iter().map(|a| a * a).sum::<f64>().sqrt();
        w.into_iter().map(|a| a / s).collect::<Vec<f64>>()
    };
    vec![
        ("single", vec![1.0]),
        ("flat10", normalize(vec![1.0; 10])),
        ("geom100", normalize((0..100).map(|k| 0.9f64.powi(k).sqrt()).collect())),
    ]
}

/// `√2·e^(−z/4)`.
pub fn tail_bound(z: f64) -> f64 {
    std::f64::consts::SQRT_2 * (-z / 4.0).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailProbeReport {
    pub z_grid: Vec<f64>,
    pub empirical_prob: Vec<f64>,
    pub bound: Vec<f64>,
    pub std_err: Vec<f64>,
    pub samples: usize,
    pub violations: usize,
}

/// Empirical tail of `Z = Σ α_k²ζ_k²` against `√2·e^(−z/4)`.
pub fn tail_bound_probe(alpha: &[f64], z_grid: &[f64], samples: usize, seed: u64) -> Result<TailProbeReport> {
    if alpha.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
        return Err(Error::domain("alpha", "weights must be finite and nonnegative"));
    }
    let norm: f64 = alpha.iter().map(|a| a * a).sum();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::domain("alpha", format!("sum of squares is {norm}, expected 1")));
    }
    if samples < 10_000 {
        return Err(Error::domain("samples", format!("need at least 10^4, got {samples}")));
    }
    let w2: Vec<f64> = alpha.iter().map(|a| a * a).collect();
    let counts = chunks(samples)
        .into_par_iter()
        .map(|(c, len)| {
            let mut r = rng::derived(seed, StreamTag::Probe, c, 0);
            let mut counts = vec![0usize; z_grid.len()];
            for _ in 0..len {
                let z: f64 = w2
                    .iter()
                    .map(|w| {
                        let g: f64 = r.sample(StandardNormal);
                        w * g * g
                    })
                    .sum();
                for (cnt, &zz) in counts.iter_mut().zip(z_grid) {
                    if z >= zz {
                        *cnt += 1;
                    }
                }
            }
            counts
        })
        .reduce(
            || vec![0usize; z_grid.len()],
            |a, b| a.iter().zip(&b).map(|(x, y)| x + y).collect(),
        );
    let ns = samples as f64;
    let empirical_prob: Vec<f64> = counts.iter().map(|&c| c as f64 / ns).collect();
    let std_err: Vec<f64> = empirical_prob.iter().map(|p| (p * (1.0 - p) / ns).sqrt()).collect();
    let bound: Vec<f64> = z_grid.iter().map(|&z| tail_bound(z)).collect();
    let violations = empirical_prob
        .iter()
        .zip(&bound)
        .zip(&std_err)
        .filter(|((p, b), se)| **p > **b + MC_SIGMAS * **se)
        .count();
    Ok(TailProbeReport {
        z_grid: z_grid.to_vec(),
        empirical_prob,
        bound,
        std_err,
        samples,
        violations,
    })
}

/// `c5 = (4·Γ(3))^(1/4)`.
pub fn moment_constant_c5() -> f64 {
    let gamma_3 = 2.0; // Γ(3) = 2!
    (4.0f64 * gamma_3).powf(0.25)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    /// `E‖x − x_nᵟ‖⁴ / (E‖x − x_nᵟ‖²)²`, empirical.
    pub ratio: f64,
    pub std_err: f64,
    pub c5: f64,
    pub pass: bool,
}

/// Per-mode bias `x_k − g_k·y_k` and noise gain `g_k·std_k` at level `n`.
fn level_terms(
    instance: &ProblemInstance,
    alpha: f64,
    kind: FilterKind,
    mode_std: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let sigma = instance.operator().sigma();
    let x = instance.x_true().coeffs();
    let bias = sigma
        .iter()
        .zip(x)
        .map(|(&s, &xk)| xk * kind.residual_factor(s, alpha))
        .collect();
    let gain = sigma
        .iter()
        .zip(mode_std)
        .map(|(&s, &sd)| kind.factor(s, alpha) * sd)
        .collect();
    (bias, gain)
}

fn stochastic_std(noise: &NoiseSpec, dim: usize) -> Result<Vec<f64>> {
    match noise.behavior(dim)? {
        NoiseBehavior::Stochastic { mode_std } => Ok(mode_std),
        NoiseBehavior::Deterministic { .. } => Err(Error::ModelMismatch(
            "probe needs a Gaussian noise model".into(),
        )),
    }
}

/// Fourth-to-squared-second moment ratio of the error at level `n`.
pub fn moment_ratio_probe(
    instance: &ProblemInstance,
    grid: &RegGrid,
    kind: FilterKind,
    noise: &NoiseSpec,
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<MomentReport> {
    let mode_std = stochastic_std(noise, instance.dim())?;
    let alpha = grid.alpha(n)?;
    if samples < 2 {
        return Err(Error::InsufficientData("need at least 2 samples".into()));
    }
    let (bias, gain) = level_terms(instance, alpha, kind, &mode_std);
    // sums of e, e², e³, e⁴ with e = ‖x − x_nᵟ‖²
    let sums = chunks(samples)
        .into_par_iter()
        .map(|(c, len)| {
            let mut r = rng::derived(seed, StreamTag::Probe, c, 0);
            let mut s = [0.0f64; 4];
            for _ in 0..len {
                let e: f64 = bias
                    .iter()
                    .zip(&gain)
                    .map(|(b, g)| {
                        let z: f64 = r.sample(StandardNormal);
                        let d = b - g * z;
                        d * d
                    })
                    .sum();
                s[0] += e;
                s[1] += e * e;
                s[2] += e * e * e;
                s[3] += e * e * e * e;
            }
            s
        })
        .reduce(|| [0.0; 4], |a, b| [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]);
    let ns = samples as f64;
    let m1 = sums[0] / ns;
    let m2 = sums[1] / ns;
    let m3 = sums[2] / ns;
    let m4 = sums[3] / ns;
    let ratio = m2 / (m1 * m1);
    // delta method for g(m1, m2) = m2/m1²
    let var_e = m2 - m1 * m1;
    let var_e2 = m4 - m2 * m2;
    let cov = m3 - m1 * m2;
    let d1 = -2.0 * m2 / (m1 * m1 * m1);
    let d2 = 1.0 / (m1 * m1);
    let var_ratio = (d1 * d1 * var_e + d2 * d2 * var_e2 + 2.0 * d1 * d2 * cov).max(0.0) / ns;
    let std_err = var_ratio.sqrt();
    let c5 = moment_constant_c5();
    Ok(MomentReport {
        ratio,
        std_err,
        c5,
        pass: ratio <= c5 * c5 + MC_SIGMAS * std_err,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompositionRow {
    pub n: usize,
    /// Empirical `E‖x_nᵟ − x‖²`.
    pub lhs: f64,
    /// `‖x_n − x‖² + ρ(n)²`.
    pub rhs: f64,
    pub std_err: f64,
    pub pass: bool,
}

/// Checks `E‖x_nᵟ − x‖² = ‖x_n − x‖² + ρ(n)²` at every level.
pub fn decomposition_probe(
    instance: &ProblemInstance,
    grid: &RegGrid,
    kind: FilterKind,
    noise: &NoiseSpec,
    samples: usize,
    seed: u64,
) -> Result<Vec<DecompositionRow>> {
    let mode_std = stochastic_std(noise, instance.dim())?;
    if samples < 2 {
        return Err(Error::InsufficientData("need at least 2 samples".into()));
    }
    let levels = grid.len();
    let terms: Vec<(Vec<f64>, Vec<f64>)> = (0..levels)
        .map(|n| level_terms(instance, grid.alpha_unchecked(n), kind, &mode_std))
        .collect();
    let dim = instance.dim();
    let (s1, s2) = chunks(samples)
        .into_par_iter()
        .map(|(c, len)| {
            let mut r = rng::derived(seed, StreamTag::Probe, c, 0);
            let mut s1 = vec![0.0f64; levels];
            let mut s2 = vec![0.0f64; levels];
            let mut z = vec![0.0f64; dim];
            for _ in 0..len {
                z.iter_mut().for_each(|v| *v = r.sample(StandardNormal));
                for (n, (bias, gain)) in terms.iter().enumerate() {
                    let e: f64 = bias
                        .iter()
                        .zip(gain)
                        .zip(&z)
                        .map(|((b, g), zz)| {
                            let d = b - g * zz;
                            d * d
                        })
                        .sum();
                    s1[n] += e;
                    s2[n] += e * e;
                }
            }
            (s1, s2)
        })
        .reduce(
            || (vec![0.0; levels], vec![0.0; levels]),
            |a, b| {
                (
                    a.0.iter().zip(&b.0).map(|(x, y)| x + y).collect(),
                    a.1.iter().zip(&b.1).map(|(x, y)| x + y).collect(),
                )
            },
        );
    let err = noise_free_error_curve(instance, grid, kind);
    let ns = samples as f64;
    Ok((0..levels)
        .map(|n| {
            let lhs = s1[n] / ns;
            let var = (s2[n] / ns - lhs * lhs).max(0.0) * ns / (ns - 1.0);
            let std_err = (var / ns).sqrt();
            let rho2: f64 = terms[n].1.iter().map(|g| g * g).sum();
            let rhs = err[n] * err[n] + rho2;
            // floor the tolerance at rounding level for noise-free limits
            let tol = (MC_SIGMAS * std_err).max(1e-12 * rhs);
            DecompositionRow {
                n,
                lhs,
                rhs,
                std_err,
                pass: (lhs - rhs).abs() <= tol,
            }
        })
        .collect())
}

/// Empirical distribution of the fast-balancing stop relative to `n_opt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopDistribution {
    /// Offset `n_* − n_opt` → frequency.
    pub histogram: BTreeMap<i64, f64>,
    pub counts: BTreeMap<i64, usize>,
    pub n_opt_per_trial: Vec<usize>,
    pub trials: usize,
    pub excluded: usize,
    /// Fitted geometric base of the late-stop frequencies,
    /// `freq(j) ≈ base^j`; absent without late stops.
    pub late_base: Option<f64>,
    /// `late_base·e^(τ²/4)`.
    pub c3_fit: Option<f64>,
    pub late_stops: usize,
    /// Early-stop frequencies do not increase as `n_opt − n_*` grows.
    pub early_decay: bool,
    /// Late-stop frequencies do not increase in `j` (3-standard-error slack).
    pub late_decay: bool,
}

/// Frequencies at offsets `start, start+step, …` must not increase beyond
/// `MC_SIGMAS` combined binomial standard errors.
fn nonincreasing_within_noise(counts: &BTreeMap<i64, usize>, total: f64, start: i64, step: i64) -> bool {
    let Some(extreme) = (if step > 0 { counts.keys().next_back() } else { counts.keys().next() }) else {
        return true;
    };
    let freq = |j: i64| *counts.get(&j).unwrap_or(&0) as f64 / total;
    let se = |p: f64| (p * (1.0 - p) / total).sqrt();
    let mut j = start;
    while (step > 0 && j < *extreme) || (step < 0 && j > *extreme) {
        let (a, b) = (freq(j), freq(j + step));
        if b > a + MC_SIGMAS * (se(a).powi(2) + se(b).powi(2)).sqrt() {
            return false;
        }
        j += step;
    }
    true
}

/// Builds the stop distribution from `(n_*, n_opt)` pairs; trials without
/// `n_opt` are excluded.
pub fn stop_distribution_probe(trials: &[(usize, Option<usize>)], tau: f64) -> Result<StopDistribution> {
    let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
    let mut n_opt_per_trial = Vec::new();
    for &(n_star, n_opt) in trials {
        if let Some(n_opt) = n_opt {
            *counts.entry(n_star as i64 - n_opt as i64).or_default() += 1;
            n_opt_per_trial.push(n_opt);
        }
    }
    let used = n_opt_per_trial.len();
    if used == 0 {
        return Err(Error::InsufficientData("no trial has an oracle n_opt".into()));
    }
    let total = used as f64;
    let histogram = counts.iter().map(|(&j, &c)| (j, c as f64 / total)).collect();

    let late: Vec<(f64, f64)> = counts
        .range(1..)
        .map(|(&j, &c)| (j as f64, (c as f64 / total).ln()))
        .collect();
    let late_stops = counts.range(1..).map(|(_, &c)| c).sum();
    // least squares through the origin: ln freq(j) = j·ln base
    let late_base = (!late.is_empty()).then(|| {
        let num: f64 = late.iter().map(|(j, lf)| j * lf).sum();
        let den: f64 = late.iter().map(|(j, _)| j * j).sum();
        (num / den).exp()
    });

    Ok(StopDistribution {
        c3_fit: late_base.map(|b| b * (tau * tau / 4.0).exp()),
        late_base,
        late_stops,
        early_decay: nonincreasing_within_noise(&counts, total, -1, -1),
        late_decay: nonincreasing_within_noise(&counts, total, 1, 1),
        histogram,
        counts,
        n_opt_per_trial,
        trials: trials.len(),
        excluded: trials.len() - used,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseModel;
    use crate::spectral::{make_operator, make_solution, Decay, Smoothness};

    fn white(delta: f64) -> NoiseSpec {
        NoiseSpec {
            model: NoiseModel::White { delta },
            seed: 0,
        }
    }

    #[test]
    fn power_fit_recovers_nu() {
        let sigma: Vec<f64> = (1..=200).map(|k| 2f64.powi(-k)).collect();
        let op = SpectralOperator::new(sigma).unwrap();
        let x = make_solution(&op, Smoothness::Power { nu: 0.25 }, None).unwrap();
        let rep = check_source_assumption(&x, &op).unwrap();
        let nu = rep.nu_fit.unwrap();
        assert!((nu - 0.25).abs() <= 0.05, "nu_fit = {nu}");
        assert!(rep.satisfied);
        assert_eq!(rep.variant, AssumptionVariant::TwoSidedPower);
    }

    #[test]
    fn power_fit_matches_brute_force_slope() {
        // oracle: endpoints of the fit window, tail sums by direct summation
        let sigma: Vec<f64> = (1..=200).map(|k| 2f64.powi(-k)).collect();
        let x: Vec<f64> = sigma.iter().map(|s| s.powf(0.5)).collect();
        let s_at = |j: usize| x[j..].iter().map(|v| v * v).sum::<f64>();
        let (a, b) = (60usize, 120usize);
        let slope = (s_at(b).ln() - s_at(a).ln()) / ((sigma[b] * sigma[b]).ln() - (sigma[a] * sigma[a]).ln());
        assert!((slope / 2.0 - 0.25).abs() < 1e-9);
    }

    #[test]
    fn single_coefficient_satisfies_inverse_norm() {
        let op = make_operator(Decay::Geometric { base: 0.5 }, 50, 1.0).unwrap();
        let mut x = vec![0.0; 50];
        x[0] = 1.0;
        let rep = check_source_assumption(&SpectralVector(x), &op).unwrap();
        assert_eq!(rep.variant, AssumptionVariant::InverseNorm);
        assert!(rep.satisfied);
        assert_eq!(rep.inverse_norm_partial, 1.0);
    }

    #[test]
    fn jittered_power_solution_has_ordered_constants() {
        let op = make_operator(Decay::Geometric { base: 0.7 }, 200, 1.0).unwrap();
        let x = make_solution(&op, Smoothness::Power { nu: 0.25 }, Some(5)).unwrap();
        let rep = check_source_assumption(&x, &op).unwrap();
        assert!(rep.c_fit.unwrap() <= rep.d_fit.unwrap());
    }

    #[test]
    fn zero_solution_is_rejected() {
        let op = make_operator(Decay::Geometric { base: 0.5 }, 10, 1.0).unwrap();
        assert!(check_source_assumption(&SpectralVector::zeros(10), &op).is_err());
    }

    #[test]
    fn tail_bound_values() {
        assert!((tail_bound(4.0) - 0.520_260_8).abs() < 1e-6);
        assert!(tail_bound(0.0) > 1.0);
    }

    #[test]
    fn single_mode_tail_matches_chi_square() {
        // P(χ²₁ ≥ 4) = erfc(√2) ≈ 0.0455
        let mut alpha = vec![0.0; 5];
        alpha[0] = 1.0;
        let rep = tail_bound_probe(&alpha, &[0.0, 4.0], 100_000, 1).unwrap();
        assert_eq!(rep.empirical_prob[0], 1.0);
        assert!((rep.empirical_prob[1] - 0.0455).abs() < 4.0 * rep.std_err[1] + 1e-4);
        assert_eq!(rep.violations, 0);
    }

    #[test]
    fn tail_probe_validates_inputs() {
        assert!(tail_bound_probe(&[1.0, 1.0], &[1.0], 10_000, 0).is_err());
        assert!(tail_bound_probe(&[1.0], &[1.0], 100, 0).is_err());
    }

    #[test]
    fn c5_value() {
        assert!((moment_constant_c5() - 1.681_792_830_507_429).abs() < 1e-12);
    }

    #[test]
    fn moment_probe_rejects_deterministic_noise() {
        let op = make_operator(Decay::Geometric { base: 0.7 }, 20, 1.0).unwrap();
        let x = make_solution(&op, Smoothness::Power { nu: 0.25 }, Some(1)).unwrap();
        let inst = ProblemInstance::new(op, x, "g").unwrap();
        let g = RegGrid::default_for(inst.operator());
        let det = NoiseSpec {
            model: NoiseModel::Deterministic {
                delta: 0.1,
                direction: crate::noise::DirectionPolicy::Flat,
            },
            seed: 0,
        };
        assert!(matches!(
            moment_ratio_probe(&inst, &g, FilterKind::Tikhonov, &det, 3, 100, 0),
            Err(Error::ModelMismatch(_))
        ));
    }

    #[test]
    fn moment_ratio_noise_free_limit_is_one() {
        let op = make_operator(Decay::Geometric { base: 0.7 }, 50, 1.0).unwrap();
        let x = make_solution(&op, Smoothness::Power { nu: 0.25 }, Some(1)).unwrap();
        let inst = ProblemInstance::new(op, x, "g").unwrap();
        let g = RegGrid::default_for(inst.operator());
        let rep = moment_ratio_probe(&inst, &g, FilterKind::Tikhonov, &white(1e-12), 5, 2000, 3).unwrap();
        assert!((rep.ratio - 1.0).abs() < 1e-9);
        assert!(rep.pass);
    }

    #[test]
    fn degenerate_single_mode_ratio_is_three() {
        // zero solution, noise on one mode only: e = g²ξ², so the ratio is
        // E[ζ⁴]/E[ζ²]² = 3, above c5² ≈ 2.83
        let op = SpectralOperator::new(vec![1.0, 0.5]).unwrap();
        let inst = ProblemInstance::new(op, SpectralVector::zeros(2), "zero").unwrap();
        let g = RegGrid::new(1.0, 0.5, 4).unwrap();
        let noise = NoiseSpec {
            model: NoiseModel::Colored { mode_std: vec![1.0, 0.0] },
            seed: 0,
        };
        let rep = moment_ratio_probe(&inst, &g, FilterKind::Tikhonov, &noise, 0, 100_000, 7).unwrap();
        assert!((rep.ratio - 3.0).abs() < 4.0 * rep.std_err, "{rep:?}");
        assert!(!rep.pass);
    }

    #[test]
    fn decomposition_pure_noise_and_noise_free() {
        let op = make_operator(Decay::Geometric { base: 0.7 }, 40, 1.0).unwrap();
        let inst = ProblemInstance::new(op.clone(), SpectralVector::zeros(40), "zero").unwrap();
        let g = RegGrid::default_for(&op);
        let rows = decomposition_probe(&inst, &g, FilterKind::Tikhonov, &white(0.1), 4000, 2).unwrap();
        assert!(rows.iter().all(|r| r.pass), "{rows:?}");

        let x = make_solution(&op, Smoothness::Power { nu: 0.25 }, Some(1)).unwrap();
        let inst = ProblemInstance::new(op, x, "g").unwrap();
        let rows = decomposition_probe(&inst, &g, FilterKind::Tikhonov, &white(1e-150), 100, 2).unwrap();
        let err = noise_free_error_curve(&inst, &g, FilterKind::Tikhonov);
        for r in rows {
            assert!((r.lhs - err[r.n].powi(2)).abs() <= 1e-12 * err[r.n].powi(2));
        }
    }

    #[test]
    fn stop_histogram_sums_to_one() {
        let trials = vec![(3, Some(3)), (4, Some(3)), (2, Some(3)), (5, Some(5)), (1, None)];
        let d = stop_distribution_probe(&trials, 1.0).unwrap();
        let total: f64 = d.histogram.values().sum();
        assert!((total - 1.0).abs() < 1e-15);
        assert_eq!(d.excluded, 1);
        assert_eq!(d.late_stops, 1);
        // one late stop at j=1 with frequency 1/4
        assert!((d.late_base.unwrap() - 0.25).abs() < 1e-15);
        assert!((d.c3_fit.unwrap() - 0.25 * 0.25f64.exp()).abs() < 1e-15);
        assert!(stop_distribution_probe(&[(1, None)], 1.0).is_err());
    }

    #[test]
    fn stop_decay_detection() {
        let mut trials = vec![(10usize, Some(10usize)); 500];
        trials.extend(std::iter::repeat_n((11, Some(10)), 50));
        trials.extend(std::iter::repeat_n((12, Some(10)), 200));
        let d = stop_distribution_probe(&trials, 1.0).unwrap();
        assert!(!d.late_decay);
        assert!(d.early_decay);
    }
}
