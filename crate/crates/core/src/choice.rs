//! Parameter choice rules.
//!
//! The balancing functional compares the solution at level `n` with the next
//! `k` levels, each difference measured in units of the propagated noise:
//!
//! ```text
//! b_k(n) = max_{n < m ≤ n+k} ‖x_nᵟ − x_mᵟ‖ / (4·ρ(m))
//! ```
//!
//! Fast balancing stops at the first `n` with `b_k(n) < τ` and therefore only
//! solves levels `0..=n+k`. Lepskij balancing needs every level up to a cap
//! `N` and returns the first `n` after which the functional stays below `τ`.
//! The discrepancy principle is the noise-level-aware baseline.
//!
//! Everything in [`oracle_parameters`] and [`efficiency_ratio`] needs the
//! true solution and exists for evaluation only.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regularization::{LevelSource, RegPath};
use crate::spectral::{dist, SpectralOperator, SpectralVector};

/// Parameters shared by both balancing rules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalancingConfig {
    /// Look-ahead width.
    pub k: usize,
    pub tau: f64,
    /// Lepskij cap `N`. Fast balancing ignores it.
    pub n_cap: usize,
}

impl BalancingConfig {
    pub fn new(k: usize, tau: f64, n_cap: usize) -> Result<Self> {
        let cfg = Self { k, tau, n_cap };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `k = 1`, `τ = 1`, `N = n_max`.
    pub fn default_for(n_max: usize) -> Self {
        Self { k: 1, tau: 1.0, n_cap: n_max }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::domain("k", "must be at least 1"));
        }
        if !(self.tau.is_finite() && self.tau >= 0.0) {
            return Err(Error::domain("tau", format!("must be nonnegative, got {}", self.tau)));
        }
        Ok(())
    }

    /// `τ < 1` is admissible for fast balancing but not covered by the
    /// oracle theorems.
    pub fn outside_theory(&self) -> bool {
        self.tau < 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Fast,
    Lepskij,
    Morozov,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Fast => "fast",
            Method::Lepskij => "lepskij",
            Method::Morozov => "morozov",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fast" => Ok(Method::Fast),
            "lepskij" => Ok(Method::Lepskij),
            "morozov" => Ok(Method::Morozov),
            other => Err(Error::domain("method", format!("unknown method `{other}`"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    ThresholdMet,
    GridExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceOutcome {
    pub method: Method,
    pub chosen_n: usize,
    /// `(n, statistic)` for every level evaluated: `b_k(n)` for the balancing
    /// rules, the residual norm for the discrepancy principle.
    pub functional_trace: Vec<(usize, f64)>,
    pub solves_used: usize,
    pub stopped: StopReason,
    pub outside_theory: bool,
}

fn b_from_source<S: LevelSource + ?Sized>(source: &mut S, n: usize, k: usize) -> Result<f64> {
    let n_max = source.grid().n_max();
    if n + k > n_max {
        return Err(Error::Index { n: n + k, n_max });
    }
    for m in n..=n + k {
        source.ensure(m)?;
    }
    let base = source.level(n).coeffs();
    let mut best = 0.0f64;
    for m in n + 1..=n + k {
        let rho = source.rho(m);
        if !(rho > 0.0) {
            return Err(Error::domain("rho", format!("not positive at level {m}")));
        }
        best = best.max(dist(base, source.level(m).coeffs()) / (4.0 * rho));
    }
    Ok(best)
}

/// `b_k(n)` on a materialized path.
pub fn balancing_functional(path: &RegPath, n: usize, k: usize) -> Result<f64> {
    if k < 1 {
        return Err(Error::domain("k", "must be at least 1"));
    }
    let mut p = PathView(path);
    b_from_source(&mut p, n, k)
}

/// Read-only adapter so pure functions can reuse the level-source code.
struct PathView<'a>(&'a RegPath);

impl LevelSource for PathView<'_> {
    fn grid(&self) -> &crate::regularization::RegGrid {
        &self.0.grid
    }
    fn ensure(&mut self, n: usize) -> Result<()> {
        self.0.grid.check_level(n)
    }
    fn level(&self, n: usize) -> &SpectralVector {
        &self.0.solutions_noisy[n]
    }
    fn rho(&self, n: usize) -> f64 {
        self.0.rho[n]
    }
    fn solves(&self) -> usize {
        self.0.solve_count
    }
}

/// First `n` with `b_k(n) < τ`, pulling levels on demand.
///
/// When no level up to `n_max − k` qualifies, returns `n_max − k` flagged
/// [`StopReason::GridExhausted`].
pub fn fast_balancing<S: LevelSource + ?Sized>(source: &mut S, cfg: &BalancingConfig) -> Result<ChoiceOutcome> {
    cfg.validate()?;
    let n_max = source.grid().n_max();
    if cfg.k > n_max {
        return Err(Error::domain("k", format!("exceeds n_max = {n_max}")));
    }
    let mut trace = Vec::new();
    for n in 0..=n_max - cfg.k {
        let b = b_from_source(source, n, cfg.k)?;
        trace.push((n, b));
        if b < cfg.tau {
            return Ok(ChoiceOutcome {
                method: Method::Fast,
                chosen_n: n,
                functional_trace: trace,
                solves_used: n + cfg.k + 1,
                stopped: StopReason::ThresholdMet,
                outside_theory: cfg.outside_theory(),
            });
        }
    }
    Ok(ChoiceOutcome {
        method: Method::Fast,
        chosen_n: n_max - cfg.k,
        functional_trace: trace,
        solves_used: n_max + 1,
        stopped: StopReason::GridExhausted,
        outside_theory: cfg.outside_theory(),
    })
}

/// Smallest `n` with `b_k(m) < τ` for every `n ≤ m ≤ N − k`.
///
/// If even `b_k(N − k) ≥ τ` the cap `N` itself is returned, flagged
/// [`StopReason::GridExhausted`].
pub fn lepskij_balancing(path: &RegPath, cfg: &BalancingConfig) -> Result<ChoiceOutcome> {
    cfg.validate()?;
    let n_cap = cfg.n_cap;
    if n_cap > path.n_max() {
        return Err(Error::domain("N", format!("{n_cap} exceeds n_max = {}", path.n_max())));
    }
    if cfg.k > n_cap {
        return Err(Error::domain("k", format!("exceeds N = {n_cap}")));
    }
    let last = n_cap - cfg.k;
    let values = (0..=last)
        .map(|m| balancing_functional(path, m, cfg.k))
        .collect::<Result<Vec<_>>>()?;
    Ok(lepskij_from_values(&values, cfg.tau, n_cap, cfg.outside_theory()))
}

fn lepskij_from_values(values: &[f64], tau: f64, n_cap: usize, outside_theory: bool) -> ChoiceOutcome {
    let below = values.iter().rev().take_while(|&&b| b < tau).count();
    let (chosen_n, stopped) = if below == 0 {
        (n_cap, StopReason::GridExhausted)
    } else {
        (values.len() - below, StopReason::ThresholdMet)
    };
    ChoiceOutcome {
        method: Method::Lepskij,
        chosen_n,
        functional_trace: values.iter().copied().enumerate().collect(),
        solves_used: n_cap + 1,
        stopped,
        outside_theory,
    }
}

/// Smallest `n` with `‖A x_nᵟ − yᵟ‖ ≤ τ_m·δ`.
pub fn morozov_discrepancy(
    op: &SpectralOperator,
    y_noisy: &SpectralVector,
    path: &RegPath,
    tau_m: f64,
    delta: f64,
) -> Result<ChoiceOutcome> {
    if !(tau_m >= 1.0 && tau_m.is_finite()) {
        return Err(Error::domain("tau_m", format!("must be at least 1, got {tau_m}")));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::domain("delta", format!("must be positive, got {delta}")));
    }
    crate::error::check_len(op.dim(), y_noisy.len())?;
    let residuals: Vec<f64> = path
        .solutions_noisy
        .iter()
        .map(|x| {
            op.sigma()
                .iter()
                .zip(x.coeffs())
                .zip(y_noisy.coeffs())
                .map(|((s, xk), yk)| {
                    let r = s * xk - yk;
                    r * r
                })
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    Ok(discrepancy_from_residuals(&residuals, tau_m * delta))
}

fn discrepancy_from_residuals(residuals: &[f64], threshold: f64) -> ChoiceOutcome {
    let hit = residuals.iter().position(|&r| r <= threshold);
    let last = residuals.len() - 1;
    let (chosen_n, stopped) = match hit {
        Some(n) => (n, StopReason::ThresholdMet),
        None => (last, StopReason::GridExhausted),
    };
    let evaluated = hit.map_or(residuals.len(), |n| n + 1);
    ChoiceOutcome {
        method: Method::Morozov,
        chosen_n,
        functional_trace: residuals[..evaluated].iter().copied().enumerate().collect(),
        solves_used: evaluated,
        stopped,
        outside_theory: false,
    }
}

/// Oracle indices computed from ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleParameters {
    /// Best achievable noisy error.
    pub n_o: usize,
    /// Best `‖x_n − x‖ + ρ(n)`.
    pub n_oo: usize,
    /// First crossing of the clean error below ρ; absent when noise dominates.
    pub n_opt: Option<usize>,
}

fn argmin(values: impl Iterator<Item = f64>) -> usize {
    values
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, v)| if v < best.1 { (i, v) } else { best })
        .0
}

pub fn oracle_parameters(path: &RegPath) -> OracleParameters {
    oracle_from_curves(&path.err_noisy, &path.err_clean, &path.rho)
}

fn oracle_from_curves(err_noisy: &[f64], err_clean: &[f64], rho: &[f64]) -> OracleParameters {
    OracleParameters {
        n_o: argmin(err_noisy.iter().copied()),
        n_oo: argmin(err_clean.iter().zip(rho).map(|(e, r)| e + r)),
        n_opt: n_opt_from_curves(err_clean, rho),
    }
}

/// `n_opt` from the clean error and noise curves alone.
pub fn n_opt_from_curves(err_clean: &[f64], rho: &[f64]) -> Option<usize> {
    (0..err_clean.len().saturating_sub(1))
        .find(|&n| err_clean[n] > rho[n] && err_clean[n + 1] <= rho[n + 1])
}

/// `‖x_n − x‖ + ρ(n)`.
pub fn oracle_sum(path: &RegPath, n: usize) -> f64 {
    path.err_clean[n] + path.rho[n]
}

/// Deterministic oracle-inequality constant
/// `((4τ+3)/2)·min_{1≤κ≤k} w2^κ/(1−w1^κ)`.
pub fn oracle_constant_c(tau: f64, k: usize, w1: f64, w2: f64) -> Result<f64> {
    if !(w1 > 0.0 && w1 < 1.0) {
        return Err(Error::domain("w1", format!("must lie in (0,1), got {w1}")));
    }
    if !(w2 > 1.0 && w2.is_finite()) {
        return Err(Error::domain("w2", format!("must exceed 1, got {w2}")));
    }
    if !(tau >= 1.0 && tau.is_finite()) {
        return Err(Error::domain("tau", format!("must be at least 1, got {tau}")));
    }
    if k < 1 {
        return Err(Error::domain("k", "must be at least 1"));
    }
    let best = (1..=k as i32)
        .map(|kappa| w2.powi(kappa) / (1.0 - w1.powi(kappa)))
        .fold(f64::INFINITY, f64::min);
    Ok((4.0 * tau + 3.0) / 2.0 * best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Efficiency {
    /// Error over `‖x_{n_opt} − x‖ + ρ(n_opt)`; absent without `n_opt`.
    pub vs_oo: Option<f64>,
    /// Error over the best noisy error on the grid.
    pub vs_best: f64,
}

impl Efficiency {
    pub fn require_vs_oo(&self) -> Result<f64> {
        self.vs_oo.ok_or(Error::AbsentOracle)
    }
}

pub fn efficiency_ratio(path: &RegPath, chosen_n: usize) -> Result<Efficiency> {
    path.grid.check_level(chosen_n)?;
    let err = path.err_noisy[chosen_n];
    let best = path.err_noisy.iter().copied().fold(f64::INFINITY, f64::min);
    let vs_best = if best > 0.0 {
        err / best
    } else if err == 0.0 {
        1.0
    } else {
        f64::INFINITY
    };
    let vs_oo = n_opt_from_curves(&path.err_clean, &path.rho).map(|n| err / oracle_sum(path, n));
    Ok(Efficiency { vs_oo, vs_best })
}
