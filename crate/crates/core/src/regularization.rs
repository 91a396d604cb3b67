//! Tikhonov (and spectral cut-off) solutions on a geometric parameter grid.
//!
//! Level `n` of the grid uses `α_n = q0·qⁿ`, so larger `n` means weaker
//! regularization. In singular coordinates a regularized solution is
//! `x_k = g(σ_k, α_n)·y_k` with the filter `g` of [`FilterKind`].

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::spectral::{dist, ProblemInstance, SpectralOperator, SpectralVector};

/// Relative error level below which the clean error curve counts as saturated.
pub const SATURATION_REL: f64 = 1e-10;

/// Geometric grid `α_n = q0·qⁿ`, `n = 0..=n_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegGrid {
    q0: f64,
    q: f64,
    n_max: usize,
}

impl RegGrid {
    pub fn new(q0: f64, q: f64, n_max: usize) -> Result<Self> {
        if !(q0.is_finite() && q0 > 0.0) {
            return Err(Error::domain("q0", format!("must be positive, got {q0}")));
        }
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::domain("q", format!("must lie in (0,1), got {q}")));
        }
        if n_max < 2 {
            return Err(Error::domain("n_max", format!("must be at least 2, got {n_max}")));
        }
        Ok(Self { q0, q, n_max })
    }

    /// `q0 = σ₁²`, `q = 1/2`, `n_max = 60`.
    pub fn default_for(op: &SpectralOperator) -> Self {
        Self {
            q0: op.sigma_max() * op.sigma_max(),
            q: 0.5,
            n_max: 60,
        }
    }

    pub fn q0(&self) -> f64 {
        self.q0
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn len(&self) -> usize {
        self.n_max + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn check_level(&self, n: usize) -> Result<()> {
        if n > self.n_max {
            Err(Error::Index { n, n_max: self.n_max })
        } else {
            Ok(())
        }
    }

    /// `α_n` without range check.
    pub(crate) fn alpha_unchecked(&self, n: usize) -> f64 {
        self.q0 * self.q.powi(n as i32)
    }

    pub fn alpha(&self, n: usize) -> Result<f64> {
        self.check_level(n)?;
        Ok(self.alpha_unchecked(n))
    }
}

pub fn alpha_at(grid: &RegGrid, n: usize) -> Result<f64> {
    grid.alpha(n)
}

/// Spectral filter.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKind {
    /// `σ/(σ²+α)`.
    #[default]
    Tikhonov,
    /// `1/σ` when `σ² ≥ α`, else 0. No oracle guarantees are claimed for it.
    SpectralCutoff,
}

impl FilterKind {
    #[inline]
    pub(crate) fn factor(self, sigma: f64, alpha: f64) -> f64 {
        match self {
            FilterKind::Tikhonov => sigma / (sigma * sigma + alpha),
            FilterKind::SpectralCutoff => {
                if sigma * sigma >= alpha {
                    1.0 / sigma
                } else {
                    0.0
                }
            }
        }
    }

    /// `1 − σ·g(σ, α)`, computed without cancellation.
    #[inline]
    pub(crate) fn residual_factor(self, sigma: f64, alpha: f64) -> f64 {
        match self {
            FilterKind::Tikhonov => alpha / (sigma * sigma + alpha),
            FilterKind::SpectralCutoff => {
                if sigma * sigma >= alpha {
                    0.0
                } else {
                    1.0
                }
            }
        }
    }
}

pub fn filter_factor(kind: FilterKind, sigma: f64, alpha: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::domain("sigma", format!("must be positive, got {sigma}")));
    }
    if !(alpha > 0.0) {
        return Err(Error::domain("alpha", format!("must be positive, got {alpha}")));
    }
    Ok(kind.factor(sigma, alpha))
}

fn apply_filter(op: &SpectralOperator, y: &[f64], kind: FilterKind, alpha: f64) -> SpectralVector {
    SpectralVector(
        op.sigma()
            .iter()
            .zip(y)
            .map(|(&s, &yk)| kind.factor(s, alpha) * yk)
            .collect(),
    )
}

/// Regularized solution at level `n`: `x_nᵟ` for noisy data, `x_n` for exact.
pub fn regularized_solution(
    op: &SpectralOperator,
    y: &SpectralVector,
    grid: &RegGrid,
    kind: FilterKind,
    n: usize,
) -> Result<SpectralVector> {
    check_len(op.dim(), y.len())?;
    let alpha = grid.alpha(n)?;
    Ok(apply_filter(op, y.coeffs(), kind, alpha))
}

/// `‖x − x_n‖` for every level.
pub fn noise_free_error_curve(instance: &ProblemInstance, grid: &RegGrid, kind: FilterKind) -> Vec<f64> {
    let sigma = instance.operator().sigma();
    let x = instance.x_true().coeffs();
    (0..grid.len())
        .map(|n| {
            let alpha = grid.alpha_unchecked(n);
            sigma
                .iter()
                .zip(x)
                .map(|(&s, &xk)| {
                    let e = xk * kind.residual_factor(s, alpha);
                    e * e
                })
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

/// Deterministic noise behavior `δ·‖Op_n⁻¹‖`.
pub fn rho_deterministic(
    op: &SpectralOperator,
    grid: &RegGrid,
    kind: FilterKind,
    n: usize,
    delta: f64,
) -> Result<f64> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::domain("delta", format!("must be positive, got {delta}")));
    }
    let alpha = grid.alpha(n)?;
    let max = op
        .sigma()
        .iter()
        .map(|&s| kind.factor(s, alpha))
        .fold(0.0, f64::max);
    Ok(delta * max)
}

/// Stochastic noise behavior `sqrt(E‖Op_n⁻¹ξ‖²)` for independent Gaussian
/// modes with the given standard deviations.
pub fn rho_stochastic(
    op: &SpectralOperator,
    grid: &RegGrid,
    kind: FilterKind,
    n: usize,
    mode_std: &[f64],
) -> Result<f64> {
    check_len(op.dim(), mode_std.len())?;
    if let Some(k) = mode_std.iter().position(|s| !(*s >= 0.0 && s.is_finite())) {
        return Err(Error::domain("mode_std", format!("entry {k} is {}", mode_std[k])));
    }
    let alpha = grid.alpha(n)?;
    Ok(rho_stochastic_unchecked(op, kind, alpha, mode_std))
}

fn rho_stochastic_unchecked(op: &SpectralOperator, kind: FilterKind, alpha: f64, mode_std: &[f64]) -> f64 {
    op.sigma()
        .iter()
        .zip(mode_std)
        .map(|(&s, &sd)| {
            let v = sd * kind.factor(s, alpha);
            v * v
        })
        .sum::<f64>()
        .sqrt()
}

/// How ρ(n) is computed for a noise model.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseBehavior {
    /// `‖ξ‖ ≤ δ`.
    Deterministic { delta: f64 },
    /// Independent Gaussian modes with these standard deviations.
    Stochastic { mode_std: Vec<f64> },
}

impl NoiseBehavior {
    /// ρ at every grid level.
    pub fn rho_curve(&self, op: &SpectralOperator, grid: &RegGrid, kind: FilterKind) -> Result<Vec<f64>> {
        (0..grid.len())
            .map(|n| match self {
                NoiseBehavior::Deterministic { delta } => rho_deterministic(op, grid, kind, n, *delta),
                NoiseBehavior::Stochastic { mode_std } => rho_stochastic(op, grid, kind, n, mode_std),
            })
            .collect()
    }

    /// Noise-norm level handed to the discrepancy principle: `δ` for the
    /// deterministic model, `sqrt(Σ std²) = sqrt(E‖ξ‖²)` for Gaussian models.
    pub fn norm_level(&self) -> f64 {
        match self {
            NoiseBehavior::Deterministic { delta } => *delta,
            NoiseBehavior::Stochastic { mode_std } => mode_std.iter().map(|s| s * s).sum::<f64>().sqrt(),
        }
    }
}

/// Source of noisy regularized solutions, produced level by level.
///
/// Stopping rules pull levels through this trait; a lazy implementation only
/// solves the levels that are actually requested.
pub trait LevelSource {
    fn grid(&self) -> &RegGrid;
    /// Makes level `n` available, solving it if needed.
    fn ensure(&mut self, n: usize) -> Result<()>;
    /// `x_nᵟ`; panics unless [`LevelSource::ensure`] succeeded for `n`.
    fn level(&self, n: usize) -> &SpectralVector;
    fn rho(&self, n: usize) -> f64;
    /// Number of distinct levels solved so far.
    fn solves(&self) -> usize;
}

/// Lazily solved path over noisy data.
#[derive(Debug, Clone)]
pub struct LazyPath<'a> {
    op: &'a SpectralOperator,
    y_noisy: &'a SpectralVector,
    grid: RegGrid,
    kind: FilterKind,
    rho: Vec<f64>,
    levels: Vec<Option<SpectralVector>>,
    solves: usize,
}

impl<'a> LazyPath<'a> {
    pub fn new(
        op: &'a SpectralOperator,
        y_noisy: &'a SpectralVector,
        grid: RegGrid,
        kind: FilterKind,
        rho: Vec<f64>,
    ) -> Result<Self> {
        check_len(op.dim(), y_noisy.len())?;
        check_len(grid.len(), rho.len())?;
        Ok(Self {
            op,
            y_noisy,
            grid,
            kind,
            rho,
            levels: vec![None; grid.len()],
            solves: 0,
        })
    }
}

impl LevelSource for LazyPath<'_> {
    fn grid(&self) -> &RegGrid {
        &self.grid
    }

    fn ensure(&mut self, n: usize) -> Result<()> {
        self.grid.check_level(n)?;
        if self.levels[n].is_none() {
            let alpha = self.grid.alpha_unchecked(n);
            self.levels[n] = Some(apply_filter(self.op, self.y_noisy.coeffs(), self.kind, alpha));
            self.solves += 1;
        }
        Ok(())
    }

    fn level(&self, n: usize) -> &SpectralVector {
        self.levels[n].as_ref().expect("level not solved")
    }

    fn rho(&self, n: usize) -> f64 {
        self.rho[n]
    }

    fn solves(&self) -> usize {
        self.solves
    }
}

/// Fully materialized regularization path for one noisy data vector.
#[derive(Debug, Clone)]
pub struct RegPath {
    pub grid: RegGrid,
    pub filter: FilterKind,
    pub solutions_noisy: Vec<SpectralVector>,
    pub solutions_clean: Vec<SpectralVector>,
    /// `‖x − x_n‖`.
    pub err_clean: Vec<f64>,
    /// `‖x − x_nᵟ‖`; ground truth, used only by oracles and reports.
    pub err_noisy: Vec<f64>,
    pub rho: Vec<f64>,
    pub solve_count: usize,
}

impl RegPath {
    pub fn build(
        instance: &ProblemInstance,
        y_noisy: &SpectralVector,
        grid: RegGrid,
        filter: FilterKind,
        rho: Vec<f64>,
    ) -> Result<Self> {
        let op = instance.operator();
        check_len(op.dim(), y_noisy.len())?;
        check_len(grid.len(), rho.len())?;
        let x = instance.x_true().coeffs();
        let mut solutions_noisy = Vec::with_capacity(grid.len());
        let mut solutions_clean = Vec::with_capacity(grid.len());
        let mut err_noisy = Vec::with_capacity(grid.len());
        for n in 0..grid.len() {
            let alpha = grid.alpha_unchecked(n);
            let xn_d = apply_filter(op, y_noisy.coeffs(), filter, alpha);
            err_noisy.push(dist(xn_d.coeffs(), x));
            solutions_noisy.push(xn_d);
            solutions_clean.push(apply_filter(op, instance.y_exact().coeffs(), filter, alpha));
        }
        Ok(Self {
            err_clean: noise_free_error_curve(instance, &grid, filter),
            grid,
            filter,
            solutions_noisy,
            solutions_clean,
            err_noisy,
            rho,
            solve_count: grid.len(),
        })
    }

    pub fn n_max(&self) -> usize {
        self.grid.n_max()
    }

    /// Tab-separated export, one row per level.
    pub fn to_rows(&self) -> String {
        let mut out = String::from("n\talpha\terr_clean\trho\terr_noisy\n");
        for n in 0..self.grid.len() {
            let _ = writeln!(
                out,
                "{n}\t{:e}\t{:e}\t{:e}\t{:e}",
                self.grid.alpha_unchecked(n),
                self.err_clean[n],
                self.rho[n],
                self.err_noisy[n]
            );
        }
        out
    }
}

/// A materialized path is a level source that has already paid for every level.
impl LevelSource for RegPath {
    fn grid(&self) -> &RegGrid {
        &self.grid
    }

    fn ensure(&mut self, n: usize) -> Result<()> {
        self.grid.check_level(n)
    }

    fn level(&self, n: usize) -> &SpectralVector {
        &self.solutions_noisy[n]
    }

    fn rho(&self, n: usize) -> f64 {
        self.rho[n]
    }

    fn solves(&self) -> usize {
        self.solve_count
    }
}

/// Last level whose clean error exceeds `SATURATION_REL·‖x‖`.
pub fn saturation_cut(err_clean: &[f64], x_norm: f64) -> usize {
    err_clean
        .iter()
        .rposition(|&e| e > SATURATION_REL * x_norm)
        .unwrap_or(0)
}

/// Measured contraction `w1` of the clean error and growth `w2` of ρ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularityConstants {
    pub w1: f64,
    pub w2: f64,
    pub n_cut: usize,
}

/// `w1 = max_{n<n_cut} ‖x−x_{n+1}‖/‖x−x_n‖`, `w2 = max_{n<n_cut} ρ(n+1)/ρ(n)`.
/// Fails if ρ decreases anywhere below `n_cut`.
pub fn estimate_regularity_constants(
    instance: &ProblemInstance,
    grid: &RegGrid,
    kind: FilterKind,
    rho: &[f64],
    n_cut: usize,
) -> Result<RegularityConstants> {
    check_len(grid.len(), rho.len())?;
    grid.check_level(n_cut)?;
    if n_cut < 1 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 levels below the cut, n_cut = {n_cut}"
        )));
    }
    let err = noise_free_error_curve(instance, grid, kind);
    let mut w1 = f64::NEG_INFINITY;
    let mut w2 = f64::NEG_INFINITY;
    for n in 0..n_cut {
        if err[n] > 0.0 {
            w1 = w1.max(err[n + 1] / err[n]);
        }
        if rho[n + 1] < rho[n] {
            return Err(Error::domain(
                "rho",
                format!("decreases between levels {n} and {}", n + 1),
            ));
        }
        if rho[n] > 0.0 {
            w2 = w2.max(rho[n + 1] / rho[n]);
        }
    }
    if !w1.is_finite() || !w2.is_finite() {
        return Err(Error::InsufficientData("no usable ratios below the cut".into()));
    }
    Ok(RegularityConstants { w1, w2, n_cut })
}
