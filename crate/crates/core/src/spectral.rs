//! Operators, vectors and problem instances in singular-value coordinates.
//!
//! An operator is stored only through its nonincreasing singular values
//! `σ_1 ≥ … ≥ σ_K > 0`. Solutions live in the right singular basis and data
//! in the left one, so applying the operator is a coordinate-wise product.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::rng::{self, StreamTag};

/// Default truncation dimension.
pub const DEFAULT_K: usize = 400;

/// Tail-energy fraction above which a truncated solution is flagged.
pub const TAIL_WARN_FRACTION: f64 = 1e-6;

/// Compact operator given by its singular values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralOperator {
    sigma: Vec<f64>,
}

impl SpectralOperator {
    /// Validates `sigma`: at least two entries, finite, strictly positive,
    /// nonincreasing.
    pub fn new(sigma: Vec<f64>) -> Result<Self> {
        validate_sigma(&sigma).map_err(|reason| Error::domain("sigma", reason))?;
        Ok(Self { sigma })
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    /// Truncation dimension `K`.
    pub fn dim(&self) -> usize {
        self.sigma.len()
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma[0]
    }
}

pub(crate) fn validate_sigma(sigma: &[f64]) -> std::result::Result<(), String> {
    if sigma.len() < 2 {
        return Err(format!("need at least 2 singular values, got {}", sigma.len()));
    }
    for (k, &s) in sigma.iter().enumerate() {
        if !s.is_finite() || s <= 0.0 {
            return Err(format!("entry {k} is {s}, must be finite and positive"));
        }
    }
    if let Some(k) = sigma.windows(2).position(|w| w[1] > w[0]) {
        return Err(format!("not nonincreasing at index {}", k + 1));
    }
    Ok(())
}

/// Coefficients of a vector in one of the singular bases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpectralVector(pub Vec<f64>);

impl SpectralVector {
    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    /// `self + other`, coefficient-wise.
    pub fn add(&self, other: &SpectralVector) -> Result<SpectralVector> {
        check_len(self.len(), other.len())?;
        Ok(SpectralVector(
            self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect(),
        ))
    }

    pub fn scaled(&self, c: f64) -> SpectralVector {
        SpectralVector(self.0.iter().map(|a| c * a).collect())
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Ground-truth problem: operator, true solution and exact data.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    operator: SpectralOperator,
    x_true: SpectralVector,
    y_exact: SpectralVector,
    label: String,
}

impl ProblemInstance {
    /// Builds the instance with `y_exact = A x_true`.
    pub fn new(operator: SpectralOperator, x_true: SpectralVector, label: impl Into<String>) -> Result<Self> {
        let y_exact = apply_forward(&operator, &x_true)?;
        Ok(Self {
            operator,
            x_true,
            y_exact,
            label: label.into(),
        })
    }

    /// Assembles an instance from stored parts, checking `y_exact = σ·x_true`
    /// exactly.
    pub fn from_parts(
        operator: SpectralOperator,
        x_true: SpectralVector,
        y_exact: SpectralVector,
        label: impl Into<String>,
    ) -> Result<Self> {
        check_len(operator.dim(), x_true.len())?;
        check_len(operator.dim(), y_exact.len())?;
        let expected = apply_forward(&operator, &x_true)?;
        if let Some(k) = (0..operator.dim()).find(|&k| expected.0[k] != y_exact.0[k]) {
            return Err(Error::schema(
                "y_exact",
                format!("entry {k} is not sigma*x_true"),
            ));
        }
        Ok(Self {
            operator,
            x_true,
            y_exact,
            label: label.into(),
        })
    }

    pub fn operator(&self) -> &SpectralOperator {
        &self.operator
    }

    pub fn x_true(&self) -> &SpectralVector {
        &self.x_true
    }

    pub fn y_exact(&self) -> &SpectralVector {
        &self.y_exact
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.operator.dim()
    }

    /// Fraction of `‖x‖²` carried by the last 10% of modes.
    pub fn tail_energy_fraction(&self) -> f64 {
        let x = self.x_true.coeffs();
        let total: f64 = x.iter().map(|a| a * a).sum();
        if total == 0.0 {
            return 0.0;
        }
        let start = self.dim() - (self.dim() / 10).max(1);
        x[start..].iter().map(|a| a * a).sum::<f64>() / total
    }

    /// True when the truncation tail is above [`TAIL_WARN_FRACTION`].
    pub fn tail_warning(&self) -> bool {
        self.tail_energy_fraction() > TAIL_WARN_FRACTION
    }

    /// Same instance with solution and data multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.operator.clone(), self.x_true.scaled(c), self.label.clone())
    }
}

/// Singular-value decay families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Decay {
    /// `σ_k = scale·r^(k−1)`, `r ∈ (0,1)`.
    Geometric { base: f64 },
    /// `σ_k = scale·k^(−p)`, `p > 0`.
    Polynomial { exponent: f64 },
}

/// Builds a synthetic operator with the requested decay.
pub fn make_operator(decay: Decay, dim: usize, scale: f64) -> Result<SpectralOperator> {
    if dim < 2 {
        return Err(Error::domain("K", format!("must be at least 2, got {dim}")));
    }
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::domain("scale", format!("must be positive, got {scale}")));
    }
    let sigma: Vec<f64> = match decay {
        Decay::Geometric { base } => {
            if !(base > 0.0 && base < 1.0) {
                return Err(Error::domain("base", format!("must lie in (0,1), got {base}")));
            }
            (0..dim).map(|k| scale * base.powi(k as i32)).collect()
        }
        Decay::Polynomial { exponent } => {
            if !(exponent.is_finite() && exponent > 0.0) {
                return Err(Error::domain("exponent", format!("must be positive, got {exponent}")));
            }
            (1..=dim).map(|k| scale * (k as f64).powf(-exponent)).collect()
        }
    };
    SpectralOperator::new(sigma)
}

/// Smoothness classes for generated solutions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Smoothness {
    /// `x_k = σ_k^(2ν)·(1 + η_k)`, `ν ∈ (0,1)`.
    Power { nu: f64 },
    /// `x_k = σ_k^s`, `s > 2`.
    Supersmooth { s: f64 },
}

/// Half-width of the multiplicative jitter on power-law solutions.
pub const JITTER: f64 = 0.1;

/// Generates a true solution. `seed = None` disables the jitter.
pub fn make_solution(op: &SpectralOperator, smoothness: Smoothness, seed: Option<u64>) -> Result<SpectralVector> {
    match smoothness {
        Smoothness::Power { nu } => {
            if !(nu > 0.0 && nu < 1.0) {
                return Err(Error::domain("nu", format!("must lie in (0,1), got {nu}")));
            }
            let mut rng = seed.map(|s| rng::derived(s, StreamTag::Solution, 0, 0));
            Ok(SpectralVector(
                op.sigma()
                    .iter()
                    .map(|&s| {
                        let eta = rng
                            .as_mut()
                            .map_or(0.0, |r| r.gen_range(-JITTER..=JITTER));
                        s.powf(2.0 * nu) * (1.0 + eta)
                    })
                    .collect(),
            ))
        }
        Smoothness::Supersmooth { s } => {
            if !(s.is_finite() && s > 2.0) {
                return Err(Error::domain("s", format!("must exceed 2, got {s}")));
            }
            Ok(SpectralVector(op.sigma().iter().map(|&sk| sk.powf(s)).collect()))
        }
    }
}

/// `y_k = σ_k·x_k`.
pub fn apply_forward(op: &SpectralOperator, x: &SpectralVector) -> Result<SpectralVector> {
    check_len(op.dim(), x.len())?;
    Ok(SpectralVector(
        op.sigma().iter().zip(x.coeffs()).map(|(s, a)| s * a).collect(),
    ))
}
