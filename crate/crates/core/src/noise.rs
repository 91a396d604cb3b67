//! Noise models and realizations in the data basis.
//!
//! Three models are supported: deterministic noise of norm at most `δ`,
//! white Gaussian noise with per-mode standard deviation `δ`, and colored
//! Gaussian noise that is still diagonal in the singular basis but has a
//! per-mode standard deviation.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::regularization::{rho_stochastic, FilterKind, NoiseBehavior, RegGrid};
use crate::rng;
use crate::spectral::{SpectralOperator, SpectralVector};

/// Replicate counts below this are flagged as low confidence.
pub const LOW_CONFIDENCE_REPLICATES: usize = 10;

/// How the direction of deterministic noise is picked. The norm is always `δ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum DirectionPolicy {
    /// Uniform direction on the sphere.
    SphereRandom,
    /// All mass on the mode that `Op_{n_ref}⁻¹` amplifies most.
    Aligned { n_ref: usize },
    /// Equal magnitude on every mode.
    Flat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum NoiseModel {
    Deterministic { delta: f64, direction: DirectionPolicy },
    White { delta: f64 },
    Colored { mode_std: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub model: NoiseModel,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        match &self.model {
            NoiseModel::Deterministic { delta, .. } | NoiseModel::White { delta } => check_delta(*delta),
            NoiseModel::Colored { mode_std } => check_mode_std(mode_std),
        }
    }

    pub fn is_stochastic(&self) -> bool {
        !matches!(self.model, NoiseModel::Deterministic { .. })
    }

    /// The ρ model matching this noise on a `dim`-mode operator.
    pub fn behavior(&self, dim: usize) -> Result<NoiseBehavior> {
        self.validate()?;
        Ok(match &self.model {
            NoiseModel::Deterministic { delta, .. } => NoiseBehavior::Deterministic { delta: *delta },
            NoiseModel::White { delta } => NoiseBehavior::Stochastic {
                mode_std: vec![*delta; dim],
            },
            NoiseModel::Colored { mode_std } => {
                check_len(dim, mode_std.len())?;
                NoiseBehavior::Stochastic {
                    mode_std: mode_std.clone(),
                }
            }
        })
    }

    pub fn realize(&self, op: &SpectralOperator, grid: &RegGrid) -> Result<NoiseRealization> {
        let xi = match &self.model {
            NoiseModel::Deterministic { delta, direction } => {
                deterministic_worst_case(op, grid, *delta, *direction, self.seed)?.xi
            }
            NoiseModel::White { delta } => sample_white(op.dim(), *delta, self.seed)?.xi,
            NoiseModel::Colored { mode_std } => {
                check_len(op.dim(), mode_std.len())?;
                sample_colored(mode_std, self.seed)?.xi
            }
        };
        Ok(NoiseRealization { xi, spec: self.clone() })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseRealization {
    pub xi: SpectralVector,
    pub spec: NoiseSpec,
}

fn check_delta(delta: f64) -> Result<()> {
    if delta.is_finite() && delta > 0.0 {
        Ok(())
    } else {
        Err(Error::domain("delta", format!("must be positive, got {delta}")))
    }
}

fn check_mode_std(mode_std: &[f64]) -> Result<()> {
    if let Some(k) = mode_std.iter().position(|s| !(s.is_finite() && *s >= 0.0)) {
        return Err(Error::domain("mode_std", format!("entry {k} is {}", mode_std[k])));
    }
    if mode_std.iter().all(|&s| s == 0.0) {
        return Err(Error::domain("mode_std", "all entries are zero"));
    }
    Ok(())
}

fn standard_normals(dim: usize, seed: u64) -> impl Iterator<Item = f64> {
    let mut r = rng::stream(seed, 0);
    (0..dim).map(move |_| r.sample::<f64, _>(StandardNormal))
}

pub fn sample_white(dim: usize, delta: f64, seed: u64) -> Result<NoiseRealization> {
    check_delta(delta)?;
    Ok(NoiseRealization {
        xi: SpectralVector(standard_normals(dim, seed).map(|z| delta * z).collect()),
        spec: NoiseSpec {
            model: NoiseModel::White { delta },
            seed,
        },
    })
}

/// Draws `ξ_k = std_k·ζ_k` using the same normals as [`sample_white`], so a
/// constant profile reproduces white noise value for value.
pub fn sample_colored(mode_std: &[f64], seed: u64) -> Result<NoiseRealization> {
    check_mode_std(mode_std)?;
    Ok(NoiseRealization {
        xi: SpectralVector(
            standard_normals(mode_std.len(), seed)
                .zip(mode_std)
                .map(|(z, s)| s * z)
                .collect(),
        ),
        spec: NoiseSpec {
            model: NoiseModel::Colored {
                mode_std: mode_std.to_vec(),
            },
            seed,
        },
    })
}

/// Deterministic noise with `‖ξ‖ = δ`.
pub fn deterministic_worst_case(
    op: &SpectralOperator,
    grid: &RegGrid,
    delta: f64,
    policy: DirectionPolicy,
    seed: u64,
) -> Result<NoiseRealization> {
    check_delta(delta)?;
    let dim = op.dim();
    let xi = match policy {
        DirectionPolicy::SphereRandom => {
            let z: Vec<f64> = standard_normals(dim, seed).collect();
            let nz = z.iter().map(|a| a * a).sum::<f64>().sqrt();
            z.into_iter().map(|a| delta * a / nz).collect()
        }
        DirectionPolicy::Aligned { n_ref } => {
            let alpha = grid.alpha(n_ref)?;
            let (k_star, _) = op
                .sigma()
                .iter()
                .map(|&s| FilterKind::Tikhonov.factor(s, alpha))
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (k, g)| if g > best.1 { (k, g) } else { best });
            let mut xi = vec![0.0; dim];
            xi[k_star] = delta;
            xi
        }
        DirectionPolicy::Flat => vec![delta / (dim as f64).sqrt(); dim],
    };
    Ok(NoiseRealization {
        xi: SpectralVector(xi),
        spec: NoiseSpec {
            model: NoiseModel::Deterministic {
                delta,
                direction: policy,
            },
            seed,
        },
    })
}

/// ρ estimated from replicated measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct RhoEstimate {
    pub rho: Vec<f64>,
    pub mode_std: Vec<f64>,
    pub replicates: usize,
    pub low_confidence: bool,
}

/// Per-mode sample standard deviation (divisor `M−1`) across replicates,
/// propagated through the filter at every level.
pub fn estimate_rho_from_replicates(
    replicates: &[SpectralVector],
    op: &SpectralOperator,
    grid: &RegGrid,
    kind: FilterKind,
) -> Result<RhoEstimate> {
    let m = replicates.len();
    if m < 2 {
        return Err(Error::InsufficientData(format!("need at least 2 replicates, got {m}")));
    }
    let dim = op.dim();
    for r in replicates {
        check_len(dim, r.len())?;
    }
    let mode_std: Vec<f64> = (0..dim)
        .map(|k| {
            let mean = replicates.iter().map(|r| r.0[k]).sum::<f64>() / m as f64;
            let ss: f64 = replicates.iter().map(|r| (r.0[k] - mean).powi(2)).sum();
            (ss / (m - 1) as f64).sqrt()
        })
        .collect();
    let rho = (0..grid.len())
        .map(|n| rho_stochastic(op, grid, kind, n, &mode_std))
        .collect::<Result<Vec<_>>>()?;
    Ok(RhoEstimate {
        rho,
        mode_std,
        replicates: m,
        low_confidence: m < LOW_CONFIDENCE_REPLICATES,
    })
}
