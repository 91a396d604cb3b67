use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::choice::{BalancingConfig, Method};
use crate::error::{Error, Result};
use crate::noise::{DirectionPolicy, NoiseModel};
use crate::problem_file;
use crate::regularization::{FilterKind, RegGrid};
use crate::spectral::{make_operator, make_solution, Decay, ProblemInstance, Smoothness, DEFAULT_K};

/// A problem given inline by generator parameters or by a problem file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProblemSource {
    File { file: PathBuf },
    Generated(GeneratedProblem),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedProblem {
    pub decay: Decay,
    pub smoothness: Smoothness,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_scale")]
    pub scale: f64,
    /// Jitter seed; `None` disables jitter.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub label: Option<String>,
}

fn default_dim() -> usize {
    DEFAULT_K
}

fn default_scale() -> f64 {
    1.0
}

impl GeneratedProblem {
    pub fn new(decay: Decay, smoothness: Smoothness) -> Self {
        Self {
            decay,
            smoothness,
            dim: DEFAULT_K,
            scale: 1.0,
            seed: Some(0),
            label: None,
        }
    }

    pub fn default_label(&self) -> String {
        let d = match self.decay {
            Decay::Geometric { base } => format!("geom{base}"),
            Decay::Polynomial { exponent } => format!("poly{exponent}"),
        };
        let s = match self.smoothness {
            Smoothness::Power { nu } => format!("nu{nu}"),
            Smoothness::Supersmooth { s } => format!("ss{s}"),
        };
        format!("{d}-{s}")
    }

    pub fn build(&self) -> Result<ProblemInstance> {
        let op = make_operator(self.decay, self.dim, self.scale)?;
        let x = make_solution(&op, self.smoothness, self.seed)?;
        let label = self.label.clone().unwrap_or_else(|| self.default_label());
        ProblemInstance::new(op, x, label)
    }
}

impl ProblemSource {
    /// Relative file paths resolve against `base`.
    pub fn load(&self, base: Option<&Path>) -> Result<ProblemInstance> {
        match self {
            ProblemSource::File { file } => {
                let path = match base {
                    Some(b) if file.is_relative() => b.join(file),
                    _ => file.clone(),
                };
                problem_file::load(&path)
            }
            ProblemSource::Generated(g) => g.build(),
        }
    }
}

/// Grid settings; `q0 = None` means `σ₁²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    #[serde(default)]
    pub q0: Option<f64>,
    pub q: f64,
    pub n_max: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            q0: None,
            q: 0.5,
            n_max: 60,
        }
    }
}

impl GridSpec {
    pub fn build(&self, instance: &ProblemInstance) -> Result<RegGrid> {
        let q0 = self.q0.unwrap_or_else(|| RegGrid::default_for(instance.operator()).q0());
        RegGrid::new(q0, self.q, self.n_max)
    }
}

/// Per-mode profile for colored noise; scaled so the total energy equals
/// that of white noise with the same `δ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColoredProfile {
    /// `std_k ∝ σ_k^exponent`.
    SigmaPower { exponent: f64 },
    /// `std_k ∝ weights_k`.
    Explicit { weights: Vec<f64> },
}

/// Noise model with the level left open; `δ` comes from the config's
/// relative levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum NoiseConfig {
    Deterministic {
        #[serde(default = "default_direction")]
        direction: DirectionPolicy,
    },
    White,
    Colored { profile: ColoredProfile },
}

fn default_direction() -> DirectionPolicy {
    DirectionPolicy::SphereRandom
}

impl NoiseConfig {
    /// Concrete model for absolute level `delta` on `sigma`.
    pub fn model(&self, delta: f64, sigma: &[f64]) -> Result<NoiseModel> {
        Ok(match self {
            NoiseConfig::Deterministic { direction } => NoiseModel::Deterministic {
                delta,
                direction: *direction,
            },
            NoiseConfig::White => NoiseModel::White { delta },
            NoiseConfig::Colored { profile } => {
                let raw: Vec<f64> = match profile {
                    ColoredProfile::SigmaPower { exponent } => sigma.iter().map(|s| s.powf(*exponent)).collect(),
                    ColoredProfile::Explicit { weights } => {
                        if weights.len() != sigma.len() {
                            return Err(Error::Shape {
                                expected: sigma.len(),
                                actual: weights.len(),
                            });
                        }
                        weights.clone()
                    }
                };
                let energy: f64 = raw.iter().map(|w| w * w).sum();
                if !(energy > 0.0 && energy.is_finite()) {
                    return Err(Error::domain("profile", "colored profile has no finite energy"));
                }
                let scale = delta * (sigma.len() as f64 / energy).sqrt();
                NoiseModel::Colored {
                    mode_std: raw.iter().map(|w| w * scale).collect(),
                }
            }
        })
    }
}

/// Full description of a Monte Carlo batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problems: Vec<ProblemSource>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub filter: FilterKind,
    pub noise: NoiseConfig,
    /// Noise levels relative to `‖y_exact‖`.
    pub delta_rel: Vec<f64>,
    pub methods: Vec<Method>,
    #[serde(default)]
    pub balancing: BalancingSpec,
    #[serde(default = "default_tau_m")]
    pub tau_morozov: f64,
    pub replicates: usize,
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Wall-clock timings make output nondeterministic; off by default.
    #[serde(default)]
    pub record_wall_time: bool,
}

/// Slightly above 1: with Gaussian noise the residual settles at the noise
/// norm itself, so `τ_m = 1` is hit only by chance.
pub const DEFAULT_TAU_MOROZOV: f64 = 1.1;

fn default_tau_m() -> f64 {
    DEFAULT_TAU_MOROZOV
}

/// Balancing settings with the Lepskij cap defaulting to `n_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalancingSpec {
    pub k: usize,
    pub tau: f64,
    #[serde(default)]
    pub n_cap: Option<usize>,
}

impl Default for BalancingSpec {
    fn default() -> Self {
        Self {
            k: 1,
            tau: 1.0,
            n_cap: None,
        }
    }
}

impl BalancingSpec {
    pub fn build(&self, n_max: usize) -> Result<BalancingConfig> {
        BalancingConfig::new(self.k, self.tau, self.n_cap.unwrap_or(n_max))
    }
}

/// Default problem set: three spectra times three solution classes.
pub fn default_problems() -> Vec<GeneratedProblem> {
    let decays = [
        Decay::Geometric { base: 0.7 },
        Decay::Polynomial { exponent: 1.0 },
        Decay::Polynomial { exponent: 2.0 },
    ];
    let smooth = [
        Smoothness::Power { nu: 0.25 },
        Smoothness::Power { nu: 0.4 },
        Smoothness::Supersmooth { s: 4.0 },
    ];
    decays
        .iter()
        .flat_map(|&d| smooth.iter().map(move |&s| GeneratedProblem::new(d, s)))
        .collect()
}

/// The single reference instance used by the probes.
pub fn default_instance() -> GeneratedProblem {
    GeneratedProblem::new(Decay::Geometric { base: 0.7 }, Smoothness::Power { nu: 0.25 })
}

impl ExperimentConfig {
    /// Default suite with white noise, all three methods, 200 replicates.
    pub fn default_suite() -> Self {
        Self {
            problems: default_problems().into_iter().map(ProblemSource::Generated).collect(),
            grid: GridSpec::default(),
            filter: FilterKind::Tikhonov,
            noise: NoiseConfig::White,
            delta_rel: vec![1e-1, 1e-2, 1e-3],
            methods: vec![Method::Fast, Method::Lepskij, Method::Morozov],
            balancing: BalancingSpec::default(),
            tau_morozov: DEFAULT_TAU_MOROZOV,
            replicates: 200,
            seed: 20_100_101,
            output: None,
            record_wall_time: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.problems.is_empty() {
            return Err(Error::domain("problems", "empty"));
        }
        if self.replicates < 1 {
            return Err(Error::domain("replicates", "must be at least 1"));
        }
        if self.delta_rel.is_empty() || self.delta_rel.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::domain("delta_rel", "must be a nonempty list of positive values"));
        }
        if self.methods.is_empty() {
            return Err(Error::domain("methods", "empty"));
        }
        if self.tau_morozov < 1.0 {
            return Err(Error::domain("tau_morozov", "must be at least 1"));
        }
        self.balancing.build(self.grid.n_max)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config encodes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_suite_is_valid_and_round_trips() {
        let cfg = ExperimentConfig::default_suite();
        cfg.validate().unwrap();
        assert_eq!(cfg.problems.len(), 9);
        let back: ExperimentConfig = serde_json::from_str(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn minimal_config_parses_with_defaults() {
        let text = r#"{
            "problems": [{"decay": {"kind": "geometric", "base": 0.7},
                          "smoothness": {"kind": "power", "nu": 0.25}}],
            "noise": {"model": "white"},
            "delta_rel": [0.01],
            "methods": ["fast", "lepskij"],
            "replicates": 3,
            "seed": 5
        }"#;
        let cfg: ExperimentConfig = serde_json::from_str(text).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.grid, GridSpec::default());
        assert_eq!(cfg.balancing, BalancingSpec::default());
        match &cfg.problems[0] {
            ProblemSource::Generated(g) => assert_eq!(g.dim, DEFAULT_K),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = ExperimentConfig::default_suite();
        cfg.replicates = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default_suite();
        cfg.delta_rel = vec![-1.0];
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default_suite();
        cfg.methods.clear();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn colored_profile_has_white_energy() {
        let sigma: Vec<f64> = (0..50).map(|k| 0.8f64.powi(k)).collect();
        let cfg = NoiseConfig::Colored {
            profile: ColoredProfile::SigmaPower { exponent: -0.25 },
        };
        let NoiseModel::Colored { mode_std } = cfg.model(0.3, &sigma).unwrap() else {
            panic!("expected colored")
        };
        let energy: f64 = mode_std.iter().map(|s| s * s).sum();
        assert!((energy - 50.0 * 0.09).abs() < 1e-12);
        assert!(mode_std.windows(2).all(|w| w[1] >= w[0]));
    }
}
