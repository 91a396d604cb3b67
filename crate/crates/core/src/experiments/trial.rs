use std::path::Path;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::choice::{
    efficiency_ratio, fast_balancing, lepskij_balancing, morozov_discrepancy, oracle_constant_c,
    oracle_parameters, oracle_sum, BalancingConfig, ChoiceOutcome, Method, StopReason,
};
use crate::diagnostics::{check_source_assumption, AssumptionReport};
use crate::error::Result;
use crate::noise::{NoiseModel, NoiseSpec};
use crate::regularization::{
    estimate_regularity_constants, noise_free_error_curve, saturation_cut, FilterKind, LazyPath,
    NoiseBehavior, RegGrid, RegPath, RegularityConstants,
};
use crate::rng::{self, StreamTag};
use crate::spectral::ProblemInstance;

use super::config::ExperimentConfig;
use super::summary::{summarize, Summary};

/// One method's result on one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub trial: u64,
    pub problem: String,
    pub delta_rel: f64,
    /// Absolute noise parameter `δ = δ_rel·‖y_exact‖`.
    pub delta: f64,
    pub replicate: usize,
    pub method: Method,
    pub chosen_n: usize,
    /// `‖x_chosenᵟ − x‖`.
    pub error: f64,
    pub vs_oo: Option<f64>,
    pub vs_best: f64,
    pub solves_used: usize,
    pub stopped: StopReason,
    pub n_o: usize,
    pub n_oo: usize,
    pub n_opt: Option<usize>,
    /// `‖x_{n_opt} − x‖ + ρ(n_opt)`.
    pub oracle_sum: Option<f64>,
    /// Deterministic oracle constant for this setting, when the theory
    /// applies (deterministic noise, Tikhonov, `τ ≥ 1`).
    pub oracle_c: Option<f64>,
    pub outside_theory: bool,
    pub wall_time_us: Option<u64>,
    /// Set when the trial failed; numeric fields are then zero.
    pub failure: Option<String>,
}

/// Everything about one (problem, δ) pair that does not depend on the
/// noise draw.
#[derive(Debug, Clone)]
pub struct Setting {
    pub index: usize,
    pub instance: ProblemInstance,
    pub grid: RegGrid,
    pub filter: FilterKind,
    pub delta_rel: f64,
    pub delta: f64,
    pub noise_model: NoiseModel,
    pub behavior: NoiseBehavior,
    pub rho: Vec<f64>,
    pub err_clean: Vec<f64>,
    pub regularity: Option<RegularityConstants>,
    pub assumption: Option<AssumptionReport>,
}

impl Setting {
    pub fn new(
        index: usize,
        instance: ProblemInstance,
        grid: RegGrid,
        filter: FilterKind,
        delta_rel: f64,
        noise: &super::config::NoiseConfig,
    ) -> Result<Self> {
        let delta = delta_rel * instance.y_exact().norm();
        let noise_model = noise.model(delta, instance.operator().sigma())?;
        let behavior = NoiseSpec {
            model: noise_model.clone(),
            seed: 0,
        }
        .behavior(instance.dim())?;
        let rho = behavior.rho_curve(instance.operator(), &grid, filter)?;
        let err_clean = noise_free_error_curve(&instance, &grid, filter);
        let n_cut = saturation_cut(&err_clean, instance.x_true().norm());
        let regularity = estimate_regularity_constants(&instance, &grid, filter, &rho, n_cut).ok();
        let assumption = check_source_assumption(instance.x_true(), instance.operator()).ok();
        Ok(Self {
            index,
            instance,
            grid,
            filter,
            delta_rel,
            delta,
            noise_model,
            behavior,
            rho,
            err_clean,
            regularity,
            assumption,
        })
    }

    /// `oracle_constant_c` with this setting's measured `w1`, `w2`, when the
    /// deterministic theorem applies.
    pub fn oracle_c(&self, bal: &BalancingConfig) -> Option<f64> {
        let deterministic = matches!(self.noise_model, NoiseModel::Deterministic { .. });
        if !deterministic || self.filter != FilterKind::Tikhonov {
            return None;
        }
        let r = self.regularity?;
        oracle_constant_c(bal.tau, bal.k, r.w1, r.w2).ok()
    }
}

/// Builds every (problem, δ) setting of a config. Relative problem paths
/// resolve against `base`.
pub fn prepare_settings(cfg: &ExperimentConfig, base: Option<&Path>) -> Result<Vec<Setting>> {
    cfg.validate()?;
    let mut settings = Vec::new();
    for src in &cfg.problems {
        let instance = src.load(base)?;
        let grid = cfg.grid.build(&instance)?;
        for &d in &cfg.delta_rel {
            let idx = settings.len();
            settings.push(Setting::new(idx, instance.clone(), grid, cfg.filter, d, &cfg.noise)?);
        }
    }
    Ok(settings)
}

/// Seed of the noise draw for `trial`.
pub fn trial_noise_seed(master: u64, trial: u64) -> u64 {
    rng::derived(master, StreamTag::Noise, trial, 0).gen()
}

/// Runs every configured method on one trial of `setting`.
///
/// All methods see the same noisy data. Fast balancing runs on a lazy path
/// and only solves the levels it inspects; the full path is built for the
/// other rules and for the oracle evaluation.
pub fn run_setting_trial(
    cfg: &ExperimentConfig,
    setting: &Setting,
    trial: u64,
    replicate: usize,
) -> Vec<RunRecord> {
    match try_run(cfg, setting, trial, replicate) {
        Ok(records) => records,
        Err(e) => cfg
            .methods
            .iter()
            .map(|&method| failed_record(setting, trial, replicate, method, e.to_string()))
            .collect(),
    }
}

fn failed_record(setting: &Setting, trial: u64, replicate: usize, method: Method, msg: String) -> RunRecord {
    RunRecord {
        trial,
        problem: setting.instance.label().to_string(),
        delta_rel: setting.delta_rel,
        delta: setting.delta,
        replicate,
        method,
        chosen_n: 0,
        error: 0.0,
        vs_oo: None,
        vs_best: 0.0,
        solves_used: 0,
        stopped: StopReason::GridExhausted,
        n_o: 0,
        n_oo: 0,
        n_opt: None,
        oracle_sum: None,
        oracle_c: None,
        outside_theory: false,
        wall_time_us: None,
        failure: Some(msg),
    }
}

fn try_run(cfg: &ExperimentConfig, setting: &Setting, trial: u64, replicate: usize) -> Result<Vec<RunRecord>> {
    let bal = cfg.balancing.build(setting.grid.n_max())?;
    let spec = NoiseSpec {
        model: setting.noise_model.clone(),
        seed: trial_noise_seed(cfg.seed, trial),
    };
    let xi = spec.realize(setting.instance.operator(), &setting.grid)?.xi;
    let y_noisy = setting.instance.y_exact().add(&xi)?;
    let path = RegPath::build(&setting.instance, &y_noisy, setting.grid, setting.filter, setting.rho.clone())?;
    let oracle = oracle_parameters(&path);
    let oracle_c = setting.oracle_c(&bal);

    let mut records = Vec::with_capacity(cfg.methods.len());
    for &method in &cfg.methods {
        let start = Instant::now();
        let outcome: ChoiceOutcome = match method {
            Method::Fast => {
                let mut lazy = LazyPath::new(
                    setting.instance.operator(),
                    &y_noisy,
                    setting.grid,
                    setting.filter,
                    setting.rho.clone(),
                )?;
                fast_balancing(&mut lazy, &bal)?
            }
            Method::Lepskij => lepskij_balancing(&path, &bal)?,
            Method::Morozov => morozov_discrepancy(
                setting.instance.operator(),
                &y_noisy,
                &path,
                cfg.tau_morozov,
                setting.behavior.norm_level(),
            )?,
        };
        let elapsed = start.elapsed();
        let eff = efficiency_ratio(&path, outcome.chosen_n)?;
        records.push(RunRecord {
            trial,
            problem: setting.instance.label().to_string(),
            delta_rel: setting.delta_rel,
            delta: setting.delta,
            replicate,
            method,
            chosen_n: outcome.chosen_n,
            error: path.err_noisy[outcome.chosen_n],
            vs_oo: eff.vs_oo,
            vs_best: eff.vs_best,
            solves_used: outcome.solves_used,
            stopped: outcome.stopped,
            n_o: oracle.n_o,
            n_oo: oracle.n_oo,
            n_opt: oracle.n_opt,
            oracle_sum: oracle.n_opt.map(|n| oracle_sum(&path, n)),
            oracle_c: if method == Method::Fast { oracle_c } else { None },
            outside_theory: outcome.outside_theory,
            wall_time_us: cfg.record_wall_time.then_some(elapsed.as_micros() as u64),
            failure: None,
        });
    }
    Ok(records)
}

/// Trial ids enumerate `(setting, replicate)` in order.
pub fn trial_id(setting: usize, replicate: usize, replicates: usize) -> u64 {
    (setting * replicates + replicate) as u64
}

/// Runs trial `trial` of the batch described by `cfg`.
pub fn run_trial(cfg: &ExperimentConfig, trial: u64) -> Result<Vec<RunRecord>> {
    let settings = prepare_settings(cfg, None)?;
    let setting = trial as usize / cfg.replicates;
    let replicate = trial as usize % cfg.replicates;
    let s = settings.get(setting).ok_or(crate::Error::Index {
        n: trial as usize,
        n_max: settings.len() * cfg.replicates - 1,
    })?;
    Ok(run_setting_trial(cfg, s, trial, replicate))
}

/// Records of a batch plus its summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub records: Vec<RunRecord>,
    pub summary: Summary,
}

/// Runs every trial of the config in parallel. Records come back sorted by
/// `(trial, method)` so output does not depend on scheduling.
pub fn run_monte_carlo(cfg: &ExperimentConfig) -> Result<Batch> {
    run_monte_carlo_in(cfg, None)
}

pub fn run_monte_carlo_in(cfg: &ExperimentConfig, base: Option<&Path>) -> Result<Batch> {
    let settings = prepare_settings(cfg, base)?;
    let jobs: Vec<(usize, usize)> = (0..settings.len())
        .flat_map(|s| (0..cfg.replicates).map(move |r| (s, r)))
        .collect();
    let mut records: Vec<RunRecord> = jobs
        .par_iter()
        .flat_map_iter(|&(s, r)| run_setting_trial(cfg, &settings[s], trial_id(s, r, cfg.replicates), r))
        .collect();
    records.sort_by_key(|r| (r.trial, r.method));
    let summary = summarize(&records, &settings, cfg)?;
    Ok(Batch { records, summary })
}
