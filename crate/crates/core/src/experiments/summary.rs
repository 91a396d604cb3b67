use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::choice::Method;
use crate::error::{Error, Result};

use super::config::ExperimentConfig;
use super::trial::{RunRecord, Setting};

/// `vs_best` above this counts as an outlier.
pub const OUTLIER_VS_BEST: f64 = 10.0;

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Some(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

fn sorted(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub records: usize,
    pub failed: usize,
    pub median_vs_oo: Option<f64>,
    pub p90_vs_oo: Option<f64>,
    pub median_vs_best: Option<f64>,
    pub p90_vs_best: Option<f64>,
    pub mean_solves: f64,
    pub outlier_rate: f64,
    /// Records whose trial had no `n_opt`.
    pub n_opt_absent: usize,
}

/// Per-setting facts that do not depend on the noise draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingInfo {
    pub problem: String,
    pub delta_rel: f64,
    pub delta: f64,
    pub tail_fraction: f64,
    pub tail_warning: bool,
    pub w1: Option<f64>,
    pub w2: Option<f64>,
    pub n_cut: Option<usize>,
    pub assumption_satisfied: Option<bool>,
    pub nu_fit: Option<f64>,
}

impl SettingInfo {
    pub fn from_setting(s: &Setting) -> Self {
        Self {
            problem: s.instance.label().to_string(),
            delta_rel: s.delta_rel,
            delta: s.delta,
            tail_fraction: s.instance.tail_energy_fraction(),
            tail_warning: s.instance.tail_warning(),
            w1: s.regularity.map(|r| r.w1),
            w2: s.regularity.map(|r| r.w2),
            n_cut: s.regularity.map(|r| r.n_cut),
            assumption_satisfied: s.assumption.as_ref().map(|a| a.satisfied),
            nu_fit: s.assumption.as_ref().and_then(|a| a.nu_fit),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub trials: usize,
    pub methods: Vec<MethodSummary>,
    /// Share of trials where fast and Lepskij balancing pick the same level.
    pub agreement_fast_lepskij: Option<f64>,
    pub settings: Vec<SettingInfo>,
    pub seed: u64,
}

pub fn method_summary(records: &[RunRecord], method: Method) -> MethodSummary {
    let all: Vec<&RunRecord> = records.iter().filter(|r| r.method == method).collect();
    let ok: Vec<&RunRecord> = all.iter().copied().filter(|r| r.failure.is_none()).collect();
    let vs_oo = sorted(ok.iter().filter_map(|r| r.vs_oo));
    let vs_best = sorted(ok.iter().map(|r| r.vs_best));
    let n = ok.len().max(1) as f64;
    MethodSummary {
        method,
        records: all.len(),
        failed: all.len() - ok.len(),
        median_vs_oo: quantile(&vs_oo, 0.5),
        p90_vs_oo: quantile(&vs_oo, 0.9),
        median_vs_best: quantile(&vs_best, 0.5),
        p90_vs_best: quantile(&vs_best, 0.9),
        mean_solves: ok.iter().map(|r| r.solves_used as f64).sum::<f64>() / n,
        outlier_rate: ok.iter().filter(|r| r.vs_best > OUTLIER_VS_BEST).count() as f64 / n,
        n_opt_absent: ok.iter().filter(|r| r.n_opt.is_none()).count(),
    }
}

fn methods_in(records: &[RunRecord]) -> Vec<Method> {
    let mut m: Vec<Method> = records.iter().map(|r| r.method).collect();
    m.sort();
    m.dedup();
    m
}

/// Fraction of trials in which fast and Lepskij balancing agree.
pub fn agreement_rate(records: &[RunRecord]) -> Option<f64> {
    let mut by_trial: BTreeMap<u64, (Option<usize>, Option<usize>)> = BTreeMap::new();
    for r in records.iter().filter(|r| r.failure.is_none()) {
        let e = by_trial.entry(r.trial).or_default();
        match r.method {
            Method::Fast => e.0 = Some(r.chosen_n),
            Method::Lepskij => e.1 = Some(r.chosen_n),
            Method::Morozov => {}
        }
    }
    let pairs: Vec<(usize, usize)> = by_trial
        .values()
        .filter_map(|&(f, l)| Some((f?, l?)))
        .collect();
    if pairs.is_empty() {
        return None;
    }
    Some(pairs.iter().filter(|(f, l)| f == l).count() as f64 / pairs.len() as f64)
}

pub fn summarize(records: &[RunRecord], settings: &[Setting], cfg: &ExperimentConfig) -> Result<Summary> {
    let trials = {
        let mut t: Vec<u64> = records.iter().map(|r| r.trial).collect();
        t.dedup();
        t.len()
    };
    Ok(Summary {
        trials,
        methods: methods_in(records)
            .into_iter()
            .map(|m| method_summary(records, m))
            .collect(),
        agreement_fast_lepskij: agreement_rate(records),
        settings: settings.iter().map(SettingInfo::from_setting).collect(),
        seed: cfg.seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: Method,
    pub median_vs_oo: Option<f64>,
    pub median_vs_best: Option<f64>,
    pub outlier_rate: f64,
    pub mean_solves: f64,
}

/// One row per method present in the batch.
pub fn compare_methods(records: &[RunRecord]) -> Result<Vec<ComparisonRow>> {
    let methods = methods_in(records);
    if methods.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "comparison needs at least 2 methods, batch has {}",
            methods.len()
        )));
    }
    Ok(methods
        .into_iter()
        .map(|m| {
            let s = method_summary(records, m);
            ComparisonRow {
                method: m,
                median_vs_oo: s.median_vs_oo,
                median_vs_best: s.median_vs_best,
                outlier_rate: s.outlier_rate,
                mean_solves: s.mean_solves,
            }
        })
        .collect())
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// Tab-separated comparison table with a header line.
pub fn comparison_rows(rows: &[ComparisonRow]) -> String {
    let mut out = String::from("method\tmedian_vs_oo\tmedian_vs_best\toutlier_rate\tmean_solves\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            r.method,
            opt(r.median_vs_oo),
            opt(r.median_vs_best),
            r.outlier_rate,
            r.mean_solves
        );
    }
    out
}
