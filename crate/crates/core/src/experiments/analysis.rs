//! Batch-level checks built on top of run records.

use serde::{Deserialize, Serialize};

use crate::choice::{n_opt_from_curves, Method};
use crate::diagnostics::MC_SIGMAS;
use crate::error::{Error, Result};

use super::config::{BalancingSpec, ExperimentConfig};
use super::trial::{prepare_settings, run_monte_carlo, RunRecord};

/// `(n_*, n_opt)` for every successful fast-balancing record.
pub fn stop_samples(records: &[RunRecord]) -> Vec<(usize, Option<usize>)> {
    records
        .iter()
        .filter(|r| r.method == Method::Fast && r.failure.is_none())
        .map(|r| (r.chosen_n, r.n_opt))
        .collect()
}

/// Outcome of comparing fast-balancing errors with the deterministic
/// oracle bound `C·(‖x_{n_opt} − x‖ + ρ(n_opt))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub checked: usize,
    /// Trials skipped because `n_opt` or the constant is absent.
    pub skipped: usize,
    pub violations: Vec<u64>,
    /// Largest observed `error / (C·oracle_sum)`.
    pub worst_ratio: f64,
}

/// Exact comparison, no tolerance.
pub fn oracle_inequality_check(records: &[RunRecord]) -> OracleCheck {
    let mut out = OracleCheck {
        checked: 0,
        skipped: 0,
        violations: Vec::new(),
        worst_ratio: 0.0,
    };
    for r in records.iter().filter(|r| r.method == Method::Fast && r.failure.is_none()) {
        let (Some(c), Some(sum)) = (r.oracle_c, r.oracle_sum) else {
            out.skipped += 1;
            continue;
        };
        out.checked += 1;
        let bound = c * sum;
        out.worst_ratio = out.worst_ratio.max(r.error / bound);
        if r.error > bound {
            out.violations.push(r.trial);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogFactorRow {
    pub delta_rel: f64,
    /// `τ = ln(1/δ_rel)`.
    pub tau: f64,
    pub mean_sq_error: f64,
    /// `‖x_{n_opt} − x‖² + ln(1/δ_rel)·ρ(n_opt)²`.
    pub reference: f64,
    pub ratio: f64,
    pub std_err: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogFactorReport {
    pub rows: Vec<LogFactorRow>,
    /// Two consecutive significant increases somewhere along the δ list.
    pub monotone_growth: bool,
}

/// Runs fast balancing with `τ = ln(1/δ_rel)` at every δ of `deltas` and
/// reports the mean squared error relative to the log-inflated oracle sum.
///
/// `base` must hold exactly one problem; its noise, grid and `k` are used.
pub fn log_factor_check(base: &ExperimentConfig, deltas: &[f64]) -> Result<LogFactorReport> {
    if base.problems.len() != 1 {
        return Err(Error::domain("problems", "log-factor check takes a single problem"));
    }
    if deltas.len() < 3 {
        return Err(Error::InsufficientData("need at least 3 noise levels".into()));
    }
    let mut rows = Vec::with_capacity(deltas.len());
    for &d in deltas {
        if !(d > 0.0 && d < 1.0) {
            return Err(Error::domain("delta_rel", "must lie in (0, 1)"));
        }
        let tau = (1.0 / d).ln();
        let mut cfg = base.clone();
        cfg.delta_rel = vec![d];
        cfg.methods = vec![Method::Fast];
        cfg.balancing = BalancingSpec { tau, ..base.balancing };
        let settings = prepare_settings(&cfg, None)?;
        let s = &settings[0];
        let n_opt = n_opt_from_curves(&s.err_clean, &s.rho)
            .ok_or_else(|| Error::InsufficientData(format!("n_opt absent at delta_rel {d}")))?;
        let reference = s.err_clean[n_opt].powi(2) + tau * s.rho[n_opt].powi(2);

        let batch = run_monte_carlo(&cfg)?;
        let sq: Vec<f64> = batch
            .records
            .iter()
            .filter(|r| r.failure.is_none())
            .map(|r| r.error * r.error)
            .collect();
        if sq.len() < 2 {
            return Err(Error::InsufficientData("fewer than 2 successful trials".into()));
        }
        let m = sq.len() as f64;
        let mean = sq.iter().sum::<f64>() / m;
        let var = sq.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
        rows.push(LogFactorRow {
            delta_rel: d,
            tau,
            mean_sq_error: mean,
            reference,
            ratio: mean / reference,
            std_err: (var / m).sqrt() / reference,
            trials: sq.len(),
        });
    }
    let up = |a: &LogFactorRow, b: &LogFactorRow| {
        b.ratio - a.ratio > MC_SIGMAS * (a.std_err.powi(2) + b.std_err.powi(2)).sqrt()
    };
    let monotone_growth = rows.windows(3).any(|w| up(&w[0], &w[1]) && up(&w[1], &w[2]));
    Ok(LogFactorReport { rows, monotone_growth })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::choice::StopReason;
    use crate::experiments::config::{default_instance, ProblemSource};

    fn rec(method: Method, error: f64, c: Option<f64>, sum: Option<f64>) -> RunRecord {
        RunRecord {
            trial: 3,
            problem: "p".into(),
            delta_rel: 0.1,
            delta: 0.1,
            replicate: 0,
            method,
            chosen_n: 4,
            error,
            vs_oo: None,
            vs_best: 1.0,
            solves_used: 6,
            stopped: StopReason::ThresholdMet,
            n_o: 4,
            n_oo: 4,
            n_opt: Some(5),
            oracle_sum: sum,
            oracle_c: c,
            outside_theory: false,
            wall_time_us: None,
            failure: None,
        }
    }

    #[test]
    fn oracle_check_is_exact() {
        let recs = vec![
            rec(Method::Fast, 2.0, Some(2.0), Some(1.0)),
            rec(Method::Fast, 2.0 + 1e-15, Some(2.0), Some(1.0)),
            rec(Method::Fast, 1.0, None, Some(1.0)),
            rec(Method::Lepskij, 9.0, Some(2.0), Some(1.0)),
        ];
        let c = oracle_inequality_check(&recs);
        assert_eq!(c.checked, 2);
        assert_eq!(c.skipped, 1);
        assert_eq!(c.violations, vec![3]);
    }

    #[test]
    fn stop_samples_use_fast_records_only() {
        let recs = vec![rec(Method::Fast, 1.0, None, None), rec(Method::Morozov, 1.0, None, None)];
        assert_eq!(stop_samples(&recs), vec![(4, Some(5))]);
    }

    #[test]
    fn log_factor_rows_are_finite() {
        let mut cfg = ExperimentConfig::default_suite();
        cfg.problems = vec![ProblemSource::Generated(default_instance())];
        cfg.replicates = 8;
        let rep = log_factor_check(&cfg, &[1e-2, 1e-3, 1e-4]).unwrap();
        assert_eq!(rep.rows.len(), 3);
        assert!(rep.rows.iter().all(|r| r.ratio.is_finite() && r.ratio > 0.0));
    }

    #[test]
    fn log_factor_needs_three_levels() {
        let mut cfg = ExperimentConfig::default_suite();
        cfg.problems = vec![ProblemSource::Generated(default_instance())];
        assert!(log_factor_check(&cfg, &[1e-2, 1e-3]).is_err());
    }
}
