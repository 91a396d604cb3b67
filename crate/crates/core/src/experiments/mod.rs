//! Monte Carlo experiment driver: configuration, trials, summaries and reports.

pub mod analysis;
pub mod config;
pub mod report;
pub mod summary;
pub mod trial;

pub use config::{ExperimentConfig, GridSpec, NoiseConfig, ProblemSource};
pub use report::{emit_report, load_batch, parse_batch, ReportFormat, ReportInput};
pub use summary::{compare_methods, summarize, MethodSummary, Summary};
pub use trial::{run_monte_carlo, run_monte_carlo_in, Batch, RunRecord, Setting};
pub use analysis::{log_factor_check, oracle_inequality_check, stop_samples, LogFactorReport, OracleCheck};
