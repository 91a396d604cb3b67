//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage or runtime error, 2 a probe assertion failed.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use fastbal::choice::Method;
use fastbal::diagnostics::{
    check_source_assumption, decomposition_probe, moment_ratio_probe, standard_weight_sets,
    stop_distribution_probe, tail_bound_probe, DECOMPOSITION_SAMPLES, TAIL_SAMPLES, TAIL_Z_GRID,
};
use fastbal::experiments::config::{default_instance, GeneratedProblem, ProblemSource};
use fastbal::experiments::report::{emit_report, load_batch, ReportFormat, ReportInput};
use fastbal::experiments::summary::{compare_methods, comparison_rows};
use fastbal::experiments::trial::{prepare_settings, run_monte_carlo_in, Setting};
use fastbal::experiments::{stop_samples, ExperimentConfig};
use fastbal::noise::NoiseSpec;
use fastbal::problem_file;
use fastbal::spectral::{Decay, Smoothness, DEFAULT_K};
use fastbal::{Error, Result};

#[derive(Parser)]
#[command(name = "fastbal", version, about = "Balancing-principle parameter choice experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a generated problem to a file.
    GenProblem(GenProblemArgs),
    /// Run a Monte Carlo batch from a config file.
    Run(RunArgs),
    /// Run a diagnostic probe.
    Probe {
        #[command(subcommand)]
        probe: Probe,
    },
    /// Per-method comparison table of a batch file.
    Compare(CompareArgs),
    /// Convert a batch file between formats.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenProblemArgs {
    /// `geometric:BASE` or `polynomial:EXPONENT`.
    #[arg(long, value_parser = parse_decay, default_value = "geometric:0.7")]
    decay: Decay,
    /// `power:NU` or `supersmooth:S`.
    #[arg(long, value_parser = parse_smoothness, default_value = "power:0.25")]
    smoothness: Smoothness,
    #[arg(long, default_value_t = DEFAULT_K)]
    dim: usize,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Jitter seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    no_jitter: bool,
    #[arg(long)]
    label: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Overrides {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    /// Comma-separated list of `fast`, `lepskij`, `morozov`.
    #[arg(long, value_delimiter = ',')]
    method: Vec<Method>,
}

impl Overrides {
    /// Loads the config (default suite when absent) and applies flags.
    /// Returns the directory relative problem paths resolve against.
    fn resolve(&self) -> Result<(ExperimentConfig, Option<PathBuf>)> {
        let (mut cfg, base) = match &self.config {
            Some(p) => (ExperimentConfig::load(p)?, p.parent().map(Path::to_path_buf)),
            None => (ExperimentConfig::default_suite(), None),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = self.tau {
            cfg.balancing.tau = t;
        }
        if let Some(k) = self.k {
            cfg.balancing.k = k;
        }
        if !self.method.is_empty() {
            cfg.methods = self.method.clone();
        }
        cfg.validate()?;
        Ok((cfg, base))
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Overrides,
    /// Output directory; defaults to the config's `output` or `.`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Format of the records file.
    #[arg(long, value_enum, default_value = "rows")]
    format: ReportFormat,
}

#[derive(Args)]
struct ProbeArgs {
    #[command(flatten)]
    common: Overrides,
    /// Write the probe report document here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Subcommand)]
enum Probe {
    /// Weighted chi-square tail bound.
    Tail(ProbeArgs),
    /// Source assumption of every configured problem.
    Assumption(ProbeArgs),
    /// Fourth-moment ratio at one level.
    Moments {
        #[command(flatten)]
        args: ProbeArgs,
        /// Grid level; defaults to the middle of the grid.
        #[arg(long)]
        level: Option<usize>,
    },
    /// Distribution of fast-balancing stops around `n_opt`.
    Stops(ProbeArgs),
    /// Bias-variance decomposition at every level.
    Decomposition(ProbeArgs),
}

#[derive(Args)]
struct CompareArgs {
    /// Batch file in either format.
    #[arg(long)]
    batch: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Batch file in either format.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    format: ReportFormat,
    #[arg(long)]
    out: PathBuf,
}

fn split_param(s: &str) -> std::result::Result<(&str, f64), String> {
    let (kind, v) = s.split_once(':').ok_or_else(|| format!("expected KIND:VALUE, got `{s}`"))?;
    let v: f64 = v.parse().map_err(|_| format!("bad number `{v}`"))?;
    Ok((kind, v))
}

fn parse_decay(s: &str) -> std::result::Result<Decay, String> {
    match split_param(s)? {
        ("geometric", base) => Ok(Decay::Geometric { base }),
        ("polynomial", exponent) => Ok(Decay::Polynomial { exponent }),
        (k, _) => Err(format!("unknown decay `{k}`")),
    }
}

fn parse_smoothness(s: &str) -> std::result::Result<Smoothness, String> {
    match split_param(s)? {
        ("power", nu) => Ok(Smoothness::Power { nu }),
        ("supersmooth", s) => Ok(Smoothness::Supersmooth { s }),
        (k, _) => Err(format!("unknown smoothness `{k}`")),
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Prints or stores a probe report; returns whether the probe passed.
fn finish_probe<T: Serialize>(name: &str, report: &T, out: Option<&Path>, pass: bool) -> Result<bool> {
    let value = serde_json::to_value(report).map_err(|e| Error::Parse(e.to_string()))?;
    match out {
        Some(p) => emit_report(ReportInput::Probe(name, &value), ReportFormat::Document, p)?,
        None => println!("{}", serde_json::to_string_pretty(&value).expect("encodes")),
    }
    eprintln!("probe {name}: {}", if pass { "pass" } else { "FAIL" });
    Ok(pass)
}

/// First setting of the config, used by single-instance probes. Without a
/// config this is the reference instance with white noise at `δ_rel = 10⁻²`.
fn probe_setting(args: &ProbeArgs) -> Result<(ExperimentConfig, Setting)> {
    let (mut cfg, base) = args.common.resolve()?;
    if args.common.config.is_none() {
        cfg.problems = vec![ProblemSource::Generated(default_instance())];
        cfg.delta_rel = vec![1e-2];
    }
    let mut settings = prepare_settings(&cfg, base.as_deref())?;
    Ok((cfg, settings.swap_remove(0)))
}

fn gen_problem(a: &GenProblemArgs) -> Result<()> {
    let mut g = GeneratedProblem::new(a.decay, a.smoothness);
    g.dim = a.dim;
    g.scale = a.scale;
    g.seed = if a.no_jitter { None } else { Some(a.seed.unwrap_or(0)) };
    g.label = a.label.clone();
    problem_file::save(&g.build()?, &a.out)
}

fn run(a: &RunArgs) -> Result<()> {
    let (cfg, base) = a.common.resolve()?;
    let out = a.out.clone().or_else(|| cfg.output.clone()).unwrap_or_else(|| ".".into());
    fs::create_dir_all(&out).map_err(|source| Error::Io {
        path: out.clone(),
        source,
    })?;
    let batch = run_monte_carlo_in(&cfg, base.as_deref())?;
    let records = match a.format {
        ReportFormat::Rows => "records.tsv",
        ReportFormat::Document => "records.json",
    };
    emit_report(ReportInput::Batch(&batch.records), a.format, &out.join(records))?;
    emit_report(ReportInput::Summary(&batch.summary), ReportFormat::Document, &out.join("summary.json"))?;
    eprintln!("{} records written to {}", batch.records.len(), out.display());
    Ok(())
}

fn probe(p: &Probe) -> Result<bool> {
    match p {
        Probe::Tail(args) => {
            let (cfg, _) = args.common.resolve()?;
            let samples = args.samples.unwrap_or(TAIL_SAMPLES);
            let mut reports = Vec::new();
            for (i, (name, w)) in standard_weight_sets().into_iter().enumerate() {
                let r = tail_bound_probe(&w, &TAIL_Z_GRID, samples, cfg.seed.wrapping_add(i as u64))?;
                reports.push((name, r));
            }
            let pass = reports.iter().all(|(_, r)| r.violations == 0);
            finish_probe("tail", &reports, args.out.as_deref(), pass)
        }
        Probe::Assumption(args) => {
            let (cfg, base) = args.common.resolve()?;
            let mut reports = Vec::new();
            for src in &cfg.problems {
                let inst = src.load(base.as_deref())?;
                reports.push((inst.label().to_string(), check_source_assumption(inst.x_true(), inst.operator())?));
            }
            let pass = reports.iter().all(|(_, r)| r.satisfied);
            finish_probe("assumption", &reports, args.out.as_deref(), pass)
        }
        Probe::Moments { args, level } => {
            let (cfg, s) = probe_setting(args)?;
            let n = level.unwrap_or(s.grid.n_max() / 2);
            let noise = NoiseSpec {
                model: s.noise_model.clone(),
                seed: cfg.seed,
            };
            let samples = args.samples.unwrap_or(DECOMPOSITION_SAMPLES);
            let r = moment_ratio_probe(&s.instance, &s.grid, s.filter, &noise, n, samples, cfg.seed)?;
            finish_probe("moments", &r, args.out.as_deref(), r.pass)
        }
        Probe::Stops(args) => {
            let (cfg, base) = args.common.resolve()?;
            let mut cfg = cfg;
            if !cfg.methods.contains(&Method::Fast) {
                cfg.methods.push(Method::Fast);
            }
            let batch = run_monte_carlo_in(&cfg, base.as_deref())?;
            let d = stop_distribution_probe(&stop_samples(&batch.records), cfg.balancing.tau)?;
            let pass = d.late_decay && d.late_base.is_none_or(|b| b < 1.0);
            finish_probe("stops", &d, args.out.as_deref(), pass)
        }
        Probe::Decomposition(args) => {
            let (cfg, s) = probe_setting(args)?;
            let noise = NoiseSpec {
                model: s.noise_model.clone(),
                seed: cfg.seed,
            };
            let samples = args.samples.unwrap_or(DECOMPOSITION_SAMPLES);
            let rows = decomposition_probe(&s.instance, &s.grid, s.filter, &noise, samples, cfg.seed)?;
            let pass = rows.iter().all(|r| r.pass);
            finish_probe("decomposition", &rows, args.out.as_deref(), pass)
        }
    }
}

fn compare(a: &CompareArgs) -> Result<()> {
    let table = comparison_rows(&compare_methods(&load_batch(&a.batch)?)?);
    match &a.out {
        Some(p) => write_file(p, &table),
        None => {
            print!("{table}");
            Ok(())
        }
    }
}

fn report(a: &ReportArgs) -> Result<()> {
    let records = load_batch(&a.input)?;
    emit_report(ReportInput::Batch(&records), a.format, &a.out)
}

fn dispatch(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::GenProblem(a) => gen_problem(a).map(|_| true),
        Command::Run(a) => run(a).map(|_| true),
        Command::Probe { probe: p } => probe(p),
        Command::Compare(a) => compare(a).map(|_| true),
        Command::Report(a) => report(a).map(|_| true),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
