//! Report files.
//!
//! `rows` is a tab-separated table with a fixed header, one record per line;
//! absent optional values are empty cells and floats use shortest
//! round-trip formatting. `document` is pretty-printed JSON mirroring the
//! record field names. Both parse back to identical records.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::choice::{Method, StopReason};
use crate::error::{Error, Result};

use super::summary::{MethodSummary, Summary};
use super::trial::RunRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Rows,
    Document,
}

/// Column order of the `rows` format for run records.
pub const RECORD_COLUMNS: [&str; 20] = [
    "trial",
    "problem",
    "delta_rel",
    "delta",
    "replicate",
    "method",
    "chosen_n",
    "error",
    "vs_oo",
    "vs_best",
    "solves_used",
    "stopped",
    "n_o",
    "n_oo",
    "n_opt",
    "oracle_sum",
    "oracle_c",
    "outside_theory",
    "wall_time_us",
    "failure",
];

/// What to write.
#[derive(Debug, Clone, Copy)]
pub enum ReportInput<'a> {
    Batch(&'a [RunRecord]),
    Summary(&'a Summary),
    /// Named probe report, document format only.
    Probe(&'a str, &'a Value),
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('\t', "\\t").replace('\n', "\\n")
}

fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some('t') => out.push('\t'),
                Some('n') => out.push('\n'),
                Some(other) => out.push(other),
                None => out.push('\\'),
            }
        } else {
            out.push(c);
        }
    }
    out
}

fn cell<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(String::new, ToString::to_string)
}

fn stopped_name(s: StopReason) -> &'static str {
    match s {
        StopReason::ThresholdMet => "threshold_met",
        StopReason::GridExhausted => "grid_exhausted",
    }
}

pub fn records_to_rows(records: &[RunRecord]) -> String {
    let mut out = RECORD_COLUMNS.join("\t");
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.trial,
            escape(&r.problem),
            r.delta_rel,
            r.delta,
            r.replicate,
            r.method,
            r.chosen_n,
            r.error,
            cell(&r.vs_oo),
            r.vs_best,
            r.solves_used,
            stopped_name(r.stopped),
            r.n_o,
            r.n_oo,
            cell(&r.n_opt),
            cell(&r.oracle_sum),
            cell(&r.oracle_c),
            r.outside_theory,
            cell(&r.wall_time_us),
            r.failure.as_deref().map(escape).unwrap_or_default(),
        );
    }
    out
}

fn parse_cell<T: std::str::FromStr>(field: &str, s: &str, line: usize) -> Result<T> {
    s.parse()
        .map_err(|_| Error::schema(field, format!("line {line}: cannot parse `{s}`")))
}

fn parse_opt<T: std::str::FromStr>(field: &str, s: &str, line: usize) -> Result<Option<T>> {
    if s.is_empty() {
        Ok(None)
    } else {
        parse_cell(field, s, line).map(Some)
    }
}

pub fn records_from_rows(text: &str) -> Result<Vec<RunRecord>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::schema("<header>", "empty file"))?;
    if header.split('\t').ne(RECORD_COLUMNS.iter().copied()) {
        return Err(Error::schema("<header>", "unexpected column layout"));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let ln = i + 2;
            let c: Vec<&str> = line.split('\t').collect();
            if c.len() != RECORD_COLUMNS.len() {
                return Err(Error::schema("<row>", format!("line {ln}: {} cells", c.len())));
            }
            Ok(RunRecord {
                trial: parse_cell("trial", c[0], ln)?,
                problem: unescape(c[1]),
                delta_rel: parse_cell("delta_rel", c[2], ln)?,
                delta: parse_cell("delta", c[3], ln)?,
                replicate: parse_cell("replicate", c[4], ln)?,
                method: c[5]
                    .parse::<Method>()
                    .map_err(|_| Error::schema("method", format!("line {ln}: `{}`", c[5])))?,
                chosen_n: parse_cell("chosen_n", c[6], ln)?,
                error: parse_cell("error", c[7], ln)?,
                vs_oo: parse_opt("vs_oo", c[8], ln)?,
                vs_best: parse_cell("vs_best", c[9], ln)?,
                solves_used: parse_cell("solves_used", c[10], ln)?,
                stopped: match c[11] {
                    "threshold_met" => StopReason::ThresholdMet,
                    "grid_exhausted" => StopReason::GridExhausted,
                    other => return Err(Error::schema("stopped", format!("line {ln}: `{other}`"))),
                },
                n_o: parse_cell("n_o", c[12], ln)?,
                n_oo: parse_cell("n_oo", c[13], ln)?,
                n_opt: parse_opt("n_opt", c[14], ln)?,
                oracle_sum: parse_opt("oracle_sum", c[15], ln)?,
                oracle_c: parse_opt("oracle_c", c[16], ln)?,
                outside_theory: parse_cell("outside_theory", c[17], ln)?,
                wall_time_us: parse_opt("wall_time_us", c[18], ln)?,
                failure: (!c[19].is_empty()).then(|| unescape(c[19])),
            })
        })
        .collect()
}

fn summary_rows(methods: &[MethodSummary]) -> String {
    let mut out = String::from(
        "method\trecords\tfailed\tmedian_vs_oo\tp90_vs_oo\tmedian_vs_best\tp90_vs_best\tmean_solves\toutlier_rate\tn_opt_absent\n",
    );
    for m in methods {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            m.method,
            m.records,
            m.failed,
            cell(&m.median_vs_oo),
            cell(&m.p90_vs_oo),
            cell(&m.median_vs_best),
            cell(&m.p90_vs_best),
            m.mean_solves,
            m.outlier_rate,
            m.n_opt_absent
        );
    }
    out
}

/// Renders `input` in `format`.
pub fn render(input: ReportInput<'_>, format: ReportFormat) -> Result<String> {
    match (input, format) {
        (ReportInput::Batch([]), _) => Err(Error::InsufficientData("empty batch".into())),
        (ReportInput::Batch(records), ReportFormat::Rows) => Ok(records_to_rows(records)),
        (ReportInput::Batch(records), ReportFormat::Document) => {
            let doc = serde_json::json!({ "kind": "batch", "records": records });
            Ok(serde_json::to_string_pretty(&doc).expect("encodes") + "\n")
        }
        (ReportInput::Summary(s), ReportFormat::Rows) => Ok(summary_rows(&s.methods)),
        (ReportInput::Summary(s), ReportFormat::Document) => {
            Ok(serde_json::to_string_pretty(s).expect("encodes") + "\n")
        }
        (ReportInput::Probe(name, v), ReportFormat::Document) => {
            let doc = serde_json::json!({ "kind": "probe", "probe": name, "report": v });
            Ok(serde_json::to_string_pretty(&doc).expect("encodes") + "\n")
        }
        (ReportInput::Probe(..), ReportFormat::Rows) => {
            Err(Error::domain("format", "probe reports are written as documents"))
        }
    }
}

/// Writes `input` to `path`. Nothing is created when rendering fails.
pub fn emit_report(input: ReportInput<'_>, format: ReportFormat, path: &Path) -> Result<()> {
    let text = render(input, format)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Parses a batch written in either format.
pub fn parse_batch(text: &str) -> Result<Vec<RunRecord>> {
    if text.trim_start().starts_with('{') {
        let v: Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if v.get("kind").and_then(Value::as_str) != Some("batch") {
            return Err(Error::schema("kind", "expected `batch`"));
        }
        let records = v
            .get("records")
            .cloned()
            .ok_or_else(|| Error::schema("records", "missing"))?;
        serde_json::from_value(records).map_err(|e| Error::schema("records", e.to_string()))
    } else {
        records_from_rows(text)
    }
}

pub fn load_batch(path: &Path) -> Result<Vec<RunRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_batch(&text)
}
