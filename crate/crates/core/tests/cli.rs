use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use fastbal::experiments::config::ProblemSource;
use fastbal::experiments::{load_batch, ExperimentConfig};
use fastbal::choice::Method;

fn fastbal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fastbal")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn small_config(dir: &Path, problem: &Path) -> std::path::PathBuf {
    let mut cfg = ExperimentConfig::default_suite();
    cfg.problems = vec![ProblemSource::File {
        file: problem.file_name().unwrap().into(),
    }];
    cfg.replicates = 3;
    let path = dir.join("cfg.json");
    fs::write(&path, cfg.to_json()).unwrap();
    path
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(code(&fastbal(&[])), 1);
    assert_eq!(code(&fastbal(&["run", "--no-such-flag"])), 1);
    assert_eq!(code(&fastbal(&["run", "--method", "bogus"])), 1);
    assert_eq!(code(&fastbal(&["gen-problem", "--decay", "cubic:2", "--out", "x"])), 1);
    assert_eq!(code(&fastbal(&["--help"])), 0);
    assert_eq!(code(&fastbal(&["--version"])), 0);
}

#[test]
fn run_compare_and_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let problem = dir.path().join("problem.json");
    let out = fastbal(&["gen-problem", "--decay", "polynomial:1", "--smoothness", "power:0.4", "--dim", "100", "--out", p(&problem)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let cfg = small_config(dir.path(), &problem);

    let run_dir = dir.path().join("run");
    let out = fastbal(&["run", "--config", p(&cfg), "--out", p(&run_dir), "--tau", "1.5", "--method", "fast,lepskij"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let records_path = run_dir.join("records.tsv");
    let records = load_batch(&records_path).unwrap();
    // 3 noise levels x 3 replicates x 2 methods
    assert_eq!(records.len(), 18);
    assert!(records.iter().all(|r| matches!(r.method, Method::Fast | Method::Lepskij)));
    assert_eq!(fs::read_to_string(&records_path).unwrap().lines().count(), 19);
    assert!(run_dir.join("summary.json").exists());

    let out = fastbal(&["compare", "--batch", p(&records_path)]);
    assert_eq!(code(&out), 0);
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 3);

    let doc = dir.path().join("records.json");
    assert_eq!(code(&fastbal(&["report", "--input", p(&records_path), "--format", "document", "--out", p(&doc)])), 0);
    assert_eq!(load_batch(&doc).unwrap(), records);
    let rows = dir.path().join("back.tsv");
    assert_eq!(code(&fastbal(&["report", "--input", p(&doc), "--format", "rows", "--out", p(&rows)])), 0);
    assert_eq!(fs::read(&rows).unwrap(), fs::read(&records_path).unwrap());
}

#[test]
fn single_method_compare_fails() {
    let dir = tempfile::tempdir().unwrap();
    let problem = dir.path().join("problem.json");
    assert_eq!(code(&fastbal(&["gen-problem", "--dim", "50", "--out", p(&problem)])), 0);
    let cfg = small_config(dir.path(), &problem);
    let run_dir = dir.path().join("run");
    assert_eq!(code(&fastbal(&["run", "--config", p(&cfg), "--out", p(&run_dir), "--method", "fast"])), 0);
    assert_eq!(code(&fastbal(&["compare", "--batch", p(&run_dir.join("records.tsv"))])), 1);
}

#[test]
fn repeated_runs_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let problem = dir.path().join("problem.json");
    assert_eq!(code(&fastbal(&["gen-problem", "--dim", "80", "--out", p(&problem)])), 0);
    let cfg = small_config(dir.path(), &problem);
    let mut files = Vec::new();
    for name in ["a", "b"] {
        let run_dir = dir.path().join(name);
        assert_eq!(code(&fastbal(&["run", "--config", p(&cfg), "--out", p(&run_dir), "--seed", "99"])), 0);
        files.push((
            fs::read(run_dir.join("records.tsv")).unwrap(),
            fs::read(run_dir.join("summary.json")).unwrap(),
        ));
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn probes_report_and_signal_failures() {
    let dir = tempfile::tempdir().unwrap();
    let tail = dir.path().join("tail.json");
    let out = fastbal(&["probe", "tail", "--samples", "20000", "--out", p(&tail)]);
    assert_eq!(code(&out), 0);
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&tail).unwrap()).unwrap();
    assert_eq!(doc["probe"], "tail");

    assert_eq!(code(&fastbal(&["probe", "decomposition", "--samples", "2000"])), 0);

    // all energy in the last mode violates both variants of the assumption
    let problem = dir.path().join("rough.json");
    assert_eq!(code(&fastbal(&["gen-problem", "--dim", "40", "--no-jitter", "--out", p(&problem)])), 0);
    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&problem).unwrap()).unwrap();
    let sigma: Vec<f64> = serde_json::from_value(v["sigma"].clone()).unwrap();
    let mut x = vec![0.0; 40];
    let mut y = vec![0.0; 40];
    x[39] = 1.0;
    y[39] = sigma[39];
    v["x_true"] = x.into();
    v["y_exact"] = y.into();
    fs::write(&problem, v.to_string()).unwrap();
    let cfg = small_config(dir.path(), &problem);
    assert_eq!(code(&fastbal(&["probe", "assumption", "--config", p(&cfg)])), 2);
}

#[test]
fn missing_config_is_a_runtime_error() {
    let out = fastbal(&["run", "--config", "/definitely/not/here.json"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}
