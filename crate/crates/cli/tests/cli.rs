use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mildvol"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("binary runs");
    if !out.status.success() {
        eprintln!("{}", String::from_utf8_lossy(&out.stderr));
    }
    out
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("cfg.toml");
    fs::write(&p, body).unwrap();
    p
}

const SMALL_SHIFT: &str = r#"
seed = 11

[space]
kind = "l2"
a = 0.0
b = 1.0
points = 32

[semigroup]
kind = "nilpotent-shift"

[volatility]
kind = "kernel"
noise_cells = 8
shape = { kind = "gaussian", scale = 1.0, length = 0.15 }

[simulation]
n = 32

[[functionals]]
kind = "interval-average"
lo = 0.0
hi = 0.5

[campaign]
n_grid = [32]
replications = 2
"#;

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL_SHIFT);
    for cmd in ["estimate", "simulate", "validate-clt"] {
        let a = tmp.path().join(format!("{cmd}-a"));
        let b = tmp.path().join(format!("{cmd}-b"));
        for d in [&a, &b] {
            assert!(run(&[cmd, "--config", cfg.to_str().unwrap(), "--out", d.to_str().unwrap()]).status.success());
        }
        let (fa, fb) = (files(&a), files(&b));
        assert!(fa.len() >= 2);
        assert_eq!(fa, fb, "{cmd} outputs differ");
    }
}

#[test]
fn zero_volatility_path_is_the_deterministic_flow() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sim");
    let cfg = configs().join("simulate-zero-vol.toml");
    assert!(run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]).status.success());
    let text = fs::read_to_string(out.join("path.csv")).unwrap();
    let rows: Vec<Vec<f64>> =
        text.lines().skip(1).map(|l| l.split(',').skip(1).map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 33);
    // Y_0 = 1_[1/2, 1] moves left one cell per step and leaves the domain.
    for (i, row) in rows.iter().enumerate() {
        for (k, v) in row.iter().enumerate() {
            let want = if (16..32).contains(&(k + i)) { 1.0 } else { 0.0 };
            assert_eq!(*v, want, "i={i} k={k}");
        }
    }
    assert!(out.join("path.json").exists());
}

#[test]
fn heat_mode_variance_matches_the_stationary_ou_law() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"
seed = 4
[space]
kind = "spectral"
modes = 1
[semigroup]
kind = "heat"
kappa = 1.0
[volatility]
kind = "heat-diagonal"
scale = 1.0
r = 2.0
[simulation]
n = 40000
horizon = 400.0
"#,
    );
    let out = tmp.path().join("heat");
    assert!(run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]).status.success());
    let text = fs::read_to_string(out.join("path.csv")).unwrap();
    let xs: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    // discard the transient from X_0 = 0
    let tail = &xs[1000..];
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    let var = tail.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (tail.len() - 1) as f64;
    let lambda = std::f64::consts::PI.powi(2);
    let want = 1.0 / (2.0 * lambda);
    assert!((var / want - 1.0).abs() < 0.1, "variance {var} vs {want}");
}

#[test]
fn single_n_lln_report_has_one_row_and_a_stamp() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL_SHIFT);
    let out = tmp.path().join("lln");
    assert!(run(&["validate-lln", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]).status.success());
    let r = report(&out);
    assert_eq!(r["result"]["rows"].as_array().unwrap().len(), 1);
    assert_eq!(r["passed"], Value::Bool(true));
    assert_eq!(r["config_hash"].as_str().unwrap().len(), 64);
    assert!(r["version"].as_str().unwrap().starts_with("mildvol-cli "));
    assert_eq!(fs::read_to_string(out.join("errors.csv")).unwrap().lines().count(), 2);
}

#[test]
fn lln_threshold_failure_exits_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    // with no noise every error is exactly 0, so the errors cannot strictly decrease
    let body = SMALL_SHIFT
        .replace("shape = { kind = \"gaussian\", scale = 1.0, length = 0.15 }", "shape = { kind = \"zero\" }")
        .replace("n_grid = [32]", "n_grid = [32, 64]");
    let cfg = write_config(tmp.path(), &body);
    let out = tmp.path().join("lln");
    let o = run(&["validate-lln", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(report(&out)["passed"], Value::Bool(false));
}

#[test]
fn clt_smoke_run_with_two_replications() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL_SHIFT);
    let out = tmp.path().join("clt");
    assert!(run(&["validate-clt", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]).status.success());
    let r = report(&out);
    assert_eq!(r["result"]["replications"], 2);
    assert_eq!(fs::read_to_string(out.join("replications.csv")).unwrap().lines().count(), 3);
}

#[test]
fn brownian_control_is_not_flagged_divergent() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("cx");
    let o = run(&[
        "counterexample",
        "rv-lln",
        "--hurst",
        "0.5",
        "--replications",
        "40",
        "--n-grid",
        "64,128,256",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let r = report(&out);
    assert_eq!(r["result"]["divergent"], Value::Bool(false));
    assert!(!String::from_utf8_lossy(&o.stdout).contains("DIVERGENT"));

    let out = tmp.path().join("sharp");
    assert!(run(&["counterexample", "sarcv-clt-sharpness", "--hurst", "0.5", "--out", out.to_str().unwrap()])
        .status
        .success());
    assert_eq!(report(&out)["result"]["divergent"], Value::Bool(false));
}

#[test]
fn rough_counterexample_is_flagged() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sharp");
    let o = run(&["counterexample", "sarcv-clt-sharpness", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(report(&out)["result"]["divergent"], Value::Bool(true));
    assert!(String::from_utf8_lossy(&o.stdout).contains("DIVERGENT"));
}

#[test]
fn regime_report_classifies_identity_and_rank_one_shift() {
    let tmp = tempfile::tempdir().unwrap();
    let ident = SMALL_SHIFT.replace("kind = \"nilpotent-shift\"", "kind = \"identity\"");
    let cfg = write_config(tmp.path(), &ident);
    let out = tmp.path().join("id");
    assert!(run(&["regime-report", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .status
        .success());
    assert_eq!(report(&out)["result"]["case"], "I");

    let out = tmp.path().join("r1");
    let cfg = configs().join("regime-rank-one.toml");
    assert!(run(&["regime-report", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .status
        .success());
    assert_eq!(report(&out)["result"]["case"], "III");
}

#[test]
fn config_errors_exit_with_two_and_a_line() {
    let tmp = tempfile::tempdir().unwrap();
    let body = SMALL_SHIFT.replace("n = 32\n", "n = 32\nsteps = 3\n");
    let line = body.lines().position(|l| l.starts_with("steps")).unwrap() + 1;
    let cfg = write_config(tmp.path(), &body);
    let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("x").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains(&format!("line {line}")));

    let cfg = write_config(tmp.path(), &SMALL_SHIFT.replace("hi = 0.5", "hi = 1.5"));
    let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("y").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let cfg = write_config(tmp.path(), &SMALL_SHIFT.replace("n_grid = [32]", "n_grid = [64, 32]"));
    let o = run(&["validate-lln", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("z").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn written_config_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL_SHIFT);
    let a = tmp.path().join("a");
    assert!(run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()]).status.success());
    let b = tmp.path().join("b");
    let canonical = a.join("config.toml");
    assert!(run(&["simulate", "--config", canonical.to_str().unwrap(), "--out", b.to_str().unwrap()]).status.success());
    assert_eq!(fs::read(a.join("path.csv")).unwrap(), fs::read(b.join("path.csv")).unwrap());
    assert_eq!(fs::read(a.join("config.toml")).unwrap(), fs::read(b.join("config.toml")).unwrap());
}

#[test]
fn shipped_configs_parse() {
    let tmp = tempfile::tempdir().unwrap();
    for e in fs::read_dir(configs()).unwrap() {
        let p = e.unwrap().path();
        let out = tmp.path().join(p.file_stem().unwrap());
        let o = run(&["regime-report", "--config", p.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", p.display());
    }
}
