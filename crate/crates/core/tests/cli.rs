mod common;

use std::path::PathBuf;
use std::process::{Command, Output};

fn carleman(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_carleman")).args(args).output().unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn cfg(name: &str) -> String {
    common::config_path(name).display().to_string()
}

#[test]
fn validate_diagonal_passes() {
    let out = carleman(&["validate", "--config", &cfg("diagonal_mixed.toml")]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let doc: toml::Table = toml::from_str(&text).unwrap();
    assert_eq!(doc["pass"].as_bool(), Some(true));
    let sums = doc["null_sequence"]["series"]["partial_sums"].as_array().unwrap();
    assert_eq!(sums.len(), 8);
}

#[test]
fn eval_zero_operator_writes_zero_grid() {
    let dir = scratch("eval_zero");
    let out = carleman(&[
        "eval",
        "--config",
        &cfg("zero.toml"),
        "--out",
        dir.to_str().unwrap(),
        "--grid",
        "-1:1:5,-2:2:3",
        "--heatmap",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.join("grid.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("s,t,re,im,residual"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 15);
    for row in rows {
        let f: Vec<f64> = row.split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!((f[2], f[3]), (0.0, 0.0));
    }
    assert!(dir.join("heatmap.pgm").exists());
}

#[test]
fn eval_derivative_matches_library() {
    let dir = scratch("eval_deriv");
    let out = carleman(&[
        "eval",
        "--config",
        &cfg("random_dense.toml"),
        "--out",
        dir.to_str().unwrap(),
        "--grid",
        "0.5:0.5:1,-1:-1:1",
        "--deriv",
        "1,2",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.join("grid.csv")).unwrap();
    let f: Vec<f64> = csv.lines().nth(1).unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    let want = common::pipeline("random_dense.toml").model.eval(1, 2, 0.5, -1.0).unwrap().value;
    assert!((f[2] - want.re).abs() <= 1e-12 * (1.0 + want.norm()));
    assert!((f[3] - want.im).abs() <= 1e-12 * (1.0 + want.norm()));
}

#[test]
fn build_writes_kernel_and_assignment() {
    let dir = scratch("build");
    let out = carleman(&["build", "--config", &cfg("diagonal_mixed.toml"), "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let model = carleman::kernel::KernelModel::from_toml(&std::fs::read_to_string(dir.join("kernel.toml")).unwrap()).unwrap();
    assert_eq!(model.frame_len(), 16);
    let report: toml::Table = toml::from_str(&std::fs::read_to_string(dir.join("assignment.toml")).unwrap()).unwrap();
    assert_eq!(report["pairs"].as_array().unwrap().len(), 16);
    assert_eq!(report["sumrk_targets_met"].as_bool(), Some(true));
}

#[test]
fn verify_rank_one_passes_and_writes_report() {
    let dir = scratch("verify_rank_one");
    let out = carleman(&["verify", "--config", &cfg("rank_one.toml"), "--out", dir.to_str().unwrap(), "--threads", "2"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert!(text.ends_with("summary: 8 checks, 0 failed\n"));
    assert_eq!(std::fs::read_to_string(dir.join("verify.txt")).unwrap(), text);
}

#[test]
fn failing_checks_exit_with_one() {
    let out = carleman(&["verify", "--config", &cfg("stress/weighted_shift.toml")]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stdout).unwrap().contains("[FAIL] vanishing"));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(carleman(&["validate"]).status.code(), Some(2));
    assert_eq!(carleman(&["validate", "--config", "/nonexistent.toml"]).status.code(), Some(2));
    assert_eq!(carleman(&["eval", "--config", &cfg("zero.toml"), "--grid", "1:2"]).status.code(), Some(2));
    assert_eq!(carleman(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(carleman(&["--help"]).status.code(), Some(0));
}

#[test]
fn environment_overrides_config() {
    let out = Command::new(env!("CARGO_BIN_EXE_carleman"))
        .args(["validate", "--config", &cfg("zero.toml")])
        .env("CARLEMAN_OPERATOR__DIM", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
