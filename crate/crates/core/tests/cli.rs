//! Exit codes, error lines and outputs of the `slah` binary.

use std::path::Path;
use std::process::{Command, Output};

fn slah(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slah")).args(args).output().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn assert_error(out: &Output, category: &str) {
    assert_eq!(out.status.code(), Some(1), "stderr: {}", stderr(out));
    let err = stderr(out);
    let lines: Vec<&str> = err.lines().collect();
    assert_eq!(lines.len(), 1, "expected one line, got {err:?}");
    assert!(lines[0].starts_with(&format!("error[{category}]: ")), "{err:?}");
}

fn out_arg(dir: &Path) -> String {
    dir.display().to_string()
}

#[test]
fn simulate_writes_episode_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = slah(&["--out", &out_arg(dir.path()), "--seed", "4", "simulate", "--alpha", "0.5", "--duration", "120", "--warmup", "20"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).starts_with("alpha=0.5 mean_bcr="));
    let episode = std::fs::read_to_string(dir.path().join("episode.csv")).unwrap();
    assert_eq!(episode.lines().count(), 1 + 19);
    let config = std::fs::read_to_string(dir.path().join("config.toml")).unwrap();
    assert!(config.contains("seed = 4"));

    let again = tempfile::tempdir().unwrap();
    let out = slah(&["--out", &out_arg(again.path()), "--seed", "4", "simulate", "--alpha", "0.5", "--duration", "120", "--warmup", "20"]);
    assert!(out.status.success());
    assert_eq!(std::fs::read(dir.path().join("episode.csv")).unwrap(), std::fs::read(again.path().join("episode.csv")).unwrap());
}

#[test]
fn fit_reads_csv_with_header() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("samples.csv");
    let rows: String = (1..=9)
        .map(|i| {
            let x = i as f64 / 10.0;
            format!("{x},{}\n", 2.0 + 8.0 / (1.0 + (-(10.0 * x - 5.0f64)).exp()))
        })
        .collect();
    std::fs::write(&input, format!("alpha,ftt\n{rows}")).unwrap();
    let model = dir.path().join("model.toml");
    let out = slah(&["fit", &input.display().to_string(), "--output", &model.display().to_string()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let value: toml::Value = toml::from_str(&std::fs::read_to_string(&model).unwrap()).unwrap();
    let beta1 = value["beta1"].as_float().unwrap();
    assert!((beta1 - 10.0).abs() < 1e-4, "beta1 = {beta1}");
}

#[test]
fn oracle_heal_reports_convergence() {
    let dir = tempfile::tempdir().unwrap();
    let out = slah(&["--out", &out_arg(dir.path()), "--seed", "7", "oracle-heal"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("converged=true"));
    for file in ["oracle_report.toml", "trace.csv", "trace_summary.csv", "plot_points.csv", "plot_curves.csv"] {
        assert!(dir.path().join(file).exists(), "{file} missing");
    }
}

#[test]
fn bad_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    std::fs::write(&config, "[traffic]\narrival_rat = 1.0\n").unwrap();
    let out = slah(&["--config", &config.display().to_string(), "--out", &out_arg(dir.path()), "simulate"]);
    assert_error(&out, "config");
    assert!(stderr(&out).contains("arrival_rat"));
}

#[test]
fn invalid_window_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = slah(&["--out", &out_arg(dir.path()), "simulate", "--duration", "10", "--warmup", "10"]);
    assert_error(&out, "config");
}

#[test]
fn missing_input_is_an_io_error() {
    let out = slah(&["fit", "/nonexistent/samples.csv"]);
    assert_error(&out, "io");
}

#[test]
fn too_few_samples_is_a_fit_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("two.csv");
    std::fs::write(&input, "0.1,3\n0.2,4\n").unwrap();
    let out = slah(&["fit", &input.display().to_string()]);
    assert_error(&out, "fit");
}

#[test]
fn non_numeric_row_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("junk.csv");
    std::fs::write(&input, "alpha,ftt\n0.1,3\nx,y\n").unwrap();
    let out = slah(&["fit", &input.display().to_string()]);
    assert_error(&out, "config");
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let out = slah(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}
