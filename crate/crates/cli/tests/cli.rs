use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn asmseq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_asmseq")).args(args).env_remove("ASMSEQ_SEED").output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn run_ok(args: &[&str]) {
    let out = asmseq(args);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn enumerate_scenario1() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    run_ok(&["enumerate", "--problem", "builtin:scenario1", "--out", out]);
    let s = json(dir.path().join("summary.json"));
    assert_eq!(s["count"], 3360);
    assert_eq!(s["closed_form_count"], "3360");
    assert_eq!(s["min"], 65.0);
    let rows = fs::read_to_string(dir.path().join("sequences.csv")).unwrap().lines().count();
    assert_eq!(rows, 3361);
}

#[test]
fn enumerate_scenario2() {
    let dir = TempDir::new().unwrap();
    run_ok(&["enumerate", "--problem", "builtin:scenario2", "--out", dir.path().to_str().unwrap()]);
    let s = json(dir.path().join("summary.json"));
    assert_eq!(s["min"], 64.0);
    assert_eq!(s["max"], 82.0);
    assert_eq!(s["distinct"], 36);
}

#[test]
fn missing_problem_file_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let out = asmseq(&["solve", "--problem", "/no/such/problem.json", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(code(&asmseq(&["enumerate", "--bogus"])), 1);
    assert_eq!(code(&asmseq(&["--help"])), 0);
}

#[test]
fn solve_scenario2() {
    let dir = TempDir::new().unwrap();
    run_ok(&["solve", "--problem", "builtin:scenario2", "--out", dir.path().to_str().unwrap()]);
    let s = json(dir.path().join("solution.json"));
    assert_eq!(s["min_total_time"], 64.0);
    assert_eq!(s["optimal_count"], "2");
    assert_eq!(s["optimal_sequences"].as_array().unwrap().len(), 2);
}

#[test]
fn milp_export_rejects_tool_changeover() {
    let dir = TempDir::new().unwrap();
    let out =
        asmseq(&["solve", "--problem", "builtin:scenario2", "--export-milp", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    let out = asmseq(&["export-milp", "--problem", "builtin:scenario2", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 2);
}

#[test]
fn milp_export_scenario1() {
    let dir = TempDir::new().unwrap();
    run_ok(&["solve", "--export-milp", "--out", dir.path().to_str().unwrap()]);
    let lp = fs::read_to_string(dir.path().join("model.lp")).unwrap();
    assert!(lp.starts_with("\\") || lp.contains("Minimize"));
    assert!(lp.trim_end().ends_with("End"));
    assert!(json(dir.path().join("solution.json"))["milp"].is_object());
}

#[test]
fn single_task_problem() {
    let dir = TempDir::new().unwrap();
    let file = dir.path().join("one.json");
    fs::write(&file, r#"{"name": "one", "tasks": [{"id": 1, "avg_time": 4.5}], "deltas": [[0]]}"#).unwrap();
    let out = dir.path().join("out");
    run_ok(&["solve", "--problem", file.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let s = json(out.join("solution.json"));
    assert_eq!(s["min_total_time"], 4.5);
    assert_eq!(s["optimal_sequences"], serde_json::json!([[1]]));
}

#[test]
fn cyclic_precedence_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let file = dir.path().join("cycle.json");
    fs::write(
        &file,
        r#"{"name": "cycle", "tasks": [{"id": 1, "avg_time": 1}, {"id": 2, "avg_time": 1}],
            "deltas": [[0, 0], [0, 0]], "precedence": [[1, 2], [2, 1]]}"#,
    )
    .unwrap();
    let out = asmseq(&["enumerate", "--problem", file.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 1);
}

#[test]
fn zero_episodes_fails_the_rollout() {
    let dir = TempDir::new().unwrap();
    run_ok(&["train", "--problem", "builtin:scenario2", "--max-episodes", "0", "--out", dir.path().to_str().unwrap()]);
    let r = json(dir.path().join("rollout.json"));
    assert_eq!(r["fail"], true);
    assert_eq!(r["optimal"], false);
}

#[test]
fn training_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        run_ok(&[
            "train",
            "--preset",
            "scenario3",
            "--seed",
            "11",
            "--max-episodes",
            "400",
            "--out",
            out.to_str().unwrap(),
        ]);
    }
    for name in ["episodes.csv", "qtable.csv", "rollout.json"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn tuned_training_finds_a_sequence() {
    let dir = TempDir::new().unwrap();
    run_ok(&["train", "--problem", "builtin:scenario2", "--seed", "3", "--out", dir.path().to_str().unwrap()]);
    let r = json(dir.path().join("rollout.json"));
    assert_eq!(r["fail"], false);
    assert_eq!(r["sequence"].as_array().unwrap().len(), 8);
    assert_eq!(r["optimum"], 64.0);
    let episodes = fs::read_to_string(dir.path().join("episodes.csv")).unwrap().lines().count();
    assert_eq!(episodes, 6501);
}

#[test]
fn jobs_must_be_positive() {
    assert_eq!(code(&asmseq(&["--jobs", "0", "enumerate", "--out", "/tmp/unused"])), 1);
}

fn sweep(dir: &TempDir, spec: &str, extra: &[&str]) -> Output {
    let file = dir.path().join("spec.json");
    fs::write(&file, spec).unwrap();
    let out = dir.path().join("out");
    let mut args = vec!["sweep", "--spec", file.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    asmseq(&args)
}

#[test]
fn empty_sweep_is_rejected() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&sweep(&dir, r#"{"axis": "alpha", "values": []}"#, &[])), 1);
    assert_eq!(code(&sweep(&dir, r#"{"axis": "nope", "values": [1]}"#, &[])), 1);
}

#[test]
fn reward_shift_sweep() {
    let dir = TempDir::new().unwrap();
    let spec = r#"{
        "problem": "builtin:scenario2",
        "preset": "scenario2",
        "base": {"max_episodes": 1500, "masking": true},
        "axis": "reward_shift",
        "values": [0, 3, 6, 7, 8, 9, 10, 12, 15],
        "replications": 2
    }"#;
    let out = sweep(&dir, spec, &["--seed", "5"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let out = dir.path().join("out");
    assert_eq!(fs::read_to_string(out.join("sweep.csv")).unwrap().lines().count(), 10);
    let reps = fs::read_to_string(out.join("replications.csv")).unwrap();
    assert!(reps.starts_with("axis_value,attempt,seed,fail,optimal,total_time,sequence\n"));
    assert!(reps.lines().count() >= 19);
    for name in ["mean_reward", "pct_optimal", "pct_fail"] {
        let csv = fs::read_to_string(out.join("plot-data").join(format!("{name}.csv"))).unwrap();
        assert!(csv.starts_with("x,y,ci\n"), "{name}");
        assert_eq!(csv.lines().count(), 10);
    }
    let s = json(out.join("summary.json"));
    assert_eq!(s["base_seed"], 5);
    assert!(s["power_law_fit"].is_null());
}

#[test]
fn paired_decay_sweep_fits_a_power_law() {
    let dir = TempDir::new().unwrap();
    let spec = r#"{
        "problem": "builtin:scenario2",
        "preset": "scenario3",
        "axis": "epsilon_decay",
        "values": [0.0004, 0.0002, 0.0001],
        "paired": {"axis": "max_episodes", "values": [130, 260, 500]},
        "replications": 2
    }"#;
    let out = sweep(&dir, spec, &[]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let s = json(dir.path().join("out/summary.json"));
    let fit = &s["power_law_fit"];
    assert!(fit.is_object(), "{s}");
    assert!(fit["exponent"].as_f64().unwrap() < 0.0);
}

#[test]
fn report_writes_plot_series() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    run_ok(&[
        "report",
        "--problem",
        "builtin:scenario2",
        "--preset",
        "scenario3",
        "--max-episodes",
        "400",
        "--out",
        out,
    ]);
    let plot = dir.path().join("plot-data");
    let dist = fs::read_to_string(plot.join("distribution.csv")).unwrap();
    assert!(dist.starts_with("total_time,reward,count,percent\n"));
    let curve = fs::read_to_string(plot.join("learning_curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 401);
    assert!(plot.join("decay_fit.csv").exists());
    assert!(json(dir.path().join("summary.json"))["rollout"].is_object());
}
