//! Black-box tests of the command-line surface: exit codes, determinism,
//! report shapes, and error paths.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_lifted")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().unwrap()
}

fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "`{}` failed: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn synth(dir: &Path, seed: u64) -> std::path::PathBuf {
    let path = dir.join(format!("blobs-{seed}.csv"));
    run_ok(&[
        "synth", "--classes", "8", "--per-class", "10", "--dim", "5", "--seed",
        &seed.to_string(), "--out", path.to_str().unwrap(),
    ]);
    path
}

#[test]
fn synth_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        run_ok(&[
            "synth", "--classes", "5", "--per-class", "4", "--dim", "3", "--seed", "7",
            "--out", p.to_str().unwrap(),
        ]);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(std::fs::read_to_string(&a).unwrap().lines().count(), 20);
}

#[test]
fn missing_output_path_is_usage_error() {
    let out = run(&["synth", "--classes", "5", "--per-class", "4", "--dim", "3"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_triplet_batch_size_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 1);
    let out = run(&[
        "train",
        "--data",
        data.to_str().unwrap(),
        "--set",
        "loss=triplet",
        "--set",
        "batch_size=121",
        "--checkpoint",
        dir.path().join("ck").to_str().unwrap(),
        "--log",
        dir.path().join("log").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("divisible by 3"));
}

#[test]
fn unknown_config_key_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 2);
    let out = run(&[
        "train",
        "--data",
        data.to_str().unwrap(),
        "--set",
        "bogus=1",
        "--checkpoint",
        dir.path().join("ck").to_str().unwrap(),
        "--log",
        dir.path().join("log").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_dataset_is_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "train",
        "--data",
        dir.path().join("nope.csv").to_str().unwrap(),
        "--checkpoint",
        dir.path().join("ck").to_str().unwrap(),
        "--log",
        dir.path().join("log").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 3);
    let cfg = dir.path().join("run.cfg");
    // File sets 40 iterations; the flag override wins with 25.
    std::fs::write(&cfg, "max_iterations = 40\nbatch_size = 12\nembedding_dim = 4\ncandidate_pool_size = 24\n").unwrap();
    let log = dir.path().join("log.csv");
    run_ok(&[
        "train",
        "--data",
        data.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--set",
        "max_iterations=25",
        "--checkpoint",
        dir.path().join("ck").to_str().unwrap(),
        "--log",
        log.to_str().unwrap(),
    ]);
    let lines = std::fs::read_to_string(&log).unwrap().lines().count();
    assert_eq!(lines, 26, "header plus 25 iterations");
}

#[test]
fn train_then_eval_produces_report_and_curve() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 4);
    let ck = dir.path().join("ck.txt");
    run_ok(&[
        "train",
        "--data",
        data.to_str().unwrap(),
        "--set",
        "max_iterations=300",
        "--set",
        "batch_size=16",
        "--set",
        "embedding_dim=4",
        "--set",
        "candidate_pool_size=32",
        "--checkpoint",
        ck.to_str().unwrap(),
        "--log",
        dir.path().join("log.csv").to_str().unwrap(),
    ]);
    let report = dir.path().join("report.json");
    let curve = dir.path().join("curve.csv");
    run_ok(&[
        "eval",
        "--data",
        data.to_str().unwrap(),
        "--checkpoint",
        ck.to_str().unwrap(),
        "--set",
        "eval_ks=1,2,4,8",
        "--report",
        report.to_str().unwrap(),
        "--curve",
        curve.to_str().unwrap(),
    ]);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let recall = json["recall_at"].as_object().unwrap();
    let keys: Vec<&String> = recall.keys().collect();
    assert_eq!(keys, ["1", "2", "4", "8"]);
    assert!(json["nmi"].as_f64().unwrap() >= 0.0);
    assert!(json["f1"].as_f64().unwrap() >= 0.0);
    assert_eq!(json["config"]["loss"], "lifted-smooth");

    let curve_text = std::fs::read_to_string(&curve).unwrap();
    assert!(curve_text.starts_with("k,score\n"));
    assert_eq!(curve_text.lines().count(), 5);
}

#[test]
fn eval_rejects_dimension_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 5);
    let ck = dir.path().join("ck.txt");
    run_ok(&[
        "train",
        "--data",
        data.to_str().unwrap(),
        "--set",
        "max_iterations=10",
        "--set",
        "batch_size=12",
        "--set",
        "embedding_dim=4",
        "--set",
        "candidate_pool_size=24",
        "--checkpoint",
        ck.to_str().unwrap(),
        "--log",
        dir.path().join("log.csv").to_str().unwrap(),
    ]);
    // A dataset with a different feature dimension must be rejected.
    let other = dir.path().join("wide.csv");
    run_ok(&[
        "synth", "--classes", "4", "--per-class", "4", "--dim", "9", "--seed", "5",
        "--out", other.to_str().unwrap(),
    ]);
    let out = run(&[
        "eval",
        "--data",
        other.to_str().unwrap(),
        "--checkpoint",
        ck.to_str().unwrap(),
        "--report",
        dir.path().join("r.json").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dim"));
}

#[test]
fn gradcheck_default_passes_all_losses() {
    let out = run_ok(&["gradcheck", "--trials", "3"]);
    let text = String::from_utf8_lossy(&out.stdout);
    for kind in ["contrastive", "triplet", "lifted-nonsmooth", "lifted-smooth"] {
        assert!(text.contains(kind), "missing {kind} in output");
    }
    assert!(!text.contains("FAIL"));
}

#[test]
fn gradcheck_impossible_tolerance_fails() {
    let out = run(&["gradcheck", "--trials", "2", "--tolerance", "0"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn gradcheck_single_loss_prints_per_trial_lines() {
    let out = run_ok(&["gradcheck", "--loss", "lifted-smooth", "--trials", "5"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().filter(|l| l.starts_with("lifted-smooth")).count(), 5);
}

#[test]
fn jsonl_dataset_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.jsonl");
    let mut text = String::new();
    for i in 0..12 {
        let label = i % 3;
        let x = label as f64 * 5.0 + (i as f64) * 0.01;
        text.push_str(&format!(
            "{{\"label\": {label}, \"features\": [{x}, {}]}}\n",
            -x
        ));
    }
    std::fs::write(&data, text).unwrap();
    let ck = dir.path().join("ck.txt");
    run_ok(&[
        "train",
        "--data",
        data.to_str().unwrap(),
        "--set",
        "max_iterations=20",
        "--set",
        "batch_size=4",
        "--set",
        "embedding_dim=2",
        "--set",
        "hidden_widths=4",
        "--set",
        "candidate_pool_size=8",
        "--set",
        "train_fraction=0.67",
        "--checkpoint",
        ck.to_str().unwrap(),
        "--log",
        dir.path().join("log.csv").to_str().unwrap(),
    ]);
    assert!(ck.exists());
}
