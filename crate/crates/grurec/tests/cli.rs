//! End-to-end checks of the command line contract: JSON on stdout, logs on
//! stderr, stable exit codes, and the seed override. Every test spawns the
//! real binary.

use std::path::Path;
use std::process::{Command, Output};

fn run_in(dir: &Path, args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_grurec"));
    cmd.current_dir(dir).args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary must spawn")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no exit code")
}

/// synth -> train -> eval -> predict, sharing one temp workspace.
#[test]
fn full_pipeline_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    let synth = run_in(
        d,
        &["synth", "--classes", "3", "--train-per-class", "6", "--test-per-class", "3", "--dim", "4", "--out-dir", "data", "--seed", "5"],
        &[],
    );
    assert_eq!(code(&synth), 0, "{}", String::from_utf8_lossy(&synth.stderr));
    let summary = stdout_json(&synth);
    assert_eq!(summary["train_samples"], 18);
    assert_eq!(summary["test_samples"], 9);
    assert!(d.join("data/train.jsonl").exists());
    assert!(d.join("data/manifest.json").exists());

    let train = run_in(
        d,
        &["train", "--data", "data/train.jsonl", "--val", "data/test.jsonl", "--out", "model.dgru", "--hidden", "16,12", "--epochs", "6", "--batch-size", "6", "--patience", "6", "--seed", "5"],
        &[],
    );
    assert_eq!(code(&train), 0, "{}", String::from_utf8_lossy(&train.stderr));
    let report = stdout_json(&train);
    assert!(d.join("model.dgru").exists());
    assert!(d.join("model.dgru.history.jsonl").exists());
    assert!(d.join("model.dgru.manifest.json").exists());
    assert_eq!(report["epochs_run"], 6);
    let best_val = report["best_val_acc"].as_f64().unwrap();

    // Training logs are human-facing and live on stderr only.
    assert!(!train.stderr.is_empty());
    let history = std::fs::read_to_string(d.join("model.dgru.history.jsonl")).unwrap();
    assert_eq!(history.lines().count(), 6);
    for line in history.lines() {
        let row: serde_json::Value = serde_json::from_str(line).unwrap();
        for key in ["epoch", "train_loss", "train_acc", "val_acc", "elapsed_s"] {
            assert!(row.get(key).is_some(), "history row missing {key}");
        }
    }

    let eval = run_in(d, &["eval", "--model", "model.dgru", "--data", "data/test.jsonl"], &[]);
    assert_eq!(code(&eval), 0);
    let metrics = stdout_json(&eval);
    for key in ["accuracy", "per_class", "confusion", "loss"] {
        assert!(metrics.get(key).is_some(), "metrics missing {key}");
    }
    // The checkpoint restores the best epoch, so eval must reproduce it.
    let acc = metrics["accuracy"].as_f64().unwrap();
    assert!((acc - best_val).abs() < 1e-9, "eval {acc} vs reported best {best_val}");
    assert_eq!(metrics["confusion"].as_array().unwrap().len(), 3);

    let predict = run_in(d, &["predict", "--model", "model.dgru", "--input", "data/test.jsonl"], &[]);
    assert_eq!(code(&predict), 0);
    let lines: Vec<&str> = std::str::from_utf8(&predict.stdout).unwrap().lines().collect();
    assert_eq!(lines.len(), 9);
    for line in &lines {
        let row: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(row["id"].is_string());
        assert!(row["label"].is_string());
        let probs: Vec<f64> =
            row["probs"].as_array().unwrap().iter().map(|p| p.as_f64().unwrap()).collect();
        assert_eq!(probs.len(), 3);
        let total: f64 = probs.iter().sum();
        assert!((total - 1.0).abs() < 1e-5, "probs sum to {total}");
    }

    // Same invocation, same output: prediction is read-only and seed-free.
    let again = run_in(d, &["predict", "--model", "model.dgru", "--input", "data/test.jsonl"], &[]);
    assert_eq!(predict.stdout, again.stdout);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    run_in(d, &["synth", "--classes", "2", "--train-per-class", "3", "--test-per-class", "1", "--dim", "3", "--out-dir", "data"], &[]);

    let bad_batch = run_in(d, &["train", "--data", "data/train.jsonl", "--out", "m.dgru", "--batch-size", "1"], &[]);
    assert_eq!(code(&bad_batch), 2);
    assert!(String::from_utf8_lossy(&bad_batch.stderr).contains("batch size"));

    let both = run_in(d, &["train", "--data", "data/train.jsonl", "--out", "m.dgru", "--hidden", "8", "--stacks", "3"], &[]);
    assert_eq!(code(&both), 2, "--hidden and --stacks together must be rejected");

    let unknown_flag = run_in(d, &["train", "--data", "data/train.jsonl", "--out", "m.dgru", "--warp-speed"], &[]);
    assert_eq!(code(&unknown_flag), 2);
}

#[test]
fn data_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    run_in(d, &["synth", "--classes", "2", "--train-per-class", "4", "--test-per-class", "1", "--dim", "3", "--out-dir", "narrow"], &[]);
    run_in(d, &["synth", "--classes", "2", "--train-per-class", "2", "--test-per-class", "1", "--dim", "7", "--out-dir", "wide"], &[]);
    let train = run_in(
        d,
        &["train", "--data", "narrow/train.jsonl", "--out", "m.dgru", "--hidden", "8", "--epochs", "2", "--batch-size", "4", "--augment", "off"],
        &[],
    );
    assert_eq!(code(&train), 0, "{}", String::from_utf8_lossy(&train.stderr));

    let mismatch = run_in(d, &["predict", "--model", "m.dgru", "--input", "wide/train.jsonl"], &[]);
    assert_eq!(code(&mismatch), 3);
    let err = String::from_utf8_lossy(&mismatch.stderr).to_string();
    assert!(err.contains("expected 3") && err.contains("got 7"), "stderr: {err}");

    let missing = run_in(d, &["eval", "--model", "m.dgru", "--data", "no_such.jsonl"], &[]);
    assert_eq!(code(&missing), 3);
}

#[test]
fn divergence_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    run_in(d, &["synth", "--classes", "2", "--train-per-class", "4", "--test-per-class", "1", "--dim", "3", "--out-dir", "data"], &[]);
    let diverged = run_in(
        d,
        &["train", "--data", "data/train.jsonl", "--out", "m.dgru", "--hidden", "8", "--epochs", "3", "--batch-size", "4", "--lr", "1e30", "--augment", "off"],
        &[],
    );
    assert_eq!(code(&diverged), 4);
    assert!(String::from_utf8_lossy(&diverged.stderr).contains("non-finite"));
}

#[test]
fn env_seed_overrides_flag() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let flagged = run_in(d, &["gradcheck", "--seed", "3"], &[]);
    assert_eq!(code(&flagged), 0);
    assert_eq!(stdout_json(&flagged)["seed"], 3);

    let overridden = run_in(d, &["gradcheck", "--seed", "3"], &[("GRUREC_SEED", "99")]);
    assert_eq!(stdout_json(&overridden)["seed"], 99);

    let garbage = run_in(d, &["gradcheck"], &[("GRUREC_SEED", "not-a-number")]);
    assert_eq!(code(&garbage), 2);
}

#[test]
fn gradcheck_fault_injection_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let injected = run_in(dir.path(), &["gradcheck", "--inject-fault", "attention"], &[]);
    assert_eq!(code(&injected), 1);
    let report = stdout_json(&injected);
    assert_eq!(report["passed"], false);
    assert!(String::from_utf8_lossy(&injected.stderr).contains("attention"));
}

#[test]
fn synth_is_seed_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = ["synth", "--classes", "2", "--train-per-class", "3", "--test-per-class", "2", "--dim", "3", "--seed", "8"];
    let mut a = args.to_vec();
    a.extend(["--out-dir", "one"]);
    let mut b = args.to_vec();
    b.extend(["--out-dir", "two"]);
    run_in(d, &a, &[]);
    run_in(d, &b, &[]);
    let one = std::fs::read(d.join("one/train.jsonl")).unwrap();
    let two = std::fs::read(d.join("two/train.jsonl")).unwrap();
    assert_eq!(one, two);
}

#[test]
fn protocol_t_runs_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let synth = run_in(
        d,
        &["synth", "--classes", "2", "--subjects", "2", "--per-subject-class", "4", "--dim", "3", "--train-per-class", "0", "--test-per-class", "0", "--out-dir", "subj", "--seed", "4"],
        &[],
    );
    assert_eq!(code(&synth), 0, "{}", String::from_utf8_lossy(&synth.stderr));

    let args = ["protocol-t", "--data", "subj/subjects.jsonl", "--T", "2", "--hidden", "10,8", "--epochs", "4", "--batch-size", "4", "--augment", "off", "--seed", "4"];
    let first = run_in(d, &args, &[]);
    assert_eq!(code(&first), 0, "{}", String::from_utf8_lossy(&first.stderr));
    let report = stdout_json(&first);
    assert_eq!(report["t"], 2);
    assert_eq!(report["participants"].as_array().unwrap().len(), 2);

    let second = run_in(d, &args, &[]);
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn help_and_version_exit_0() {
    let dir = tempfile::tempdir().unwrap();
    for args in [&["--help"][..], &["--version"][..], &["train", "--help"][..]] {
        let out = run_in(dir.path(), args, &[]);
        assert_eq!(code(&out), 0, "{args:?}");
    }
    let bare = run_in(dir.path(), &[], &[]);
    assert_eq!(code(&bare), 2, "missing subcommand is a usage error");
}
