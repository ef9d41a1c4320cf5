//! End-to-end checks through the real binary.

use std::path::Path;
use std::process::{Command, Output};

fn quiver(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quiver"))
        .args(args)
        .output()
        .expect("spawn quiver")
}

fn collect_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|entry| {
            let entry = entry.unwrap();
            (
                entry.file_name().to_string_lossy().into_owned(),
                std::fs::read(entry.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn simulate_rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let output = quiver(&[
            "simulate",
            "--env",
            "strategy",
            "--policy",
            "thompson",
            "--T",
            "25",
            "--seeds",
            "0..6",
            "--save-state",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(output.status.success(), "{output:?}");
    }
    let a = collect_files(&out_a);
    let b = collect_files(&out_b);
    assert_eq!(
        a.len(),
        6 * 3 + 1,
        "expected csv+jsonl+state per seed plus summary"
    );
    assert_eq!(a, b, "rerun produced different bytes");
}

#[test]
fn compare_rerun_is_byte_identical_and_reports_gap() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let output = quiver(&[
            "compare",
            "--env",
            "strategy",
            "--policies",
            "thompson,random,fixed:direct",
            "--T",
            "25",
            "--seeds",
            "0..5",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(output.status.success(), "{output:?}");
    }
    assert_eq!(collect_files(&out_a), collect_files(&out_b));
    let report = std::fs::read_to_string(out_a.join("report.txt")).unwrap();
    assert!(report.contains("thompson improvement vs random"));
}

#[test]
fn invalid_env_exits_2_with_schema_message() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"mode\": \"strategy\"}").unwrap();
    let output = quiver(&[
        "simulate",
        "--env",
        bad.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("parsing environment"), "{stderr}");
}

#[test]
fn missing_state_file_exits_2() {
    let output = quiver(&["inspect", "--state", "/nonexistent/state.json"]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn assert_gate_failure_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let output = quiver(&[
        "simulate",
        "--env",
        "strategy",
        "--policy",
        "random",
        "--T",
        "20",
        "--seeds",
        "0..3",
        "--assert-min-success",
        "0.99",
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn inspect_prints_importances_and_archetype_rewards() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let output = quiver(&[
        "simulate",
        "--env",
        "strategy",
        "--policy",
        "thompson",
        "--T",
        "120",
        "--seeds",
        "0..1",
        "--save-state",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{output:?}");
    let output = quiver(&[
        "inspect",
        "--state",
        out.join("state_seed0.json").to_str().unwrap(),
        "--env",
        "strategy",
    ]);
    assert!(output.status.success(), "{output:?}");
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("importance"), "{stdout}");
    assert!(stdout.contains("expected reward by archetype"), "{stdout}");

    // After a 120-step training run the complexity feature should carry
    // positive weight for chain-of-thought.
    let line = stdout
        .lines()
        .skip_while(|l| !l.contains("'chain_of_thought'"))
        .find(|l| l.contains("importance"))
        .expect("importance line");
    let complexity = line
        .split_whitespace()
        .find(|tok| tok.starts_with("complexity="))
        .expect("complexity token");
    let value: f64 = complexity["complexity=".len()..].parse().unwrap();
    assert!(value > 0.0, "complexity importance {value} not positive");
}

#[test]
fn ablate_writes_four_rows_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let output = quiver(&[
        "ablate",
        "--env",
        "strategy",
        "--T",
        "20",
        "--seeds",
        "0..3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{output:?}");
    let csv = std::fs::read_to_string(out.join("ablation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn composite_mode_with_sparse_feedback_updates_every_step() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let output = quiver(&[
        "simulate",
        "--env",
        "tool",
        "--reward-mode",
        "composite",
        "--feedback-rate",
        "0.5",
        "--T",
        "20",
        "--seeds",
        "0..2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{output:?}");
    let jsonl = std::fs::read_to_string(out.join("trace_seed0.jsonl")).unwrap();
    let mut saw_missing_explicit = false;
    for line in jsonl.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["updated"], true, "{line}");
        assert!(v["reward_quality"].is_f64());
        assert!(v["reward_composite"].is_f64());
        if v["reward_explicit"].is_null() {
            saw_missing_explicit = true;
        }
    }
    assert!(
        saw_missing_explicit,
        "feedback_rate 0.5 never withheld a rating"
    );
}

#[test]
fn window_and_gamma_are_mutually_exclusive() {
    let dir = tempfile::tempdir().unwrap();
    let output = quiver(&[
        "simulate",
        "--env",
        "strategy",
        "--window",
        "10",
        "--gamma",
        "0.95",
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn state_round_trip_preserves_first_step_expectations() {
    // Train, save, reload as a warm prior: the reloaded posterior must
    // reproduce the saved expected rewards on the first step.
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let output = quiver(&[
        "simulate",
        "--env",
        "strategy",
        "--T",
        "60",
        "--seeds",
        "0..1",
        "--save-state",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success());

    let out2 = dir.path().join("warm");
    let output = quiver(&[
        "simulate",
        "--env",
        "strategy",
        "--T",
        "5",
        "--seeds",
        "9,10",
        "--init-state",
        out.join("state_seed0.json").to_str().unwrap(),
        "--out",
        out2.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{output:?}");
    assert!(out2.join("trace_seed9.jsonl").exists());
}
