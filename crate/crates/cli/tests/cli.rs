//! End-to-end checks of the command-line interface: golden flows across
//! commands, byte determinism of stdout, output schemas, and exit codes.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_btt-codes"))
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("btt-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = bin().args(args).output().expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn run_ok(args: &[&str]) -> (String, String) {
    let (code, stdout, stderr) = run(args);
    assert_eq!(code, 0, "command {args:?} failed: {stderr}");
    (stdout, stderr)
}

#[test]
fn witness_chain_across_commands() {
    let inner = tmp("inner.json");
    let outer = tmp("outer.json");
    run_ok(&[
        "evasive", "--mode", "search", "--q", "11", "--k", "2", "--m", "4", "--r", "1",
        "--eps", "0.5", "--seed", "4", "--out", inner.to_str().unwrap(),
    ]);
    run_ok(&[
        "design", "--q", "11", "--m", "8", "--t", "4", "--r", "4", "--periodic", "2",
        "--out", outer.to_str().unwrap(),
    ]);
    let (stdout, _) = run_ok(&[
        "evasive", "--mode", "compose", "--inner", inner.to_str().unwrap(), "--outer",
        outer.to_str().unwrap(),
    ]);
    let w: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(w["k"], 4);
    assert_eq!(w["m"], 4);
    assert_eq!(w["r"], 1);
    assert_eq!(w["kind"], "btt");
    assert_eq!(w["verified"], "sampled:2000");
    let inner_w: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&inner).unwrap()).unwrap();
    assert_eq!(inner_w["codim"], 4);
}

#[test]
fn encode_then_decode_recovers_the_message() {
    let (cw, _) = run_ok(&[
        "encode", "--field", "5:2", "--n", "4", "--k", "2", "--message", "[[1,2],[3,0]]",
    ]);
    let (stdout, stderr) = run_ok(&[
        "decode", "--field", "5:2", "--n", "4", "--k", "2", "--s", "2", "--d", "1", "--t",
        "3", "--word", cw.trim(),
    ]);
    let list: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(list["empty"], false);
    assert_eq!(list["messages"], serde_json::json!([[[1, 2], [3, 0]]]));
    assert!(stderr.contains("timings:"), "phase timings belong on stderr");
}

#[test]
fn experiment_stdout_is_byte_deterministic() {
    let args = [
        "experiment", "--field", "2^4:4", "--n", "12", "--k", "3", "--eps", "0.5",
        "--errors", "7", "--trials", "8", "--seed", "20260823", "--strict",
    ];
    let (a, stderr_a) = run_ok(&args);
    let (b, _) = run_ok(&args);
    assert_eq!(a, b, "two runs with one seed must agree byte for byte");
    assert_eq!(a.lines().count(), 8);
    for line in a.lines() {
        let rec: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(rec["success"], true);
        assert_eq!(rec["errors"], 7);
    }
    assert!(stderr_a.contains("success_rate=1.000"), "summary: {stderr_a}");
}

#[test]
fn experiment_csv_has_the_stable_header() {
    let (stdout, _) = run_ok(&[
        "experiment", "--field", "5:2", "--n", "4", "--k", "2", "--s", "2", "--d", "1",
        "--t", "3", "--errors", "0..1", "--trials", "4", "--seed", "5", "--format", "csv",
    ]);
    let mut lines = stdout.lines();
    assert_eq!(
        lines.next().unwrap(),
        "trial,errors,list_size,list_dim,success,interpolate_ms,system_ms,prune_ms"
    );
    assert_eq!(lines.count(), 4);
    // Error weights cycle through the range.
    assert!(stdout.contains("\n1,1,"));
}

#[test]
fn experiment_timings_are_opt_in() {
    let plain = run_ok(&[
        "experiment", "--field", "5:2", "--n", "4", "--k", "2", "--s", "2", "--d", "1",
        "--t", "3", "--errors", "1", "--trials", "2", "--seed", "5",
    ])
    .0;
    assert!(!plain.contains("interpolate_ms"));
    let timed = run_ok(&[
        "experiment", "--field", "5:2", "--n", "4", "--k", "2", "--s", "2", "--d", "1",
        "--t", "3", "--errors", "1", "--trials", "2", "--seed", "5", "--timings",
    ])
    .0;
    assert!(timed.contains("interpolate_ms"));
}

#[test]
fn witness_file_feeds_a_restricted_experiment() {
    let witness = tmp("restrict.json");
    run_ok(&[
        "evasive", "--mode", "search", "--q", "2^4", "--k", "2", "--m", "4", "--r", "1",
        "--eps", "0.5", "--seed", "6", "--out", witness.to_str().unwrap(),
    ]);
    let (stdout, stderr) = run_ok(&[
        "experiment", "--field", "2^4:4", "--n", "12", "--k", "2", "--s", "2", "--d", "3",
        "--t", "5", "--errors", "0..4", "--trials", "10", "--seed", "1", "--witness",
        "file", "--witness-file", witness.to_str().unwrap(), "--strict",
    ]);
    assert_eq!(stdout.lines().count(), 10);
    assert!(stderr.contains("within_radius_rate=1.000"));
}

#[test]
fn searched_and_design_witness_sources_work_inline() {
    let (stdout, _) = run_ok(&[
        "experiment", "--field", "2^4:4", "--n", "12", "--k", "2", "--s", "2", "--d", "3",
        "--t", "5", "--errors", "3", "--trials", "3", "--seed", "2", "--witness", "search",
        "--strict",
    ]);
    assert_eq!(stdout.lines().count(), 3);
    let (stdout, _) = run_ok(&[
        "experiment", "--field", "5:2", "--n", "4", "--k", "2", "--s", "2", "--d", "1",
        "--t", "3", "--errors", "1", "--trials", "3", "--seed", "2", "--witness", "design",
        "--design-t", "1", "--strict",
    ]);
    assert_eq!(stdout.lines().count(), 3);
}

#[test]
fn search_output_is_deterministic_and_design_output_is_stable() {
    let args = [
        "evasive", "--mode", "search", "--q", "2", "--k", "2", "--m", "4", "--r", "1",
        "--eps", "0.5", "--seed", "7",
    ];
    assert_eq!(run_ok(&args).0, run_ok(&args).0);
    let dargs = ["design", "--q", "7", "--m", "4", "--t", "3", "--r", "2", "--verify"];
    let (a, stderr) = run_ok(&dargs);
    assert_eq!(a, run_ok(&dargs).0);
    assert!(stderr.contains("candidates=3251"));
}

#[test]
fn usage_errors_exit_with_code_two() {
    // Missing decode parameters.
    let (code, _, _) = run(&["decode", "--field", "5:2", "--n", "4", "--k", "2", "--word", "[[0,0]]"]);
    assert_eq!(code, 2);
    // Unparsable field spec.
    let (code, _, _) = run(&[
        "experiment", "--field", "nope", "--n", "4", "--k", "2", "--eps", "0.5",
        "--errors", "1", "--trials", "1",
    ]);
    assert_eq!(code, 2);
    // Compose without inputs.
    let (code, _, _) = run(&["evasive", "--mode", "compose"]);
    assert_eq!(code, 2);
    // Unknown flag is a clap-level usage error.
    let (code, _, _) = run(&["design", "--q", "7", "--m", "4", "--t", "3", "--r", "2", "--frob"]);
    assert_eq!(code, 2);
    // Word of the wrong length.
    let (code, _, _) = run(&[
        "decode", "--field", "5:2", "--n", "4", "--k", "2", "--s", "2", "--d", "1", "--t",
        "3", "--word", "[[0,0]]",
    ]);
    assert_eq!(code, 2);
}

#[test]
fn contract_failures_exit_with_code_one() {
    // Search budget too small for a single verification pass.
    let (code, _, stderr) = run(&[
        "evasive", "--mode", "search", "--q", "2", "--k", "2", "--m", "4", "--r", "1",
        "--eps", "0.5", "--budget", "10",
    ]);
    assert_eq!(code, 1, "stderr: {stderr}");
    assert!(stderr.contains("budget"));
    // Evasiveness precondition violated.
    let (code, _, _) = run(&[
        "evasive", "--mode", "search", "--q", "2", "--k", "2", "--m", "4", "--r", "3",
        "--eps", "0.5",
    ]);
    assert_eq!(code, 1);
}
