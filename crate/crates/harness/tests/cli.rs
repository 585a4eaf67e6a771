use std::path::PathBuf;
use std::process::{Command, Output};

use mitigator_core::simulator::default_params;
use mitigator_harness::scenario::{load_params, load_scenarios};

fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mitigator"))
        .args(args)
        .env("MITIGATOR_NO_COLOR", "1")
        .output()
        .unwrap()
}

fn path(rel: &str) -> String {
    dir().join(rel).to_string_lossy().into_owned()
}

#[test]
fn shipped_params_match_builtin() {
    assert_eq!(load_params(&path("params/default.json")).unwrap(), default_params());
    for name in ["always_effective", "never_effective"] {
        load_params(&path(&format!("params/{name}.json"))).unwrap();
    }
}

#[test]
fn shipped_scenarios_load() {
    for kw in ["complex", "contradictory", "insufficient", "false_feedback"] {
        let specs = load_scenarios(&path(&format!("scenarios/{kw}.json"))).unwrap();
        assert_eq!(specs.len(), 1);
        assert_eq!(specs[0].name, kw);
        assert_eq!(specs[0].params, default_params());
        assert_eq!(specs[0].induction.keyword(), kw);
    }
    assert_eq!(load_scenarios("builtin").unwrap().len(), 4);
    assert!(load_scenarios("builtin:nonsense").is_err());
}

#[test]
fn scenario_files_match_builtin_scenarios() {
    let from_files = run(&[
        "run",
        "--scenario",
        &path("scenarios/complex.json"),
        "--trials",
        "50",
        "--seed",
        "5",
    ]);
    let builtin = run(&["run", "--scenario", "builtin:complex", "--trials", "50", "--seed", "5"]);
    assert!(from_files.status.success());
    assert_eq!(from_files.stdout, builtin.stdout);
}

#[test]
fn validate_exit_codes() {
    let ok = run(&[
        "validate",
        "--policy",
        &dir().join("../core/policies/default.cmp").to_string_lossy(),
    ]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));

    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.cmp");
    std::fs::write(&bad, "name: x\nversion: 1\n[general]\nstep 1: Restatment\n").unwrap();
    let out = run(&["validate", "--policy", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 4"));

    let missing = run(&["validate", "--policy", "/nonexistent/policy.cmp"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn run_rejects_bad_input() {
    assert_eq!(
        run(&["run", "--scenario", "builtin", "--trials", "0"]).status.code(),
        Some(2)
    );
    assert_eq!(
        run(&["run", "--scenario", "builtin", "--scenario", "builtin:complex"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(run(&["run", "--scenario", "/nonexistent.json"]).status.code(), Some(2));
}

#[test]
fn analyze_jsonl_lines() {
    let out = run(&["analyze", "--format", "jsonl", "--induction", "complex"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let v: serde_json::Value = serde_json::from_str(text.trim()).unwrap();
    assert_eq!(v["induction"], "complex_information");
    assert!(v["p_resolved"].as_f64().unwrap() > 0.9);
    let f32_out = run(&["analyze", "--precision", "f32", "--induction", "complex"]);
    assert!(f32_out.status.success());
}

#[test]
fn replay_flags_tampered_logs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let r = run(&[
        "run",
        "--scenario",
        "builtin:insufficient",
        "--trials",
        "3",
        "--seed",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(r.status.success());
    let log = out.join("logs/insufficient/trial-000001.jsonl");
    assert_eq!(run(&["replay", "--log", log.to_str().unwrap()]).status.code(), Some(0));

    let text = std::fs::read_to_string(&log).unwrap();
    let tampered = text.replacen("\"step_index\":0", "\"step_index\":1", 1);
    assert_ne!(text, tampered);
    std::fs::write(&log, tampered).unwrap();
    let bad = run(&["replay", "--log", out.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&bad.stdout);
    assert!(stdout.contains("trial-000001.jsonl: FAILED"), "{stdout}");
    assert!(stdout.contains("trial-000000.jsonl: ok"), "{stdout}");
}

#[test]
fn wall_clock_runs_use_random_ids() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let r = run(&[
        "run",
        "--scenario",
        "builtin:complex",
        "--trials",
        "2",
        "--out",
        out.to_str().unwrap(),
        "--wall-clock",
    ]);
    assert!(r.status.success());
    let log = std::fs::read_to_string(out.join("logs/complex/trial-000000.jsonl")).unwrap();
    assert!(!log.contains("\"complex-000000\""));
    assert_eq!(run(&["replay", "--log", out.to_str().unwrap()]).status.code(), Some(0));
}
