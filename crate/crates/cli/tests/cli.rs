use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn sbmsm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sbmsm")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}\n{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr))
    })
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const VALID: &str = r#"{
    "kind": "tabular", "T": 1, "B": 1, "items": ["a", "b"],
    "lambda": 0.5, "capital_lambda": 2.0,
    "rounds": [{"states": [{"prob": 0.5, "local": [0, 0]}, {"prob": 0.5, "local": [1, 0]}],
                "f": {"1@0": 1, "1@1": 2, "2@0": 0.5, "2@1": 0.5, "3@0": 1.5, "3@1": 2.5}}]
}"#;

/// Item `a` reveals which of two states holds and is worth nothing; item `b`
/// is worth 1 in state 1 only.
const NOT_ADAPTIVE_SUBMODULAR: &str = r#"{
    "kind": "tabular", "T": 1, "B": 1, "items": ["a", "b"],
    "lambda": 0.5, "capital_lambda": 1.0,
    "rounds": [{"states": [{"prob": 0.5, "local": [0, 0]}, {"prob": 0.5, "local": [1, 0]}],
                "f": {"1@0": 0, "1@1": 0, "2@0": 0, "2@1": 1, "3@0": 0, "3@1": 1}}]
}"#;

#[test]
fn validate_accepts_a_well_formed_file() {
    let dir = TempDir::new().unwrap();
    let out = sbmsm(&["validate", s(&write(&dir, "ok.json", VALID))]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out)["valid"], true);
}

#[test]
fn validate_names_the_round_with_bad_probabilities() {
    let dir = TempDir::new().unwrap();
    let bad = VALID.replace("\"prob\": 0.5, \"local\": [1, 0]", "\"prob\": 0.4, \"local\": [1, 0]");
    let out = sbmsm(&["validate", s(&write(&dir, "bad.json", &bad))]);
    assert_eq!(code(&out), 1);
    let report = json(&out);
    assert_eq!(report["valid"], false);
    assert!(report["error"].as_str().unwrap().contains("round 1"));
}

#[test]
fn validate_names_the_non_monotone_pair() {
    let dir = TempDir::new().unwrap();
    let bad = VALID.replace("\"3@1\": 2.5", "\"3@1\": 1.0");
    let out = sbmsm(&["validate", s(&write(&dir, "bad.json", &bad))]);
    assert_eq!(code(&out), 1);
    let msg = json(&out)["error"].as_str().unwrap().to_string();
    assert!(msg.contains("not monotone") && msg.contains("state 1"), "{msg}");
}

#[test]
fn exact_solves_the_one_round_value_instance() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("r1.json");
    assert_eq!(code(&sbmsm(&["gen", "remark1", "--T", "5", "-o", s(&path)])), 0);
    let out = sbmsm(&["exact", s(&path)]);
    assert_eq!(code(&out), 0);
    let report = json(&out);
    assert_eq!(report["optimum"], 5.0);
    assert_eq!(report["round_usage"], serde_json::json!([0.0, 0.0, 0.0, 0.0, 5.0]));
    assert_eq!(report["params"]["seed"], 42);
}

#[test]
fn exact_single_round() {
    let dir = TempDir::new().unwrap();
    let out = sbmsm(&["exact", s(&write(&dir, "ok.json", VALID))]);
    assert_eq!(code(&out), 0);
    // Select a, then stop: 0.5 * 1 + 0.5 * 2.
    assert_eq!(json(&out)["optimum"], 1.5);
}

#[test]
fn exact_refuses_oversized_instances() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("r1.json");
    sbmsm(&["gen", "remark1", "--T", "10", "-o", s(&path)]);
    assert_eq!(code(&sbmsm(&["exact", s(&path)])), 3);
    let out = sbmsm(&["exact", s(&path), "--max-items", "10"]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out)["optimum"], 10.0);
}

#[test]
fn greedy_exact_mode_collects_everything() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("r1.json");
    sbmsm(&["gen", "remark1", "--T", "5", "-o", s(&path)]);
    let out = sbmsm(&["greedy", s(&path), "--exact", "--rollouts", "50"]);
    assert_eq!(code(&out), 0);
    let report = json(&out);
    assert_eq!(report["estimate"]["mean"], 5.0);
    assert_eq!(report["budget"], serde_json::json!([0, 0, 0, 0, 5]));
}

#[test]
fn greedy_echoes_epsilon_and_its_accuracy() {
    let dir = TempDir::new().unwrap();
    let path = write(&dir, "ok.json", VALID);
    let out = sbmsm(&["greedy", s(&path), "--epsilon", "0.5", "--q1", "200", "--q2", "50", "--rollouts", "20"]);
    assert_eq!(code(&out), 0);
    let oracle = &json(&out)["params"]["oracle"];
    assert_eq!(oracle["epsilon"], 0.5);
    assert_eq!(oracle["c"], 1.0);
    // 0.5 * 1 * 0.5 / (1 * (4 + 3 * 2))
    let expected = 0.025;
    assert!((oracle["delta"].as_f64().unwrap() - expected).abs() < 1e-15);
    assert!((oracle["xi"].as_f64().unwrap() - expected).abs() < 1e-15);
    assert_eq!(oracle["q1"], 200);
}

#[test]
fn same_seed_gives_identical_bytes() {
    let dir = TempDir::new().unwrap();
    let inst = dir.path().join("rand.json");
    sbmsm(&["gen", "random", "--family", "correlated-coverage", "--seed", "7", "-o", s(&inst)]);
    let run = |seed: &str| {
        sbmsm(&[
            "eval",
            s(&inst),
            "--delta",
            "0.2",
            "--xi",
            "0.2",
            "--q1",
            "300",
            "--rollouts",
            "200",
            "--seed",
            seed,
            "--workers",
            "2",
        ])
    };
    let (a, b, c) = (run("5"), run("5"), run("6"));
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
    let gap = || sbmsm(&["gap", "--T", "4,16", "--rollouts", "2000"]).stdout;
    assert_eq!(gap(), gap());
}

#[test]
fn gap_report_and_csv() {
    let out = sbmsm(&["gap", "--T", "4", "--rollouts", "1000"]);
    assert_eq!(code(&out), 0);
    let report = json(&out);
    assert_eq!(report["reports"][0]["sigma_partial_closed_form"], 3.0);
    assert!((report["limit"].as_f64().unwrap() - 1.5820).abs() < 1e-4);
    let csv = sbmsm(&["gap", "--T", "4,9", "--rollouts", "500", "--csv"]);
    let text = String::from_utf8(csv.stdout).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.lines().nth(1).unwrap().starts_with("T,"));
}

#[test]
fn gap_rejects_non_squares() {
    assert_eq!(code(&sbmsm(&["gap", "--T", "5"])), 2);
}

#[test]
fn check_passes_on_probing_instances() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("r3.json");
    sbmsm(&["gen", "remark3", "--n", "3", "-o", s(&path)]);
    let out = sbmsm(&["check", s(&path), "--property", "submodularity"]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out)["pass"], true);
}

#[test]
fn check_oracle_equivalence_in_guard() {
    let dir = TempDir::new().unwrap();
    let out = sbmsm(&["check", s(&write(&dir, "ok.json", VALID)), "--property", "oracle-equivalence"]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out)["details"]["difference"], 0.0);
}

#[test]
fn check_reports_a_witness_on_failure() {
    let dir = TempDir::new().unwrap();
    let out = sbmsm(&["check", s(&write(&dir, "bad.json", NOT_ADAPTIVE_SUBMODULAR)), "--property", "submodularity"]);
    assert_eq!(code(&out), 1);
    let report = json(&out);
    assert_eq!(report["pass"], false);
    assert_eq!(report["details"]["witness"]["item"], 1);
}

#[test]
fn influence_from_edge_list() {
    let dir = TempDir::new().unwrap();
    let edges = write(&dir, "g.txt", "# u v p\n0 1 0.5\n1 2 0.5\n0 2 0.2\n");
    let path = dir.path().join("infl.json");
    let out = sbmsm(&["gen", "influence", "--edge-list", s(&edges), "--T", "2", "--B", "2", "-o", s(&path)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(code(&sbmsm(&["validate", s(&path)])), 0);
    // Exact oracles need exact conditioning.
    assert_eq!(code(&sbmsm(&["greedy", s(&path), "--exact"])), 2);
    let out = sbmsm(&["greedy", s(&path), "--delta", "0.2", "--xi", "0.2", "--q1", "100", "--rollouts", "50"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&out)["budget"].as_array().unwrap().len(), 2);
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(code(&sbmsm(&["greedy"])), 2);
    assert_eq!(code(&sbmsm(&["gap", "--rollouts", "0"])), 2);
    assert_eq!(code(&sbmsm(&["validate", "/nonexistent/file.json"])), 2);
}
