use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use majorize::channel::KrausChannel;
use majorize::state::{trace_distance, DensityMatrix};
use serde_json::Value;
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_majorize"))
        .args(args)
        .output()
        .unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

const HALF: &str =
    r#"{"kind":"density","d_rows":2,"d_cols":2,"rows":[[[0.5,0],[0,0]],[[0,0],[0.5,0]]]}"#;
const PURE: &str =
    r#"{"kind":"density","d_rows":2,"d_cols":2,"rows":[[[1,0],[0,0]],[[0,0],[0,0]]]}"#;

#[test]
fn entropy_of_fair_coin() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "p.json", r#"{"entries":[0.5,0.5]}"#);
    let out = run(&["entropy", "--in", s(&p)]);
    assert!(out.status.success());
    let report = json(&out);
    assert_eq!(report["shannon_bits"], 1.0);
    assert_eq!(report["version"], majorize::VERSION);
    assert!(report["tolerances"].is_object());
    assert_eq!(report["verified"]["passed"], true);
}

#[test]
fn majorize_require_turns_negative_into_exit_one() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "a.json", r#"{"entries":[0.6,0.4]}"#);
    let b = write(&dir, "b.json", r#"{"entries":[0.5,0.5]}"#);
    let out = run(&["majorize", "--in", s(&a), "--in", s(&b)]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&out);
    assert_eq!(report["holds"], false);
    assert_eq!(report["first_violation"]["k"], 1);
    assert_eq!(report["first_violation"]["lhs"], 0.6);
    assert_eq!(report["first_violation"]["rhs"], 0.5);

    let out = run(&["majorize", "--in", s(&a), "--in", s(&b), "--require"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["majorize", "--in", s(&b), "--in", s(&a), "--require"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn uhlmann_channel_reproduces_target() {
    let dir = TempDir::new().unwrap();
    let rho1 = write(&dir, "rho1.json", HALF);
    let rho2 = write(&dir, "rho2.json", PURE);
    let report_path = dir.path().join("psi.json");
    let out = run(&[
        "uhlmann",
        "--in",
        s(&rho1),
        "--in",
        s(&rho2),
        "--out",
        s(&report_path),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: Value = serde_json::from_str(&fs::read_to_string(&report_path).unwrap()).unwrap();
    assert!(report["verified"]["trace_distance"].as_f64().unwrap() <= 1e-7);

    let psi: KrausChannel = serde_json::from_value(report["channel"].clone()).unwrap();
    let source: DensityMatrix = serde_json::from_str(PURE).unwrap();
    let target: DensityMatrix = serde_json::from_str(HALF).unwrap();
    assert!(trace_distance(&psi.apply(&source).unwrap(), &target).unwrap() <= 1e-7);

    // The reverse direction is not a majorization: domain error.
    let out = run(&["uhlmann", "--in", s(&rho2), "--in", s(&rho1)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn malformed_json_exits_two_with_location() {
    let dir = TempDir::new().unwrap();
    let bad = write(&dir, "bad.json", "{\"entries\": [0.5,\n  oops]}");
    let out = run(&["entropy", "--in", s(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.json") && err.contains("line 2"), "{err}");

    let out = run(&["entropy", "--in", s(&dir.path().join("missing.json"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn schema_errors_name_the_field() {
    let dir = TempDir::new().unwrap();
    let not_hermitian = write(
        &dir,
        "nh.json",
        r#"{"kind":"density","d_rows":2,"d_cols":2,"rows":[[[0.5,0],[0.3,0]],[[0,0],[0.5,0]]]}"#,
    );
    let out = run(&["entropy", "--in", s(&not_hermitian)]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("(0,1) and (1,0)"), "{err}");

    let pair = write(
        &dir,
        "pair.json",
        r#"{"a":{"entries":[0.5,"x"]},"b":{"entries":[1.0]}}"#,
    );
    let out = run(&["majorize", "--in", s(&pair)]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("a.entries[1]"), "{err}");

    let channel = write(
        &dir,
        "k.json",
        r#"{"d_in":1,"d_out":1,"kraus":[{"d_rows":1,"d_cols":1,"rows":[[[1,0]]]}],"flags":{"trace_preserving":"yes","unital":true}}"#,
    );
    let out = run(&["detect-isometry", "--in", s(&channel)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("flags.trace_preserving"));
}

#[test]
fn runs_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let channel = dir.path().join("c.json");
    for _ in 0..2 {
        assert!(run(&[
            "gen",
            "--kind",
            "mixed-unitary-channel",
            "--d",
            "3",
            "--seed",
            "9",
            "--out",
            s(&channel)
        ])
        .status
        .success());
    }
    let first = run(&[
        "probe-entropy",
        "--in",
        s(&channel),
        "--trials",
        "50",
        "--seed",
        "4",
    ]);
    let second = run(&[
        "probe-entropy",
        "--in",
        s(&channel),
        "--trials",
        "50",
        "--seed",
        "4",
    ]);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);

    let a = run(&["gen", "--kind", "state-pair", "--d", "4"]);
    let b = run(&["gen", "--kind", "state-pair", "--d", "4", "--seed", "0"]);
    assert_eq!(a.stdout, b.stdout);
    let c = run(&["gen", "--kind", "state-pair", "--d", "4", "--seed", "1"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn generated_state_round_trips() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("rho.json");
    assert!(run(&[
        "gen",
        "--kind",
        "state",
        "--d",
        "5",
        "--seed",
        "2",
        "--out",
        s(&path)
    ])
    .status
    .success());
    let rho: DensityMatrix = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    let again = dir.path().join("again.json");
    fs::write(&again, serde_json::to_string(&rho).unwrap()).unwrap();
    let back: DensityMatrix = serde_json::from_str(&fs::read_to_string(&again).unwrap()).unwrap();
    assert_eq!(back.matrix(), rho.matrix());
}

#[test]
fn detector_verdicts_and_expectation() {
    let dir = TempDir::new().unwrap();
    let positive = dir.path().join("pos.json");
    let negative = dir.path().join("neg.json");
    run(&[
        "gen",
        "--kind",
        "isometric-channel",
        "--d",
        "3",
        "--d-out",
        "5",
        "--terms",
        "2",
        "--out",
        s(&positive),
    ]);
    run(&[
        "gen",
        "--kind",
        "dephasing-channel",
        "--d",
        "3",
        "--out",
        s(&negative),
    ]);

    let out = run(&["detect-isometry", "--in", s(&positive), "--expect-isometry"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["is_isometric_conjugation"], true);

    let out = run(&["detect-isometry", "--in", s(&negative)]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&out);
    assert_eq!(report["is_isometric_conjugation"], false);
    assert!(report["failure_witness"]["check"].is_string());
    let out = run(&["detect-isometry", "--in", s(&negative), "--expect-isometry"]);
    assert_eq!(out.status.code(), Some(1));

    let out = run(&["probe-entropy", "--in", s(&positive), "--trials", "100"]);
    assert!(json(&out)["max_deviation"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn transfer_pipeline() {
    let dir = TempDir::new().unwrap();
    let pair = dir.path().join("pair.json");
    let q = dir.path().join("q.json");
    run(&[
        "gen",
        "--kind",
        "pair",
        "--d",
        "6",
        "--seed",
        "5",
        "--out",
        s(&pair),
    ]);
    for cmd in ["transfer", "schur-horn"] {
        let out = run(&[cmd, "--in", s(&pair)]);
        assert!(
            out.status.success(),
            "{cmd}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert_eq!(json(&out)["verified"]["passed"], true);
    }
    let states = dir.path().join("states.json");
    run(&[
        "gen",
        "--kind",
        "state-pair",
        "--d",
        "4",
        "--out",
        s(&states),
    ]);
    let out = run(&["mixed-unitary", "--in", s(&states)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = json(&out);
    assert_eq!(report["verified"]["passed"], true);
    let total: f64 = report["terms"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| t["weight"].as_f64().unwrap())
        .sum();
    assert!((total - 1.0).abs() <= 1e-9);
    run(&[
        "gen",
        "--kind",
        "doubly-stochastic",
        "--d",
        "6",
        "--out",
        s(&q),
    ]);
    let out = run(&["birkhoff", "--in", s(&q)]);
    assert!(out.status.success());
    let report = json(&out);
    assert!(report["terms"].as_array().unwrap().len() <= 26);
    assert_eq!(report["verified"]["passed"], true);
}

#[test]
fn pinch_table_is_csv_with_sidecar() {
    let dir = TempDir::new().unwrap();
    let state = dir.path().join("rho.json");
    let table = dir.path().join("table.csv");
    run(&["gen", "--kind", "state", "--d", "6", "--out", s(&state)]);
    let out = run(&["pinch-converge", "--in", s(&state), "--out", s(&table)]);
    assert!(out.status.success());
    let csv = fs::read_to_string(&table).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("n,trace_distance,bound"));
    assert_eq!(lines.count(), 6);
    let meta: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("table.csv.meta.json")).unwrap())
            .unwrap();
    assert_eq!(meta["verified"]["passed"], true);

    let out = run(&["pinch-converge", "--in", s(&state)]);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("n,trace_distance,bound\n"));
    assert!(String::from_utf8_lossy(&out.stderr).contains("\"verified\""));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(run(&["entropy"]).status.code(), Some(2));
}
