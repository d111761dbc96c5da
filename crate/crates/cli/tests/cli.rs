use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const FIG2_FORMULA: &str = "D[o2](K q | D[o1] K A X q)";

fn dynobs(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dynobs")).args(args).current_dir(dir).output().expect("binary runs")
}

fn with_examples() -> TempDir {
    let dir = TempDir::new().unwrap();
    for name in ["fig1", "fig2", "fig4", "diag"] {
        assert!(dynobs(dir.path(), &["examples", name]).status.success());
    }
    dir
}

fn last_line(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).lines().last().unwrap_or_default().to_string()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn check_exit_codes_follow_the_verdict() {
    let dir = with_examples();
    let out = dynobs(dir.path(), &["check", "--model", "fig2.km", "--formula", FIG2_FORMULA]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(last_line(&out), "HOLDS");

    let out = dynobs(dir.path(), &["check", "--model", "fig4.km", "--formula", "E F D[o2] K p"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(last_line(&out), "FAILS");
}

#[test]
fn both_engines_agree_on_the_sensor_model() {
    let dir = with_examples();
    for engine in ["direct", "reduction"] {
        let full = dynobs(dir.path(), &["check", "--model", "diag.km", "--formula", "@diag_full.ctl", "--engine", engine]);
        assert_eq!(full.status.code(), Some(0), "{engine}");
        let degraded =
            dynobs(dir.path(), &["check", "--model", "diag.km", "--formula", "@diag_degraded.ctl", "--engine", engine]);
        assert_eq!(degraded.status.code(), Some(1), "{engine}");
    }
}

#[test]
fn compare_reports_agreement() {
    let dir = with_examples();
    let out = dynobs(dir.path(), &["compare", "--model", "fig1.km", "--formula", "D[o1] E F D[o2] K p", "--bound", "4"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(last_line(&out), "HOLDS all-agree");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("direct") && stdout.contains("reduction") && stdout.contains("oracle@4"));
}

#[test]
fn oracle_is_three_valued() {
    let dir = with_examples();
    let out = dynobs(dir.path(), &["oracle", "--model", "fig2.km", "--formula", "q", "--bound", "0"]);
    assert_eq!((out.status.code(), last_line(&out).as_str()), (Some(0), "HOLDS"));
    let out = dynobs(dir.path(), &["oracle", "--model", "fig2.km", "--formula", "A G q", "--bound", "4"]);
    assert_eq!((out.status.code(), last_line(&out).as_str()), (Some(1), "FAILS"));
    let out = dynobs(dir.path(), &["oracle", "--model", "fig2.km", "--formula", "E G (q | !q)", "--bound", "2"]);
    assert_eq!((out.status.code(), last_line(&out).as_str()), (Some(2), "UNKNOWN"));
}

#[test]
fn errors_exit_3_with_a_code() {
    let dir = with_examples();
    fs::write(dir.path().join("bad.km"), "observations: o ; states: s ; init: s ; initobs: o ; trans: ;").unwrap();
    let out = dynobs(dir.path(), &["validate", "--model", "bad.km"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).starts_with("V_NOT_LEFT_TOTAL:"), "{}", stderr(&out));

    let out = dynobs(dir.path(), &["validate", "--model", "fig1.km"]);
    assert_eq!(out.status.code(), Some(0));

    let out = dynobs(dir.path(), &["check", "--model", "fig1.km", "--formula", "K ("]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).starts_with("E_FORMULA_SYNTAX:"));

    let out = dynobs(dir.path(), &["check", "--model", "fig1.km", "--formula", "K zz"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).starts_with("E_FORMULA_UNKNOWN:"));

    let out = dynobs(dir.path(), &["check", "--model", "missing.km", "--formula", "p"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).starts_with("E_IO:"));

    let out = dynobs(dir.path(), &["check", "--model", "fig2.km", "--formula", FIG2_FORMULA, "--budget", "2"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).starts_with("E_BUDGET:"), "{}", stderr(&out));

    let out = dynobs(dir.path(), &["frobnicate"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn budget_can_come_from_the_environment() {
    let dir = with_examples();
    let out = Command::new(env!("CARGO_BIN_EXE_dynobs"))
        .args(["check", "--model", "fig2.km", "--formula", FIG2_FORMULA])
        .env("DYNOBS_BUDGET", "3")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).starts_with("E_BUDGET:"));
}

#[test]
fn report_matches_golden_file() {
    let dir = with_examples();
    let out = dynobs(
        dir.path(),
        &["check", "--model", "fig2.km", "--formula", FIG2_FORMULA, "--report", "r.json", "--dump-augmented", "a.dot"],
    );
    assert!(out.status.success());
    let mut got: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    for v in got["timing"].as_object_mut().unwrap().values_mut() {
        *v = serde_json::json!(0);
    }
    let golden: serde_json::Value = serde_json::from_str(include_str!("golden/fig2_report.json")).unwrap();
    assert_eq!(got, golden);

    let dot = fs::read_to_string(dir.path().join("a.dot")).unwrap();
    assert!(dot.starts_with("digraph augmented {"));
    assert_eq!(dot.matches("subgraph cluster").count(), 2);
}

#[test]
fn reduction_round_trips_through_files() {
    let dir = with_examples();
    let out = dynobs(
        dir.path(),
        &["reduce", "--model", "fig2.km", "--formula", FIG2_FORMULA, "--out-model", "r.km", "--out-formula", "r.ctl"],
    );
    assert!(out.status.success());
    let formula = fs::read_to_string(dir.path().join("r.ctl")).unwrap();
    assert!(!formula.contains("D["));
    let out = dynobs(dir.path(), &["check", "--model", "r.km", "--formula", "@r.ctl"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(last_line(&out), "HOLDS");
}

#[test]
fn examples_write_their_files() {
    let dir = TempDir::new().unwrap();
    let out = dynobs(dir.path(), &["examples", "diag"]);
    assert!(out.status.success());
    for f in ["diag.km", "diag_full.ctl", "diag_degraded.ctl"] {
        assert!(dir.path().join(f).exists());
    }
    assert_eq!(dynobs(dir.path(), &["examples", "nope"]).status.code(), Some(3));
}
