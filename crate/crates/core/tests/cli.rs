use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn qdctl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qdctl")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const TWO_LEVEL: &str = r#"{
  "N": 2,
  "energies": [0.0, 1.0],
  "dipoles": [{"n": 1, "k": 1, "p": 1, "value": 1.0}, {"n": 1, "k": 1, "p": 2, "value": 0.5}],
  "units": {"coupling": "eV"}
}"#;

const THREE_LEVEL: &str = r#"{
  "N": 3,
  "energies": [0.5, 1.5, 2.5],
  "dipoles": [
    {"n": 1, "k": 1, "p": 1, "value": 2.0},
    {"n": 1, "k": 1, "p": 2, "value": 1.7320508075688772},
    {"n": 2, "k": 1, "p": 1, "value": 1.7320508075688772},
    {"n": 2, "k": 1, "p": 2, "value": 1.4142135623730951},
    {"n": 2, "k": 2, "p": 1, "value": 1.4142135623730951},
    {"n": 2, "k": 2, "p": 2, "value": 1.0}
  ],
  "units": {"coupling": "eV"}
}"#;

#[test]
fn analyze_two_level() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "n2.json", TWO_LEVEL);
    let out = dir.path().join("report.json");
    let o = qdctl(&["analyze", "--spec", &spec, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&out);
    assert_eq!(r["closure"]["dimension"], 4);
    assert_eq!(r["closure"]["controllable"], false);
    for c in r["conditions"].as_array().unwrap() {
        assert_eq!(c["applicable"], false, "{c}");
    }
    assert_eq!(r["consistency"]["sufficiency_violation"], false);
}

#[test]
fn analyze_three_level_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "n3.json", THREE_LEVEL);
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    assert!(qdctl(&["analyze", "--spec", &spec, "--out", a.to_str().unwrap()]).status.success());
    assert!(qdctl(&["analyze", "--spec", &spec, "--out", b.to_str().unwrap(), "--sequential"]).status.success());
    let r = json(&a);
    assert_eq!(r["closure"]["dimension"], 24);
    assert_eq!(r["closure"]["controllable"], true);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(
        dir.path(),
        "bad.json",
        r#"{"N": 2, "energies": [1.0, 0.0], "units": {"coupling": "eV"}}"#,
    );
    assert_eq!(qdctl(&["analyze", "--spec", &bad]).status.code(), Some(2));
    let missing = dir.path().join("nope.json");
    assert_eq!(qdctl(&["analyze", "--spec", missing.to_str().unwrap()]).status.code(), Some(2));
    let garbage = write(dir.path(), "garbage.json", "{not json");
    assert_eq!(qdctl(&["analyze", "--spec", &garbage]).status.code(), Some(2));
    let config = write(dir.path(), "c.json", r#"{"command": "demo", "levels": 3, "extra": 1}"#);
    assert_eq!(qdctl(&["--config", &config]).status.code(), Some(2));
    assert_eq!(qdctl(&["demo", "--levels", "2"]).status.code(), Some(2));
}

#[test]
fn demo_reports_controllable_example() {
    let o = qdctl(&["demo", "--levels", "4"]);
    assert!(o.status.success());
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["report"]["closure"]["dimension"], 48);
    assert_eq!(r["spec"]["N"], 4);
}

#[test]
fn split_reports_zero_splitting() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "n3.json", THREE_LEVEL);
    let o = qdctl(&["split", "--spec", &spec]);
    assert!(o.status.success());
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["pass"], false);
    assert!(r["notes"].to_string().contains("splitting is zero"), "{r}");
}

#[test]
fn fidelity_sweeps() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path().join("curve.csv");
    let o = qdctl(&["fidelity", "--benchmark", "--exact", "--taus", "1e-14,1e-13", "--out", base.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for g in ["1e-23", "1e-22", "1e-21", "1e-20"] {
        let text = fs::read_to_string(dir.path().join(format!("curve_g{g}.csv"))).unwrap();
        assert!(text.contains(&format!("{g} J")));
        let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows[0], "tau,F_pert,F_exact");
        assert_eq!(rows.len(), 3);
        assert!(rows[1].split(',').all(|c| !c.is_empty()));
    }

    let spec = write(
        dir.path(),
        "n2.json",
        r#"{"N": 2, "energies": [0.0, 1.0],
            "excitation_inter": [{"n": 1, "k": 1, "p": 1, "value": 1e-22}],
            "units": {"coupling": "J"}}"#,
    );
    let state = write(dir.path(), "s.json", r#"{"amplitudes": [[0.6, 0.0], [0.0, 0.8], [0.0, 0.0]]}"#);
    let o = qdctl(&["fidelity", "--spec", &spec, "--state", &state, "--taus", "0"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let last = text.lines().last().unwrap();
    assert_eq!(last, "0.0000000000000000e0,1.0000000000000000e0,");
}

#[test]
fn optimize_writes_schedule_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "n3.json", THREE_LEVEL);
    let out = dir.path().join("pulse.csv");
    let o = qdctl(&["optimize", "--spec", &spec, "--seed", "2", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = json(&dir.path().join("pulse.json"));
    assert!(summary["achieved_fidelity"].as_f64().unwrap() >= 0.99);
    let rows = fs::read_to_string(&out).unwrap();
    assert_eq!(rows.lines().filter(|l| !l.starts_with('#')).count(), 41);

    let n2 = write(dir.path(), "n2.json", TWO_LEVEL);
    let out2 = dir.path().join("p2.csv");
    let o = qdctl(&["optimize", "--spec", &n2, "--iters", "20", "--out", out2.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("system not completely controllable"));
    let summary = json(&dir.path().join("p2.json"));
    assert!(summary["warnings"][0].as_str().unwrap().contains("not completely controllable"));
}

#[test]
fn optimize_eigenstate_target_needs_no_field() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "n3.json", THREE_LEVEL);
    let ground = write(dir.path(), "g.json", r#"{"amplitudes": [[1, 0], [0, 0], [0, 0], [0, 0], [0, 0]]}"#);
    let out = dir.path().join("p.csv");
    let o = qdctl(&["optimize", "--spec", &spec, "--target", &ground, "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let summary = json(&dir.path().join("p.json"));
    assert!((summary["achieved_fidelity"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    let text = fs::read_to_string(&out).unwrap();
    for row in text.lines().filter(|l| !l.starts_with('#')).skip(1) {
        assert_eq!(row.split(',').nth(2).unwrap().parse::<f64>().unwrap(), 0.0);
    }
}
