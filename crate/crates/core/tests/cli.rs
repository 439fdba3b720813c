use std::fs;
use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn run(args: &[&str], config: &str, out: &Path) -> i32 {
    let dir = out.parent().unwrap();
    let cfg = dir.join(format!("{}.json", out.file_name().unwrap().to_string_lossy()));
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_diagstrip"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
        .status
        .code()
        .unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const LINEAR: &str = r#"{"epsilon": 1.0, "f_plus": [2.0, 1.0], "f_minus": [0.0, 1.0], "window": [-4.0, 4.0]}"#;
const QUADRATIC: &str = r#"{"epsilon": 0.25, "f_plus": [0.0, 0.0, 1.0], "f_minus": [0.0, 2.0],
  "grid": {"h": 0.015625, "x1_min": -1.0, "x1_max": 3.0}, "inner_window": [0.0, 2.0],
  "tolerances": {"compare_bound": 0.004}}"#;
const WIDE_FISSURE: &str = r#"{"epsilon": 10.0, "f_plus": [0.0, 0.0, 1.0, 1.0], "f_minus": [0.0, 0.0, 0.0, 1.0], "window": [-1.0, 1.0]}"#;
const SW: &str = r#"{"epsilon": 0.1, "f_plus": [0.0, 0.0, 1.0, 1.0], "f_minus": [0.0, 0.0, 0.0, 1.0], "window": [-1.0, 1.0],
  "report": {"points": [[0.0, 0.05], [0.5, 0.0]], "n_points": 200}}"#;

#[test]
fn candidate_writes_surface_and_plan() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("lin");
    assert_eq!(run(&["candidate"], LINEAR, &out), 0);
    let csv = fs::read_to_string(out.join("surface.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("x1,x2,B"));
    let row: Vec<f64> = csv.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!((row[2] - (row[0] + row[1] + 1.0)).abs() < 1e-12);
    let plan = json(&out.join("plan.json"));
    assert_eq!(plan["plan"][0]["evaluator"], "LINEAR_PATCH");
    assert!(plan["defaults"]["concavity_tol"].is_number());
}

#[test]
fn compare_reports_difference_within_bound() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("quad");
    assert_eq!(run(&["compare"], QUADRATIC, &out), 0);
    let c = json(&out.join("compare.json"));
    assert!(c["max_abs_diff"].as_f64().unwrap() < 0.004);
    assert_eq!(c["within_bound"], true);
}

#[test]
fn wide_fissure_fails_with_named_invariant() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("wide");
    assert_eq!(run(&["fissure"], WIDE_FISSURE, &out), 2);
    let d = json(&out.join("diagnostic.json"));
    assert_eq!(d["error"], "fissure-build-failure");
    assert!(d["invariant"].as_str().is_some_and(|s| !s.is_empty()));
}

#[test]
fn validation_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run(&["bogus"], LINEAR, &tmp.path().join("a")), 1);
    assert_eq!(run(&["oracle"], LINEAR, &tmp.path().join("b")), 1);
    let bad_h = r#"{"epsilon": 1.0, "f_plus": [2.0, 1.0], "f_minus": [0.0, 1.0], "grid": {"h": 0.3, "x1_min": -3.0, "x1_max": 3.0}}"#;
    assert_eq!(run(&["oracle"], bad_h, &tmp.path().join("c")), 1);
    let typo = r#"{"epsilon": 1.0, "f_plus": [2.0], "f_minus": [0.0], "window": [0, 1], "sed": 3}"#;
    assert_eq!(run(&["candidate"], typo, &tmp.path().join("d")), 1);
}

#[test]
fn identical_configs_give_identical_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(run(&["report"], SW, &a), 0);
    assert_eq!(run(&["report", "--threads", "2"], SW, &b), 0);
    let r = json(&a.join("report.json"));
    assert_eq!(r["passes"], true);
    assert_eq!(fs::read(a.join("report.json")).unwrap(), fs::read(b.join("report.json")).unwrap());
    for cmd in ["fissure", "field"] {
        let (x, y) = (tmp.path().join(format!("{cmd}1")), tmp.path().join(format!("{cmd}2")));
        assert_eq!(run(&[cmd], SW, &x), 0);
        assert_eq!(run(&[cmd], SW, &y), 0);
        for f in fs::read_dir(&x).unwrap() {
            let name = f.unwrap().file_name();
            assert_eq!(fs::read(x.join(&name)).unwrap(), fs::read(y.join(&name)).unwrap(), "{cmd} {name:?}");
        }
    }
}
