use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn cerm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cerm")).args(args).output().expect("binary runs")
}

fn metrics(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("metrics.json")).unwrap()).unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

const SMALL_FIT: &str = r#"{"n_train": 20, "n_val": 5, "n_test": 4, "epochs": 3, "batch_size": 5, "save_contours": 2}"#;

#[test]
fn sphere_demo_writes_trajectory() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = cerm(&["sphere-demo", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("iter,loss,constraint_residual,step_size"));
    assert_eq!(lines.count(), 500);
    let m = metrics(&out);
    assert!(m["final_loss"].as_f64().unwrap() <= 1e-6);
    assert_eq!(m["passed"], Value::Bool(true));
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "s.json", r#"{"seed": 1, "steps": 50}"#);
    let out = tmp.path().join("run");
    let o = cerm(&["sphere-demo", "--config", &cfg, "--seed", "7", "--out", out.to_str().unwrap()]);
    assert!(o.status.code().is_some());
    assert_eq!(metrics(&out)["seed"], 7);
}

#[test]
fn qmf_find_writes_filter() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = cerm(&["qmf-find", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let f: Value = serde_json::from_str(&fs::read_to_string(out.join("filters.json")).unwrap()).unwrap();
    assert_eq!(f["order"], 6);
    assert_eq!(f["h"].as_array().unwrap().len(), 11);
    let m = metrics(&out);
    assert!(m["residual"].as_f64().unwrap() <= 1e-10);
    assert_eq!(m["winding"], 0);
}

#[test]
fn bad_config_leaves_failure_record() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.json", r#"{"ordr": 6}"#);
    let out = tmp.path().join("run");
    let o = cerm(&["qmf-find", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let f: Value = serde_json::from_str(&fs::read_to_string(out.join("failure.json")).unwrap()).unwrap();
    assert_eq!(f["passed"], Value::Bool(false));
    assert!(f["error"].as_str().unwrap().contains("bad.json"));
}

#[test]
fn failed_assertion_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "s.json", r#"{"steps": 2}"#);
    let out = tmp.path().join("run");
    let o = cerm(&["sphere-demo", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let m = metrics(&out);
    assert_eq!(m["passed"], Value::Bool(false));
    assert!(!m["failures"].as_array().unwrap().is_empty());
}

#[test]
fn contour_fit_schema_and_reproducibility() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "fit.json", SMALL_FIT);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let o = cerm(&["contour-fit", "--config", &cfg, "--seed", "0", "--out", out.to_str().unwrap()]);
        assert!(matches!(o.status.code(), Some(0 | 1)), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let m = metrics(&a);
    let dice = m["mean_dice"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&dice));
    assert!(m["max_constraint_residual"].as_f64().unwrap() <= 1e-9);
    assert_eq!(fs::read(a.join("trajectory.csv")).unwrap(), fs::read(b.join("trajectory.csv")).unwrap());
    assert_eq!(fs::read(a.join("filters.json")).unwrap(), fs::read(b.join("filters.json")).unwrap());
    let c: Value = serde_json::from_str(&fs::read_to_string(a.join("contours/test_000_pred.json")).unwrap()).unwrap();
    assert!(c["tau"].as_f64().unwrap() > 0.0);
    assert_eq!(c["midpoint"].as_array().unwrap().len(), 2);
    assert_eq!(c["fourier"][1][0].as_array().unwrap().len(), 2);
    assert!(a.join("contours/test_001_target.json").exists());
    assert!(!a.join("contours/test_002_pred.json").exists());
    let filters: Value = serde_json::from_str(&fs::read_to_string(a.join("filters.json")).unwrap()).unwrap();
    assert_eq!(filters.as_array().unwrap().len(), 2);
}

#[test]
fn dwt_roundtrip_with_points() {
    let tmp = tempfile::tempdir().unwrap();
    let mut csv = String::from("x,y\n");
    for i in 0..64 {
        let t = std::f64::consts::TAU * i as f64 / 64.0;
        csv.push_str(&format!("{},{}\n", 2.0 * t.cos(), t.sin() + 0.2 * (3.0 * t).sin()));
    }
    let pts = tmp.path().join("pts.csv");
    fs::write(&pts, csv).unwrap();
    let body = format!(r#"{{"signals": 5, "searched_orders": [3], "points_csv": {:?}}}"#, pts.to_str().unwrap());
    let cfg = write_config(tmp.path(), "d.json", &body);
    let out = tmp.path().join("run");
    let o = cerm(&["dwt-roundtrip", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let d: Value = serde_json::from_str(&fs::read_to_string(out.join("decomposition.json")).unwrap()).unwrap();
    assert_eq!(d["j0"], 3);
    assert_eq!(d["j2"], 7);
    assert_eq!(d["approx"].as_array().unwrap().len(), 8);
    assert_eq!(d["details"].as_array().unwrap().len(), 4);
    assert!(out.join("decomposition_x.json").exists());
    assert!(out.join("contour.json").exists());
    assert!(metrics(&out)["curve_roundtrip_error"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn grad_check_small() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "g.json", r#"{"points": 2}"#);
    let out = tmp.path().join("run");
    let o = cerm(&["grad-check", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(metrics(&out)["max_rel_error"].as_f64().unwrap() <= 1e-4);
}
