use std::path::Path;
use std::process::{Command, Output};

use bslq::problem_file::{load_spec, save_spec};
use bslq::trajectories::read_rows;
use bslq_core::example::example_spec;
use bslq_core::linalg::Matrix;
use serde_json::Value;

fn bslq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bslq"))
        .args(args)
        .env_remove("BSLQ_MAX_DEPTH")
        .output()
        .unwrap()
}

fn write_example(dir: &Path) -> String {
    let path = dir.join("example.json");
    std::fs::write(&path, bslq::EXAMPLE_JSON).unwrap();
    path.to_str().unwrap().to_string()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn example_command_prints_bundled_problem() {
    let out = bslq(&["example"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), bslq::EXAMPLE_JSON);
    assert_eq!(load_spec(bslq::EXAMPLE_JSON).unwrap(), example_spec());
}

#[test]
fn schema_command() {
    let out = bslq(&["schema"]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["additionalProperties"], Value::Bool(false));
}

#[test]
fn solve_writes_report_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_example(dir.path());
    let report = dir.path().join("report.json");
    let csv = dir.path().join("traj.csv");
    let out = bslq(&[
        "solve",
        "--input",
        &input,
        "--output",
        report.to_str().unwrap(),
        "--dump-trajectories",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(out.stdout.is_empty());
    let err = stderr(&out);
    assert!(err.contains("value (decoupled) 14.6925, exact cost 14.6925"), "{err}");
    assert!(err.contains("theorem 27.5606, derivation 27.6242"), "{err}");

    let v: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["tool"], "bslq");
    assert_eq!(v["value_variant"], "decoupled");
    assert!((v["values"]["oracle_cost"].as_f64().unwrap() - 14.692474009687782).abs() < 1e-10);
    assert_eq!(v["H"].as_array().unwrap().len(), 5);
    assert_eq!(v["K"].as_array().unwrap().len(), 4);
    assert_eq!(v["phi"]["atoms"].as_array().unwrap().len(), 31);
    assert!(!v["notes"].as_array().unwrap().is_empty());

    let rows = read_rows(std::fs::File::open(&csv).unwrap()).unwrap();
    assert!(rows.iter().any(|r| r.process == "u" && r.time == 3 && r.path == "101"));
}

#[test]
fn fixed_value_variant() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_example(dir.path());
    let out = bslq(&["solve", "--input", &input, "--value-variant", "theorem", "--route", "transformed"]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["value_variant"], "theorem");
    assert_eq!(v["route"], "transformed");
    assert!((v["value"].as_f64().unwrap() - 27.5606).abs() < 1e-4);
}

#[test]
fn verify_passes_and_tamper_fails() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_example(dir.path());
    let out = bslq(&["verify", "--input", &input, "--qp"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["pass"], Value::Bool(true));
    assert_eq!(v["qp"]["dim"], 30);

    let out = bslq(&["verify", "--input", &input, "--tamper", "b"]);
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["pass"], Value::Bool(false));
    let steps = v["stationarity_per_step"].as_array().unwrap();
    assert!(steps.iter().all(|s| s.as_f64().unwrap() > 1e-3), "{steps:?}");
    assert!(stderr(&out).contains("verification FAILED"));
}

#[test]
fn transformed_route_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_example(dir.path());
    let out = bslq(&["verify", "--input", &input, "--route", "transformed"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn oracle_command() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_example(dir.path());
    let out = bslq(&["oracle", "--input", &input]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["dim"], 30);
    assert!((v["min_eigenvalue"].as_f64().unwrap() - 0.6368).abs() < 1e-4);
    assert!((v["qp_cost"].as_f64().unwrap() - 14.692474009687782).abs() < 1e-9);
}

#[test]
fn invalid_problem_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = example_spec();
    for r in &mut spec.r_cost {
        *r = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
    }
    let path = dir.path().join("bad.json");
    std::fs::write(&path, save_spec(&spec)).unwrap();
    let out = bslq(&["solve", "--input", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("R_0 not uniformly positive"), "{}", stderr(&out));
}

#[test]
fn malformed_json_exits_2_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\n  \"horizon\": 4,\n  oops\n}").unwrap();
    let out = bslq(&["solve", "--input", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
}

#[test]
fn missing_input_exits_4() {
    let out = bslq(&["solve", "--input", "/nonexistent/problem.json"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn depth_cap_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_example(dir.path());
    let out = Command::new(env!("CARGO_BIN_EXE_bslq"))
        .args(["solve", "--input", &input])
        .env("BSLQ_MAX_DEPTH", "3")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains('3'));
}

#[test]
fn bad_tolerance_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_example(dir.path());
    let out = bslq(&["verify", "--input", &input, "--tol", "bogus=1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("unknown key"));
}

#[test]
fn loose_tolerance_override_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_example(dir.path());
    let out = bslq(&["verify", "--input", &input, "--tol", "stationarity=0.5", "--no-qp"]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let check = v["checks"].as_array().unwrap().iter().find(|c| c["name"] == "stationarity").unwrap();
    assert_eq!(check["threshold"], 0.5);
    assert!(v["qp"].is_null());
}
