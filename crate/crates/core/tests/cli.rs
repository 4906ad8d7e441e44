//! End-to-end runs of the `dhsim` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dhflow::scenario::{csv_header, read_trajectory_csv};
use dhflow::synth::two_tank_scenario;
use serde_json::Value;

fn dhsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dhsim")).args(args).env("DHSIM_LOG", "error").output().unwrap()
}

fn shipped(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn write_two_tank(dir: &Path, name: &str, edit: impl FnOnce(&mut dhflow::scenario::ScenarioFile)) -> String {
    let mut f = two_tank_scenario();
    f.integrator.t_end = 300.0;
    f.integrator.record_every = 10.0;
    edit(&mut f);
    let p = dir.join(name);
    std::fs::write(&p, f.to_json()).unwrap();
    p.to_str().unwrap().to_string()
}

fn json_stdout(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

#[test]
fn build_prints_matrices() {
    let out = dhsim(&["build", "--json", shipped("two_tank.json").to_str().unwrap()]);
    assert!(out.status.success());
    let v = json_stdout(&out);
    assert_eq!(v["n_ch"], 2);
    assert_eq!(v["b"], serde_json::json!([[0.0, 1.0], [1.0, -1.0]]));
    assert_eq!(v["j_ch"], serde_json::json!([[4e5, -3e5], [-3e5, 5e5]]));
    assert_eq!(v["theta_pr"], serde_json::json!([35000.0, 45000.0]));

    let text = dhsim(&["build", shipped("reference.json").to_str().unwrap()]);
    assert!(text.status.success());
    assert!(String::from_utf8_lossy(&text.stdout).contains("n_ch = 17, n_pr = 3, loops a = 6"));
}

#[test]
fn build_rejects_bad_topology() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_two_tank(dir.path(), "bad.json", |f| f.network.tanks[0].v_sc0 += 10.0);
    let out = dhsim(&["build", "--json", &p]);
    assert_eq!(out.status.code(), Some(1));
    let v = json_stdout(&out);
    assert_eq!(v["topology"]["violations"][0]["violation"], "volume_mismatch");
}

#[test]
fn verify_passes_and_fails_with_json() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_two_tank(dir.path(), "good.json", |_| {});
    let out = dhsim(&["verify", "--json", &good]);
    let v = json_stdout(&out);
    assert!(out.status.success(), "{v}");
    assert_eq!(v["passed"], true);
    assert_eq!(v["failures"], serde_json::json!([]));

    // far past the RK4 stability limit
    let bad = write_two_tank(dir.path(), "bad.json", |f| f.integrator.dt = 20.0);
    let out = dhsim(&["verify", "--json", &good, &bad]);
    assert_eq!(out.status.code(), Some(1));
    let v = json_stdout(&out);
    assert_eq!(v["passed"], false);
    let failures = v["failures"].as_array().unwrap();
    assert!(!failures.is_empty());
    assert!(failures.iter().any(|f| f["check"] == "simulation"), "{v}");
    assert_eq!(v["reports"].as_array().unwrap().len(), 2);
}

#[test]
fn verify_text_output() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_two_tank(dir.path(), "good.json", |_| {});
    let out = dhsim(&["verify", &good]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("[PASS] loop law"), "{text}");
    assert!(!text.contains("[FAIL]"));
}

#[test]
fn simulate_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write_two_tank(dir.path(), "two.json", |_| {});
    let csv = dir.path().join("two.csv");
    let out = dhsim(&["simulate", &sc, "-o", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = read_trajectory_csv(&csv).unwrap();
    assert_eq!(table.header, csv_header(2, 2));
    assert_eq!(table.rows.len(), 31);
    assert_eq!(table.column("t_s").unwrap().last(), Some(&300.0));
}

#[test]
fn simulate_batch_with_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_two_tank(dir.path(), "a.json", |_| {});
    let b = write_two_tank(dir.path(), "b.json", |f| f.setpoints.v_sh_star = vec![520.0, 480.0]);
    let c = write_two_tank(dir.path(), "c.json", |f| f.integrator.dt = 20.0);
    let out_dir = dir.path().join("out");
    let out = dhsim(&["--jobs", "2", "simulate", &a, &b, &c, "-o", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("c.json"));
    let ta = read_trajectory_csv(&out_dir.join("a.csv")).unwrap();
    let tb = read_trajectory_csv(&out_dir.join("b.csv")).unwrap();
    assert_eq!(ta.rows.len(), tb.rows.len());
    assert_ne!(ta.column("V_sh_1"), tb.column("V_sh_1"));
    // the diverging run leaves no complete trajectory behind
    if let Ok(tc) = read_trajectory_csv(&out_dir.join("c.csv")) {
        assert!(tc.rows.len() < ta.rows.len());
    }

    let ok = dhsim(&["--jobs", "2", "simulate", &a, &b, "-o", out_dir.to_str().unwrap()]);
    assert!(ok.status.success());
}

#[test]
fn equilibrium_json() {
    let out = dhsim(&["equilibrium", "--json", shipped("two_tank.json").to_str().unwrap()]);
    assert!(out.status.success());
    let v = json_stdout(&out);
    assert_eq!(v["q_pr"], serde_json::json!([0.02, -0.01]));
    assert_eq!(v["x_b"], serde_json::json!([35000.0, 45000.0]));
    assert!(v["rhs_residual"].as_f64().unwrap() < 1e-10);
    assert_eq!(v["in_operation"], serde_json::json!([true, true]));
}

#[test]
fn missing_file_exits_with_usage_error() {
    let out = dhsim(&["equilibrium", "/nonexistent/scenario.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/scenario.json"));
}
