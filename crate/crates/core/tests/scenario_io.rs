//! Scenario JSON and trajectory CSV round trips, shipped files and the
//! reference day.

use std::path::PathBuf;

use dhflow::scenario::{
    csv_header, parse_scenario, parse_trajectory_csv, read_scenario_file, read_trajectory_csv, trajectory_csv,
    write_trajectory_csv, GainSpec, ScenarioError, ScenarioFile,
};
use dhflow::synth::{reference_scenario, two_tank_scenario, ReferenceOptions};
use serde_json::Value;

fn shipped(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn short_two_tank() -> ScenarioFile {
    let mut f = two_tank_scenario();
    f.integrator.t_end = 600.0;
    f.integrator.record_every = 30.0;
    f
}

fn with_edit(edit: impl FnOnce(&mut Value)) -> Result<ScenarioFile, ScenarioError> {
    let mut v: Value = serde_json::from_str(&two_tank_scenario().to_json()).unwrap();
    edit(&mut v);
    ScenarioFile::from_json(&v.to_string()).and_then(|f| f.build().map(|_| f))
}

#[test]
fn json_round_trip() {
    let f = two_tank_scenario();
    let back = ScenarioFile::from_json(&f.to_json()).unwrap();
    assert_eq!(back, f);
    let r = reference_scenario(ReferenceOptions::default()).unwrap();
    assert_eq!(ScenarioFile::from_json(&r.to_json()).unwrap(), r);
}

#[test]
fn schema_errors_name_the_field() {
    let err = with_edit(|v| v["gains"]["m_ch"] = Value::String("big".into())).unwrap_err();
    match err {
        ScenarioError::Schema { path, .. } => assert_eq!(path, "gains.m_ch"),
        e => panic!("unexpected {e}"),
    }
    let err = with_edit(|v| v["network"]["tanks"][0]["volume"] = 3.0.into()).unwrap_err();
    match err {
        ScenarioError::Schema { path, message } => {
            assert_eq!(path, "network.tanks[0].volume");
            assert!(message.contains("unknown field"), "{message}");
        }
        e => panic!("unexpected {e}"),
    }
    let err = with_edit(|v| v["gains"]["n_pr"] = (-1.0).into()).unwrap_err();
    match err {
        ScenarioError::Invalid { path, .. } => assert_eq!(path, "gains.n_pr"),
        e => panic!("unexpected {e}"),
    }
    let err = with_edit(|v| v["gains"]["n_sh"] = serde_json::json!([1.0, 2.0, 3.0])).unwrap_err();
    assert!(matches!(err, ScenarioError::Invalid { ref path, .. } if path == "gains.n_sh"), "{err}");
    let err = with_edit(|v| v["setpoints"]["v_sh_star"] = serde_json::json!([500.0])).unwrap_err();
    assert!(err.to_string().contains("v_sh_star"), "{err}");
}

#[test]
fn csv_header_layout() {
    let (n_ch, n_pr) = (17, 3);
    let h = csv_header(n_ch, n_pr);
    assert_eq!(h.len(), 1 + n_ch + n_pr + 2 * n_pr + n_pr + n_ch + n_pr + 3);
    assert_eq!(h[0], "t_s");
    assert_eq!(h[1], "q_ch_1");
    assert_eq!(h[n_ch + 1], "q_pr_1");
    assert_eq!(&h[h.len() - 3..], ["S_ch", "H_tilde", "sat_active"]);
    for p in ["V_sh_3", "V_sc_1", "x_b_2", "u_ch_17", "u_pr_3"] {
        assert!(h.iter().any(|c| c == p), "{p}");
    }
}

#[test]
fn csv_round_trip_is_exact() {
    let sc = short_two_tank().build().unwrap();
    let traj = sc.run().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.csv");
    write_trajectory_csv(&traj, &path).unwrap();
    let table = read_trajectory_csv(&path).unwrap();
    assert_eq!(table.header, csv_header(2, 2));
    assert_eq!(table.rows.len(), traj.samples.len());
    for (row, s) in table.rows.iter().zip(&traj.samples) {
        assert_eq!(row[0], s.t);
        assert_eq!(row[1], s.q_ch[0]);
        assert_eq!(row[3], s.q_pr[0]);
    }
    let q = table.column("q_pr_2").unwrap();
    assert!(q.iter().zip(&traj.samples).all(|(a, s)| *a == s.q_pr[1]));
    let x_b = table.column("x_b_1").unwrap();
    assert!(x_b.iter().zip(&traj.samples).all(|(a, s)| *a == s.x_b[0]));
    let h = table.column("H_tilde").unwrap();
    assert!(h.iter().zip(&traj.samples).all(|(a, s)| *a == s.h_tilde));
    assert!(parse_trajectory_csv("t_s,q_ch_1\n0,1,2\n").is_err());
}

#[test]
fn runs_are_deterministic() {
    let sc = short_two_tank().build().unwrap();
    assert_eq!(trajectory_csv(&sc.run().unwrap()), trajectory_csv(&sc.run().unwrap()));
}

#[test]
fn shipped_files_match_generators() {
    let cases = [
        ("reference.json", reference_scenario(ReferenceOptions::default()).unwrap()),
        ("reference_unclipped.json", reference_scenario(ReferenceOptions { clipped: false, ..Default::default() }).unwrap()),
        ("two_tank.json", two_tank_scenario()),
    ];
    for (name, fresh) in cases {
        assert_eq!(read_scenario_file(&shipped(name)).unwrap(), fresh, "{name}");
    }
}

#[test]
fn shipped_reference_uses_published_gains() {
    let f = read_scenario_file(&shipped("reference.json")).unwrap();
    let g = &f.gains;
    for (spec, v) in [(&g.m_ch, 1e5), (&g.n_ch, 1e5), (&g.n_pr, 7.11e4), (&g.n_sh, 7.5e-3), (&g.m_a, 14.06e-5), (&g.m_b, 7.11e7)] {
        assert_eq!(spec, &GainSpec::Scalar(v));
    }
    assert!(f.network.tanks.iter().all(|t| t.capacity == 1000.0));
    let sc = f.build().unwrap();
    assert_eq!((sc.model.n_ch(), sc.model.n_pr(), sc.model.n_loops()), (17, 3, 6));
    assert!(sc.saturation.enabled);
    assert_eq!((sc.saturation.lower, sc.saturation.upper), (0.03, 1.15));
}

#[test]
fn reference_day_charges_and_discharges_on_time() {
    let sc = parse_scenario(&shipped("reference.json")).unwrap();
    let traj = sc.run().unwrap();
    let at = |t_h: f64| traj.samples.iter().find(|s| s.t >= t_h * 3600.0).unwrap();
    let band = 0.02 * 400.0;
    let before = at(5.9);
    assert!(before.v_sh.iter().all(|v| (v - 250.0).abs() < band));
    let charged = at(9.25);
    assert!(charged.v_sh.iter().all(|v| (v - 650.0).abs() < band), "{:?}", charged.v_sh);
    let mid = at(7.5);
    assert!(mid.v_sh.iter().all(|v| (v - 450.0).abs() < band), "{:?}", mid.v_sh);
    let discharged = at(21.25);
    assert!(discharged.v_sh.iter().all(|v| (v - 350.0).abs() < band), "{:?}", discharged.v_sh);
    for s in &traj.samples {
        for i in 0..sc.model.n_st() {
            assert!((s.v_sh[i] + s.v_sc[i] - 1000.0).abs() < 1e-6);
        }
    }
}
