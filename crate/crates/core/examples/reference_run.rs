//! Run the bundled 24 h reference scenario and write its trajectory CSV.
//!
//! `cargo run --release --example reference_run [-- out.csv]`

use std::path::PathBuf;
use std::time::Instant;

use dhflow::scenario::{parse_scenario, write_trajectory_csv};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("reference.csv"));
    let sc = parse_scenario(&dir.join("scenarios/reference.json"))?;
    println!("{}: n_ch = {}, n_pr = {}", sc.name, sc.model.n_ch(), sc.model.n_pr());

    let t0 = Instant::now();
    let traj = sc.run().map_err(|a| a.error.to_string())?;
    println!("simulated 24 h in {:.1} s, {} samples", t0.elapsed().as_secs_f64(), traj.samples.len());

    for s in traj.samples.iter().step_by(120) {
        let v: Vec<String> = s.v_sh.iter().map(|v| format!("{v:6.1}")).collect();
        println!("t = {:5.1} h  V_sh = [{}] m3  sum q_pr = {:.3} m3/s", s.t / 3600.0, v.join(", "), s.q_pr.sum());
    }
    println!("clipped fraction of steps: {:.3}", traj.diagnostics.saturation_fraction);
    write_trajectory_csv(&traj, &out)?;
    println!("wrote {}", out.display());
    Ok(())
}
