//! Storage functions along a perturbed trajectory with the chord flows
//! pinned: H decays at the rate -z'N_pr z - v'N_sh v.

use dhflow::analysis::{compute_equilibrium, dissipation_rate, sample_bundle};
use dhflow::control::{z_transform, Saturation};
use dhflow::sim::{producer_measurements, ChordMode, IntegratorConfig, Schedule, Simulation};
use dhflow::synth::two_tank_scenario;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sc = two_tank_scenario().build()?;
    let m = &sc.model;
    let sp = sc.setpoints.clone();
    let eq = compute_equilibrium(m, &sp.q_ch_star, &sp.v_sh_star);
    let mut init = eq.bundle(m);
    init.plant.v_sh[0] += 30.0;
    init.plant.v_sc[0] -= 30.0;
    init.vol.x_b *= 0.6;

    let mut cl = sc.closed_loop();
    cl.mode = ChordMode::Pinned;
    cl.saturation = Saturation::disabled();
    let sim = Simulation {
        closed_loop: cl.clone(),
        initial: init,
        setpoints: sp.clone(),
        schedule: Schedule::default(),
        integrator: IntegratorConfig { dt: 0.05, t_end: 7200.0, record_every: 600.0 },
    };
    let traj = sim.run().map_err(|a| a.error.to_string())?;
    println!("{:>6} {:>12} {:>12} {:>12}", "t [s]", "H", "dH/dt", "V_sh,1 [m3]");
    for s in &traj.samples {
        let z = z_transform(&producer_measurements(m, &sample_bundle(s), &sp), &s.x_a, &cl.vol);
        let d = dissipation_rate(&cl.vol, &z, &(&s.v_sh - &sp.v_sh_star));
        println!("{:>6.0} {:>12.4e} {:>12.4e} {:>12.3}", s.t, s.h_tilde, d, s.v_sh[0]);
    }
    Ok(())
}
