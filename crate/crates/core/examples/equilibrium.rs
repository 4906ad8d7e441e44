//! Closed-loop equilibrium of the two-tank network, and the feasibility
//! warning when a producer would carry no flow.

use nalgebra::DVector;

use dhflow::analysis::{closed_loop_residual, compute_equilibrium};
use dhflow::synth::two_tank_scenario;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sc = two_tank_scenario().build()?;
    let m = &sc.model;
    for q in [[0.01, 0.02], [0.01, 0.01]] {
        let q_star = DVector::from_row_slice(&q);
        let v_star = DVector::from_element(2, 500.0);
        let eq = compute_equilibrium(m, &q_star, &v_star);
        let sp = dhflow::sim::Setpoints { q_ch_star: q_star, v_sh_star: v_star };
        let r = closed_loop_residual(&sc.closed_loop(), &eq.bundle(m), &sp)?;
        println!("q* = {q:?}");
        println!("  q_pr = {:?}, x_a = {:?}", eq.q_pr.as_slice(), eq.x_a.as_slice());
        println!("  x_ch = {:.3?} Pa", eq.x_ch.as_slice());
        println!("  x_b = theta = {:.1?}", eq.x_b.as_slice());
        println!("  |RHS| = {r:.1e}");
        for w in &eq.warnings {
            println!("  warning: {w}");
        }
    }
    Ok(())
}
