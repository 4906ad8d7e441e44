//! Build the two-tank meshed network and print its loop matrix, the
//! tank-outlet block and the chord inertia matrix.

use dhflow::synth::two_tank_network;
use dhflow::ReducedModel;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g = two_tank_network();
    let report = g.validate_topology();
    println!("topology checks passed: {}", report.passed());

    let cls = g.classify_edges()?;
    println!("chords (consumers, loops, outlets): {:?}", cls.chord_edges);
    println!("producer edges: {:?}", cls.producer_edges);
    let lm = g.fundamental_loop_matrix(&cls)?;
    println!("F columns: {:?}", lm.columns);
    print!("F ={}", lm.f);
    print!("B ={}", g.extract_b(&lm)?);

    let m = ReducedModel::build(g)?;
    print!("J_ch ={:.3e}", m.j_ch);
    println!("J_pr = {:.3e}", m.j_pr.transpose());
    Ok(())
}
