//! Generate seeded random networks and summarize their reduced models.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dhflow::graph::Layer;
use dhflow::intmat;
use dhflow::synth::{generate, layer_nodes, model_of, random_params, to_graph};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    println!("{:>4} {:>4} {:>4} {:>5} {:>6} {:>6} {:>5} {:>6}", "pr", "cons", "a", "n_ch", "edges", "sup", "rank", "topo");
    for _ in 0..10 {
        let p = random_params(&mut rng);
        let spec = generate(p, &mut rng);
        let g = to_graph(&spec);
        let ok = g.validate_topology().passed();
        let sup = layer_nodes(&g, Layer::Supply);
        let m = model_of(&spec)?;
        println!(
            "{:>4} {:>4} {:>4} {:>5} {:>6} {:>6} {:>5} {:>6}",
            p.producers,
            p.consumers,
            m.n_loops(),
            m.n_ch(),
            m.n_edges(),
            sup,
            intmat::rank(&m.loops.f),
            if ok { "ok" } else { "FAIL" }
        );
    }
    Ok(())
}
