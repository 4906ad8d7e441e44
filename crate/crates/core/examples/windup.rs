//! Effect of producer input clipping. The reference scenario ramps its
//! setpoints; replacing the ramps by plain steps drives the volume loop into
//! the clipping limits and the friction estimates wind up.

use dhflow::synth::{reference_scenario, ReferenceOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for (label, steps) in [("ramped setpoints", false), ("stepped setpoints", true)] {
        let mut file = reference_scenario(ReferenceOptions::default())?;
        if steps {
            for e in &mut file.schedule {
                e.ramp_h = None;
                e.ramp_step_s = None;
            }
        }
        let sc = file.build()?;
        let theta = sc.model.theta();
        match sc.run() {
            Ok(t) => {
                let last = t.samples.last().unwrap();
                println!(
                    "{label}: clipped {:.1}% of steps, windup warning {}, |x_b - theta|/|theta| = {:.2e}",
                    100.0 * t.diagnostics.saturation_fraction,
                    t.diagnostics.windup_warning,
                    (&last.x_b - &theta).norm() / theta.norm()
                );
            }
            Err(abort) => {
                let last = abort.partial.samples.last().unwrap();
                println!("{label}: {}", abort.error);
                let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", ");
                println!("  last x_b = [{}]", fmt(last.x_b.as_slice()));
                println!("  theta    = [{}]", fmt(theta.as_slice()));
            }
        }
    }
    Ok(())
}
