//! Friction factors and pipe coefficients from geometry.

use dhflow::hydraulics::{colebrook_friction, pipe_parameters, reynolds, swamee_jain, FluidProps, PipeGeometry};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("{:>8} {:>8} {:>12} {:>12}", "eps/d", "Re", "Colebrook", "Swamee-Jain");
    for eps in [0.0, 1e-4, 1e-3, 1e-2] {
        for re in [1e4, 1e5, 1e6] {
            println!("{eps:>8.0e} {re:>8.0e} {:>12.6} {:>12.6}", colebrook_friction(eps, re)?, swamee_jain(eps, re));
        }
    }

    let fluid = FluidProps::default();
    let geom = PipeGeometry { length: 250.0, diameter: 0.2, roughness: 5e-5 };
    let q = 0.05;
    let (theta, j) = pipe_parameters(&geom, &fluid, q)?;
    println!("\n250 m x DN200 at {q} m3/s: Re = {:.3e}", reynolds(q, &geom, &fluid)?);
    println!("theta = {theta:.4e} Pa s2/m6, J = {j:.4e} Pa s2/m3, loss = {:.1} Pa", theta * q * q);
    Ok(())
}
