//! Write the bundled scenario files into `scenarios/` (or a directory given as
//! the first argument).

use std::path::PathBuf;

use dhflow::synth::{reference_scenario, two_tank_scenario, ReferenceOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios"));
    std::fs::create_dir_all(&dir)?;
    let files = [
        ("reference.json", reference_scenario(ReferenceOptions::default())?),
        ("reference_unclipped.json", reference_scenario(ReferenceOptions { clipped: false, ..Default::default() })?),
        ("two_tank.json", two_tank_scenario()),
    ];
    for (name, sc) in files {
        let path = dir.join(name);
        std::fs::write(&path, sc.to_json())?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
