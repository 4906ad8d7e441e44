//! Run the invariant suite on a scenario file (the two-tank one by default).

use std::path::PathBuf;

use dhflow::scenario::parse_scenario;
use dhflow::verify::run_verification;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios/two_tank.json"));
    let report = run_verification(&parse_scenario(&path)?);
    print!("{}", report.to_text());
    if !report.passed() {
        std::process::exit(1);
    }
    Ok(())
}
