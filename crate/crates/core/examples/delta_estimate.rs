// Nested Monte Carlo estimate of the conditional-variance term against its
// bound.

use coverage_stein::coupling::{estimate_delta, Variant};
use coverage_stein::geometry::ModelParams;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let params = ModelParams::new(1, 100, 1.0)?;
    for variant in [Variant::V, Variant::W] {
        let est = estimate_delta(&params, variant, 200, 200, 23)?;
        println!("{}", serde_json::to_string(&est)?);
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
