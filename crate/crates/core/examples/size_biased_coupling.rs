// Size-biased versions of V and W = n - S built by moving one point.

use coverage_stein::coupling::{coupling_draws, size_bias_check, Variant};
use coverage_stein::geometry::ModelParams;
use coverage_stein::simulate::VolumeMethod;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let params = ModelParams::new(1, 50, 1.0)?;
    for variant in [Variant::V, Variant::W] {
        let batch = coupling_draws(&params, variant, 20_000, 11, VolumeMethod::Exact1d)?;
        let largest = batch.draws.iter().map(|d| (d.y_prime - d.y).abs()).fold(0.0, f64::max);
        let moved = batch.draws.iter().filter(|d| d.bernoulli).count();
        let check = size_bias_check(&batch.ys(), &batch.y_primes(), |y| y, 4.0)?;
        println!(
            "{variant}: E[Y'] = {:.4}, E[Y^2]/E[Y] = {:.4}, z = {:+.2}, max |Y'-Y| = {largest:.4}, moved in {moved} draws",
            check.mean_g_y_prime, check.size_biased_mean, check.z
        );
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
