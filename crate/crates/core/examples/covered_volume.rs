// Covered volume and isolated points of one random configuration, exact and
// by Monte Carlo.

use coverage_stein::geometry::{sample_configuration, ModelParams};
use coverage_stein::simulate::{covered_volume, isolated_count, VolumeMethod};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let line = ModelParams::new(1, 200, 1.0)?;
    let config = sample_configuration(&line, 1);
    let v = covered_volume(&config, line.rho, VolumeMethod::Exact1d)?;
    println!("d=1 n=200: V = {:.6}, S = {}", v.value, isolated_count(&config, line.rho)?);

    let plane = ModelParams::new(2, 200, 1.0)?;
    let config = sample_configuration(&plane, 1);
    let exact = covered_volume(&config, plane.rho, VolumeMethod::Exact2d)?;
    let mc = covered_volume(&config, plane.rho, VolumeMethod::MonteCarlo { samples: 200_000, seed: 5 })?;
    println!(
        "d=2 n=200: V = {:.9} exact, {:.4} +- {:.4} Monte Carlo; S = {}",
        exact.value,
        mc.value,
        mc.std_error,
        isolated_count(&config, plane.rho)?
    );

    let space = ModelParams::new(3, 200, 0.8)?;
    let config = sample_configuration(&space, 1);
    let mc = covered_volume(&config, space.rho, VolumeMethod::MonteCarlo { samples: 200_000, seed: 5 })?;
    println!("d=3 n=200: V = {:.4} +- {:.4}", mc.value, mc.std_error);
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
