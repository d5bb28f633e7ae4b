// Distances, neighbourhood queries and configuration files on the torus.

use coverage_stein::geometry::{sample_configuration, toroidal_distance, ModelParams, PointConfiguration, TorusPoint};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let params = ModelParams::new(2, 100, 1.0)?;
    let side = params.side;

    let a = TorusPoint::new(vec![0.25, 0.5], side)?;
    let b = TorusPoint::new(vec![side - 0.25, 0.5], side)?;
    println!("side = {side}, |a - b| on the torus = {}", toroidal_distance(&a, &b, side)?);

    let config = sample_configuration(&params, 17);
    let centre = config.point(0).to_vec();
    let near = config.neighbors_within(&centre, params.rho)?;
    println!("{} points; point 0 has {} within rho (itself included)", config.len(), near.len());

    let mut csv = Vec::new();
    config.write_csv(&mut csv)?;
    let back = PointConfiguration::read_csv(csv.as_slice(), side, params.rho)?;
    assert_eq!(back.coords(), config.coords());
    println!("CSV round trip: {} bytes", csv.len());
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
