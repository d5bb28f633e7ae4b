// Finite-n Kolmogorov-distance bounds and how sqrt(n) times them settles.

use coverage_stein::analytic::QuadratureSpec;
use coverage_stein::bounds::BoundReport;
use coverage_stein::geometry::ModelParams;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let spec = QuadratureSpec::default();
    for n in [10_000u64, 1_000_000, 100_000_000] {
        let params = ModelParams::new(1, n, 1.0)?;
        let r = BoundReport::compute(&params, &spec)?;
        let root_n = (n as f64).sqrt();
        println!(
            "n={n:>9}: sqrt(n) D_V <= {:.6e} (limit {:.6e}), sqrt(n) D_S <= {:.6e} (limit {:.6e}), sqrt(n) D_S >= {:.4}",
            root_n * r.d_v_bound.unwrap_or(f64::NAN),
            r.delta_v,
            root_n * r.d_s_bound.unwrap_or(f64::NAN),
            r.delta_s.unwrap_or(f64::NAN),
            r.lower_s,
        );
    }
    let report = BoundReport::compute(&ModelParams::new(2, 5_000, 0.5)?, &spec)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
