// Exact means and variances next to their large-n limits.

use coverage_stein::analytic::{g_s, g_v, QuadratureSpec};
use coverage_stein::geometry::ModelParams;
use coverage_stein::moments::{mean_fraction_limit, MomentSet};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let spec = QuadratureSpec::default();
    for d in 1..=3 {
        let (gv, gs) = (g_v(1.0, d, &spec)?, g_s(1.0, d, &spec)?);
        println!("d={d}: e^-phi = {:.6e}, g_V = {gv:.6e}, g_S = {gs:.6e}", mean_fraction_limit(1.0, d)?);
        for n in [1_000u64, 100_000, 10_000_000] {
            let params = ModelParams::new(d, n, 1.0)?;
            if !params.validity.variance_formulas {
                continue;
            }
            let m = MomentSet::compute(&params, &spec)?;
            let nf = n as f64;
            println!(
                "  n={n:>9}: mu_S/n = {:.6e}  Var(V)/n = {:.6e}  Var(S)/n = {:.6e}",
                m.mu_s / nf,
                m.var_v / nf,
                m.var_s / nf
            );
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
