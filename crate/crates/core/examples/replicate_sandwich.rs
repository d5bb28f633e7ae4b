// Simulated Kolmogorov distances of V and S against the theorem bounds.

use coverage_stein::geometry::ModelParams;
use coverage_stein::simulate::{run_replicates, VolumeMethod};
use coverage_stein::stats::{sandwich_test, SandwichOptions, Statistic};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let params = ModelParams::new(1, 2_000, 1.0)?;
    let threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let batch = run_replicates(&params, 4_000, 7, VolumeMethod::Exact1d, threads)?;
    let options = SandwichOptions::default();
    for which in [Statistic::V, Statistic::S] {
        let r = sandwich_test(&params, &batch, which, &options)?;
        println!(
            "{which:?}: D = {:.4} (band {:.4}), upper {:.3e}, lower {:?}, passed {}",
            r.d_empirical,
            r.dkw_band,
            r.upper_bound,
            r.lower_bound,
            r.passed()
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
