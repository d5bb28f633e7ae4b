// Coupling a binomial with its positive conditioning.

use coverage_stein::coupling::{dominance_check, BinomialCoupler, PiTable};
use coverage_stein::rng;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let (m, p) = (10, 0.3);
    let table = PiTable::new(m, p)?;
    for (k, pi) in table.values().iter().enumerate() {
        println!("pi_{k:<2} = {pi:.12}");
    }
    println!("tail ordering holds exactly: {}", dominance_check(m, p)?);

    let coupler = BinomialCoupler::new(m, p)?;
    let mut rng = rng::stream(3, &[]);
    let draws = 100_000;
    let mut counts = vec![0u64; m as usize + 1];
    for _ in 0..draws {
        let (_, conditioned) = coupler.sample(&mut rng);
        counts[conditioned as usize] += 1;
    }
    let freq: Vec<String> = counts.iter().map(|&c| format!("{:.4}", c as f64 / draws as f64)).collect();
    println!("empirical law of M: [{}]", freq.join(", "));
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
