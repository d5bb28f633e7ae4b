// Limiting Berry-Esseen constants for unit radius in dimensions 1 to 3.

use coverage_stein::cli::{cmd_table, render_table};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let rows = cmd_table(1.0, &[1, 2, 3], 1e-12)?;
    print!("{}", render_table(1.0, &rows));
    for r in &rows {
        println!("d={}: delta_V = {:.8e}, delta_S = {:.8e}", r.d, r.delta_v, r.delta_s);
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
