//! Runs an experiment spec and prints the calibration and trade-off tables.
//!
//! `cargo run --release --example sweep -- data/desk_synthetic.json`

use patchspec::harness::{calibrate, calibration_text, run_experiment, saturation_point, tradeoff_table, tradeoff_text, ExperimentSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args().nth(1).ok_or("usage: sweep <spec.json>")?;
    let spec = ExperimentSpec::load(&path)?;
    let started = std::time::Instant::now();
    let results = run_experiment(&spec)?;
    println!("{}", calibration_text(&calibrate(&results)));
    println!("{}", tradeoff_text(&tradeoff_table(&results)?));
    for r in &results {
        if let Some(c) = r.c_measured {
            println!("{}: c = {c:.3}, sigma_used = {:.4}", r.point.label(), r.sigma_used);
        }
    }
    println!("saturation sigma: {:?}", saturation_point(&results));
    println!("elapsed {:.1}s", started.elapsed().as_secs_f64());
    Ok(())
}
