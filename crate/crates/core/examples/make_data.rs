//! Regenerates the CSV files bundled under `data/`.
//!
//! `cargo run --release --example make_data -- data`

use std::path::PathBuf;

use patchspec::model::synthetic::{exact_seasonal, seasonal_ar, SeasonalArConfig};
use patchspec::model::write_csv;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data".into()));
    std::fs::create_dir_all(&dir)?;
    write_csv(&exact_seasonal(2048, 3, 24, 0), dir.join("seasonal_exact.csv"))?;
    let cfg = SeasonalArConfig { len: 12_000, channels: 3, period: 24, seed: 11, ..Default::default() };
    write_csv(&seasonal_ar(&cfg), dir.join("seasonal_ar.csv"))?;
    Ok(())
}
