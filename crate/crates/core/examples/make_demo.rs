//! Regenerates the data files of the bundled demo.
//!
//! Usage: `cargo run -p csforge --example make_demo -- [DIR]` (default `demo`).

use std::path::PathBuf;

fn main() -> std::io::Result<()> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("demo"));
    csforge::toy::write_demo_fixtures(&dir, csforge::toy::DEMO_SEED)?;
    println!("wrote demo data to {}", dir.display());
    Ok(())
}
