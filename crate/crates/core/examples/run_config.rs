//! Runs one of the bundled experiment configs into a temporary directory and
//! lists the artifacts. Usage: `cargo run --example run_config [name]`.

use cogmask::harness::{load_config, run_experiment};

fn main() -> cogmask::Result<()> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "single_dataset_irl".into());
    let path = format!("{}/configs/{name}.toml", env!("CARGO_MANIFEST_DIR"));
    let mut cfg = load_config(&path)?;
    cfg.output_dir = std::env::temp_dir().join(format!("cogmask-{name}"));
    let art = run_experiment(&cfg)?;
    println!("{} seed {} -> {}", cfg.experiment.name(), cfg.seed, art.dir.display());
    for a in &art.summary.assertions {
        println!("  [{}] {}: {}", if a.passed { "ok" } else { "FAIL" }, a.name, a.detail);
    }
    for f in &art.files {
        println!("  {}", f.display());
    }
    Ok(())
}
