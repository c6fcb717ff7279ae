//! Runs a benchmark grid from a TOML config and prints the summary table.
//! Same as `bench run --config <file>`.
//!
//! cargo run --release --example run_grid -- [config.toml] [jobs]

use std::path::PathBuf;

use pmae::bench::{run_grid, RunConfig};
use pmae::eval::report::markdown_table;

fn main() -> pmae::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let path = args
        .first()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/data/grid.toml"));
    let jobs = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let cfg = RunConfig::load(&path)?;
    println!("config {} (hash {})", path.display(), &cfg.hash()[..12]);
    let outcome = run_grid(&cfg, jobs)?;
    println!("{} reports in {}\n", outcome.reports.len(), cfg.output_dir.display());
    print!("{}", markdown_table(&outcome.summary));
    Ok(())
}
