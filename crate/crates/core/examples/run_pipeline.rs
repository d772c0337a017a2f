//! Runs every pipeline stage from a TOML config, as the `evsynth` binary does.
//!
//! ```text
//! cargo run --example write_fixtures -- crates/core/fixtures
//! cargo run --release --example run_pipeline -- crates/core/configs/toy_classes.toml
//! ```

use evsynth::pipeline::{PipelineConfig, Run, RunOptions};

fn main() -> evsynth::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "crates/core/configs/toy_classes.toml".into());
    let config = PipelineConfig::load(&path)?;
    let run = Run::open(config, RunOptions { preview: true, parallel: 4 })?;
    println!("run directory {}", run.dir.display());
    for report in run.pipeline()? {
        println!("[{}]", report.stage);
        for line in report.lines.iter().rev().take(4).rev() {
            println!("  {line}");
        }
    }
    Ok(())
}
