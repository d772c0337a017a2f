use clap::{Parser, Subcommand};
use evsynth::pipeline::{PipelineConfig, Run, RunOptions, StageReport};
use std::path::PathBuf;
use std::process::ExitCode;

/// Event-frame synthesis pipeline.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Pipeline configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the configured output root.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Also write white-background preview images.
    #[arg(long, global = true)]
    preview: bool,
    /// Worker threads for the deterministic parallel paths.
    #[arg(long, global = true, default_value_t = 1)]
    parallel: usize,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Intensity sequences to event streams.
    Simulate,
    /// Event streams to frames and a manifest.
    Encode,
    /// Fit the denoiser on the encoded train split.
    Train,
    /// Generate frames for each condition.
    Sample,
    /// Score generated frames against real ones.
    Evaluate,
    /// Every stage in order.
    Pipeline,
}

fn run(cli: Cli) -> evsynth::Result<Vec<StageReport>> {
    let path = cli.config.ok_or_else(|| evsynth::Error::Config("--config is required".into()))?;
    let mut config = PipelineConfig::load(&path)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = cli.out {
        config.paths.out = Some(out);
    }
    let run = Run::open(config, RunOptions { preview: cli.preview, parallel: cli.parallel })?;
    eprintln!("run directory {}", run.dir.display());
    Ok(match cli.command {
        Command::Simulate => vec![run.simulate()?],
        Command::Encode => vec![run.encode()?],
        Command::Train => vec![run.train()?],
        Command::Sample => vec![run.sample()?],
        Command::Evaluate => vec![run.evaluate()?],
        Command::Pipeline => run.pipeline()?,
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(reports) => {
            for r in reports {
                println!("[{}] {}", r.stage, r.dir.display());
                for line in r.lines {
                    println!("  {line}");
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
