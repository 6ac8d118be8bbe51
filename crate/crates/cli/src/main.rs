//! `i2l`: runs the imitation pipeline one stage at a time, persisting every artifact.

mod manifest;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use i2l_core::Error;

use stages::{Overrides, Run};

/// Exit status for unreadable or invalid configuration.
const EXIT_CONFIG: u8 = 2;
/// Exit status for failures while running a stage.
const EXIT_RUNTIME: u8 = 1;

#[derive(Parser)]
#[command(name = "i2l", version, about = "Interpretable imitation of traffic controllers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the target policy and write episode logs.
    Simulate(Common),
    /// Build the rebalanced, split feature datasets.
    Features(Common),
    /// Grow and prune trees; write the prune sequence and curve.
    Train(Common),
    /// Score and deploy the selected trees; write the report.
    Evaluate(Common),
    /// Regenerate the report CSV and print a summary.
    Report(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON). Topology paths resolve relative to its directory.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the enumeration depth; only valid for enumerated features.
    #[arg(long)]
    depth: Option<usize>,
    /// Run directory holding all stage outputs.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn configure_threads() -> Result<(), Error> {
    let Ok(value) = std::env::var("I2L_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("I2L_THREADS: expected a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))
}

fn run(command: Command) -> Result<(), Error> {
    configure_threads()?;
    let (common, stage) = match command {
        Command::Simulate(c) => (c, "simulate"),
        Command::Features(c) => (c, "features"),
        Command::Train(c) => (c, "train"),
        Command::Evaluate(c) => (c, "evaluate"),
        Command::Report(c) => (c, "report"),
    };
    let overrides = Overrides { seed: common.seed, depth: common.depth };
    let mut run = Run::prepare(&common.config, overrides, &common.out)?;
    match stage {
        "simulate" => run.simulate().map(drop)?,
        "features" => run.features().map(drop)?,
        "train" => run.train()?,
        "evaluate" => run.evaluate().map(drop)?,
        _ => print!("{}", run.report()?),
    }
    eprintln!("{stage}: wrote {}", common.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { EXIT_CONFIG } else { EXIT_RUNTIME })
        }
    }
}
