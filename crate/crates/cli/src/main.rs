//! `bootband`: block-bootstrap confidence bands for LSTM price forecasts.

mod args;
mod commands;
mod error;
mod manifest;

use clap::{Parser, Subcommand};

use crate::commands::*;
use crate::error::CliError;
use crate::manifest::ConfigLayer;

#[derive(Debug, Parser)]
#[command(
    name = "bootband",
    version,
    about = "Block-bootstrap confidence bands for LSTM price forecasts"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw bootstrap replicates of the log-return series
    Resample(ResampleCmd),
    /// Pick the block length minimising the penalised bootstrap distance
    SelectBlock(SelectBlockCmd),
    /// Fit one LSTM on the training segment and forecast the test segment
    Train(TrainCmd),
    /// Full pipeline for one bootstrap method
    Band(BandCmd),
    /// Run the pipeline for NBB, MBB and LBB and rank them by band width
    Compare(CompareCmd),
    /// Rerun a command from its manifest
    Replay(ReplayCmd),
}

impl Command {
    fn jobs(&self) -> Option<usize> {
        match self {
            Command::Resample(c) => c.run.jobs,
            Command::SelectBlock(c) => c.run.jobs,
            Command::Train(c) => c.run.jobs,
            Command::Band(c) => c.run.jobs,
            Command::Compare(c) => c.run.jobs,
            Command::Replay(c) => c.jobs,
        }
    }

    fn config(&self) -> Option<&std::path::Path> {
        match self {
            Command::Resample(c) => c.run.config.as_deref(),
            Command::SelectBlock(c) => c.run.config.as_deref(),
            Command::Train(c) => c.run.config.as_deref(),
            Command::Band(c) => c.run.config.as_deref(),
            Command::Compare(c) => c.run.config.as_deref(),
            Command::Replay(_) => None,
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    let layer = ConfigLayer::load(cmd.config())?;
    match cmd {
        Command::Resample(c) => resample(c, layer),
        Command::SelectBlock(c) => select_block(c, layer),
        Command::Train(c) => train(c, layer),
        Command::Band(c) => band(c, layer),
        Command::Compare(c) => compare(c, layer),
        Command::Replay(c) => replay(c),
    }
}

fn main() {
    let cli = Cli::parse();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.command.jobs().unwrap_or(0))
        .build()
        .expect("thread pool");
    if let Err(e) = pool.install(|| dispatch(cli.command)) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
