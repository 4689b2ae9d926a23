//! `avoidnet`: data generation, training, simulation and evaluation.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{evaluate, gen_data, partition, simulate, stress, train, CliError};

/// Learned decentralized collision avoidance: expert data, training and
/// evaluation.
#[derive(Parser, Debug)]
#[command(name = "avoidnet", version, about, long_about = None)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate, cleanse and augment expert frames into a dataset file.
    GenData(gen_data::GenDataArgs),
    /// Cluster expert velocity increments and export the class table.
    Partition(partition::PartitionArgs),
    /// Cross-validate and train the classifier on a dataset.
    Train(train::TrainArgs),
    /// Run one scenario and export its trace and metrics.
    Simulate(simulate::SimulateArgs),
    /// Run a scenario suite and report averaged metrics.
    Evaluate(evaluate::EvaluateArgs),
    /// Count failures over many random L-shape initializations.
    Stress(stress::StressArgs),
}

/// Worker threads for parallel stages; unset uses every core.
const THREADS_ENV: &str = "AVOIDNET_THREADS";

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = value.parse().map_err(|_| {
        CliError::Usage(format!(
            "{THREADS_ENV} must be a thread count, got `{value}`"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Runtime(e.into()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = configure_threads().and_then(|()| match cli.command {
        Command::GenData(args) => gen_data::run(&args),
        Command::Partition(args) => partition::run(&args),
        Command::Train(args) => train::run(&args),
        Command::Simulate(args) => simulate::run(&args),
        Command::Evaluate(args) => evaluate::run(&args),
        Command::Stress(args) => stress::run(&args),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
