mod config;
mod error;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use xy_ep::ep::Split;

/// Train, evaluate and probe XY-model networks with Equilibrium Propagation.
///
/// Exit codes: 1 config error (including corrupt checkpoints and topology
/// mismatches), 2 data error, 3 training stopped on a non-finite parameter.
#[derive(Parser)]
#[command(name = "xyep", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the configured network; writes records.csv, checkpoints and manifest.json.
    Train { config: PathBuf },
    /// Evaluate a checkpoint on the configured task.
    Eval {
        checkpoint: PathBuf,
        config: PathBuf,
        /// Evaluate only this split (default: every split the task has).
        #[arg(long, value_enum)]
        split: Option<SplitArg>,
    },
    /// Flip-response field and coupling snapshot of a checkpoint.
    Probe { checkpoint: PathBuf, config: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Test,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train { config } => run::cmd_train(&config),
        Command::Eval {
            checkpoint,
            config,
            split,
        } => run::cmd_eval(
            &checkpoint,
            &config,
            split.map(|s| match s {
                SplitArg::Train => Split::Train,
                SplitArg::Test => Split::Test,
            }),
        ),
        Command::Probe { checkpoint, config } => run::cmd_probe(&checkpoint, &config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("xyep: {e}");
            e.exit_code()
        }
    }
}
