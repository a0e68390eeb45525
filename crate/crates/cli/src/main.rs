use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use edgegain_cli::solve::{cmd_solve, SolveArgs};
use edgegain_cli::sweep::{cmd_sweep, SweepArgs};
use edgegain_cli::verify::{cmd_verify, VerifyArgs};

/// Resource-allocation solver and experiment harness for task-oriented
/// edge inference over joint sensing, computation, and communication
/// budgets.
#[derive(Parser)]
#[command(name = "edgegain", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one scenario and write the allocation report.
    Solve {
        /// TOML configuration; omit to run the built-in defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long, env = "EDGEGAIN_OUT", default_value = "edgegain-out")]
        out: PathBuf,
    },
    /// Run a Monte-Carlo parameter sweep and write the result CSV.
    Sweep {
        /// TOML sweep specification.
        #[arg(long)]
        spec: PathBuf,
        /// Output directory.
        #[arg(long, env = "EDGEGAIN_OUT", default_value = "edgegain-out")]
        out: PathBuf,
        /// Worker threads for sweep cells.
        #[arg(long)]
        parallel: Option<usize>,
    },
    /// Certify the build against the grid oracle and optimality checks.
    Verify {
        /// Output directory.
        #[arg(long, env = "EDGEGAIN_OUT", default_value = "edgegain-out")]
        out: PathBuf,
        /// Worker threads for oracle cells.
        #[arg(long)]
        parallel: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve { config, seed, out } => cmd_solve(&SolveArgs { config, seed, out }),
        Command::Sweep {
            spec,
            out,
            parallel,
        } => cmd_sweep(&SweepArgs {
            spec,
            out,
            parallel,
        }),
        Command::Verify { out, parallel } => cmd_verify(&VerifyArgs { out, parallel }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
