use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fpme::config::{self, EigConfig, FracPoissonConfig, RunConfig, SelfSimConfig, SweepConfig};
use fpme::{commands, CliError};

/// Structure-preserving finite element solver for the fractional porous
/// medium equation.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, clap::Args)]
struct Io {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the standard equation.
    Run(Io),
    /// Integrate in self-similar variables and track the Barenblatt distance.
    Selfsim(Io),
    /// Solve one fractional Poisson problem.
    Fracpoisson(Io),
    /// Dump the discrete Neumann spectrum.
    Eig(Io),
    /// Run a grid of discretizations against the finest one.
    Sweep(Io),
}

fn dispatch(cmd: Command) -> Result<String, CliError> {
    Ok(match cmd {
        Command::Run(io) => {
            let m = commands::run(&config::load::<RunConfig>(&io.config)?, &io.out)?;
            format!("run: {} steps in {:.1}s", m.results["steps"], m.wall_clock_seconds)
        }
        Command::Selfsim(io) => {
            let m = commands::selfsim(&config::load::<SelfSimConfig>(&io.config)?, &io.out)?;
            format!("selfsim: final L1 profile distance {}", m.results["profile_distance"]["final_l1"])
        }
        Command::Fracpoisson(io) => {
            let m = commands::fracpoisson(&config::load::<FracPoissonConfig>(&io.config)?, &io.out)?;
            format!("fracpoisson: error {}", m.results["error"])
        }
        Command::Eig(io) => {
            let m = commands::eig(&config::load::<EigConfig>(&io.config)?, &io.out)?;
            format!("eig: lambda_1 = {}", m.results["lambda_1"])
        }
        Command::Sweep(io) => {
            let (m, cells) = commands::sweep(&config::load::<SweepConfig>(&io.config)?, &io.out)?;
            format!("sweep: {} cells, reference {}", cells.len(), m.results["reference"])
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("fpme: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
