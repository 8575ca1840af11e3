use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;

use commands::*;

/// Signed block pseudo-marginal MCMC for doubly intractable models.
#[derive(Parser, Debug)]
#[command(name = "bpmcmc", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sweep the computational time over block counts and recommend settings.
    Tune(TuneArgs),
    /// Draw perfectly sampled Ising lattices.
    IsingSimulate(IsingSimulateArgs),
    /// Fit the Ising interaction parameter.
    IsingFit(IsingFitArgs),
    /// Exact normalizing constant or posterior by enumeration (L <= 4).
    IsingOracle(IsingOracleArgs),
    /// Fit a Kent distribution.
    KentFit(KentFitArgs),
    /// Sample Kent data.
    KentSimulate(KentSimulateArgs),
    /// K-fold cross-validated two-group classification.
    KentClassify(KentClassifyArgs),
    /// Bootstrap intervals for the point estimators.
    KentBootstrap(KentBootstrapArgs),
    /// Summarise a chain CSV.
    Diagnose(DiagnoseArgs),
    /// Run an experiment described by a TOML file.
    Run {
        config: PathBuf,
    },
}

/// Exit codes: 0 success, 2 configuration error, 3 numerical failure,
/// 4 unreliable sign balance.
fn main() -> ExitCode {
    let cli = Cli::parse();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let result = match cli.command {
        Command::Tune(a) => tune(a, args),
        Command::IsingSimulate(a) => ising_simulate(a, args),
        Command::IsingFit(a) => ising_fit(a, args),
        Command::IsingOracle(a) => ising_oracle(a, args),
        Command::KentFit(a) => kent_fit(a, args),
        Command::KentSimulate(a) => kent_simulate(a, args),
        Command::KentClassify(a) => kent_classify(a, args),
        Command::KentBootstrap(a) => kent_bootstrap(a, args),
        Command::Diagnose(a) => diagnose(a),
        Command::Run { config } => run_config(&config, args),
    };
    match result {
        Ok(Status::Done) => ExitCode::SUCCESS,
        Ok(Status::Unreliable) => {
            eprintln!("warning: sign balance too weak, corrected means are unreliable");
            ExitCode::from(4)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}
