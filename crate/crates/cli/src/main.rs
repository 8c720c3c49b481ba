//! `dvts`: run simulated autoscaling experiments, compare their costs and
//! look inside saved models.

mod compare;
mod inspect;
mod report;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "dvts", version, about = "Dynamic VM type selection simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more policies on a scenario.
    Run(run::RunArgs),
    /// Compare finished runs of the same scenario.
    Compare(compare::CompareArgs),
    /// Print the contents of an ANN/HTM snapshot or a capacity repository.
    Inspect { path: PathBuf },
    /// Print the built-in default scenario as JSON.
    DefaultScenario,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DVTS_LOG_LEVEL", "warn"))
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run::run(args),
        Command::Compare(args) => compare::compare(args),
        Command::Inspect { path } => inspect::inspect(&path),
        Command::DefaultScenario => {
            let s = dvts_core::simenv::Scenario::default();
            serde_json::to_string_pretty(&s)
                .map(|text| println!("{text}"))
                .map_err(Into::into)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
