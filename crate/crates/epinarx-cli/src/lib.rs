//! Command-line front end for the `epinarx` library: epidemic case-study
//! identification, compartment-model simulation, rate derivation, and a
//! deterministic self-verification suite.

pub mod config;
pub mod error;
pub mod pipeline;
pub mod synth;
pub mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{load_config, CaseId};
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "epinarx", version, about = "Polynomial dynamic-model identification for epidemic time series", long_about = None)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one configured case study: ingest data, identify a model, and
    /// write the report artifacts.
    Identify {
        /// TOML pipeline configuration.
        #[arg(long)]
        config: PathBuf,
        /// Which configured case study to run.
        #[arg(long)]
        case: CaseId,
        /// Override the configured output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate the compartment model configured under `[simulation]` and
    /// write the trajectory as CSV.
    SimulateSeir {
        /// TOML pipeline configuration.
        #[arg(long)]
        config: PathBuf,
    },
    /// Estimate transmission/lethality rates and the reproduction number
    /// from the configured case/death series and write them as CSV.
    DeriveRn {
        /// TOML pipeline configuration.
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the built-in synthetic verification suite and print one
    /// PASS/FAIL line per check.
    Verify {
        /// Seed for the suite's randomized fixtures.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Identify { config, case, out } => {
            let (parsed, bytes) = load_config(&config)?;
            let outcome = pipeline::run_case_study(&parsed, &bytes, case, out.as_deref())?;
            println!(
                "case {}: {} terms, top term {}",
                outcome.case, outcome.n_terms, outcome.top_term
            );
            if let Some(r2) = outcome.r2_train {
                println!("train R^2: {r2:.4}");
            }
            match (outcome.r2_test, outcome.free_run_diverged) {
                (Some(r2), _) => println!("test R^2 (free run): {r2:.4}"),
                (None, true) => println!("test R^2 (free run): n/a (simulation diverged)"),
                (None, false) => {}
            }
            for file in &outcome.files {
                println!("wrote {}", file.display());
            }
            Ok(())
        }
        Command::SimulateSeir { config } => {
            let (parsed, bytes) = load_config(&config)?;
            let (path, last) = pipeline::simulate_seir(&parsed, &bytes)?;
            println!(
                "day {}: S {:.1} E {:.1} I {:.1} R {:.1} D {:.1}",
                last.day, last.susceptible, last.exposed, last.infected, last.removed,
                last.deceased
            );
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::DeriveRn { config } => {
            let (parsed, bytes) = load_config(&config)?;
            let path = pipeline::derive_rn(&parsed, &bytes)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Verify { seed } => {
            let report = verify::run_synthetic_suite(seed);
            print!("{}", report.render());
            if report.all_passed() {
                Ok(())
            } else {
                Err(CliError::validation(
                    "verify",
                    "one or more checks failed".to_string(),
                ))
            }
        }
    }
}

/// Parses arguments, runs the chosen subcommand, and maps failures to the
/// documented exit codes (1 validation, 2 data, 3 numerical). Bad arguments
/// count as validation failures; `--help`/`--version` exit 0.
pub fn run() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.class.code())
        }
    }
}
