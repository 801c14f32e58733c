use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rr_cli::{load_scenario, run, CliError, RunOptions};
use serde_json::json;

#[derive(Parser)]
#[command(name = "rrsim", version, about = "Finite-size radiation-reaction scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its artifacts.
    Run {
        config: PathBuf,
        /// Output directory (default: the scenario's output.dir).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replace the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Progress messages on stderr.
        #[arg(long)]
        trace: bool,
        /// Force fixed-shape reductions (recorded in the manifest).
        #[arg(long)]
        deterministic_reduce: bool,
    },
    /// Parse and validate a scenario without running it.
    Validate {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            trace,
            deterministic_reduce,
        } => {
            let scenario = load_scenario(&config, seed)?;
            let out = out.unwrap_or_else(|| PathBuf::from(&scenario.output_dir));
            let opts = RunOptions {
                trace,
                deterministic_reduce,
            };
            let artifacts = run(&scenario, &opts, &out)?;
            let files: Vec<&str> = artifacts.iter().map(|a| a.name.as_str()).collect();
            println!("{}", json!({ "status": "ok", "out": out.display().to_string(), "files": files }));
        }
        Command::Validate { config, seed } => {
            let scenario = load_scenario(&config, seed)?;
            println!(
                "{}",
                json!({
                    "status": "ok",
                    "mode": scenario.mode.as_str(),
                    "derived_scenarios": scenario.sweep_scenarios().len(),
                })
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
