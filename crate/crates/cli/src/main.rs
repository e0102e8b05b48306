use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use committee_flow_cli::{execute, parse_config, CliError, Command};

/// Simulations and order-parameter dynamics of two-layer teacher-student networks.
#[derive(Debug, Parser)]
#[command(name = "committee-flow", version)]
struct Args {
    /// simulate, ode, sweep, verify-theorem1, moments-check or asymptotics.
    command: Command,
    /// Configuration file with `[section]` headers and `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Settings as `key=value`, applied over the file.
    overrides: Vec<String>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

/// Returns whether every grid point succeeded.
fn run(args: &Args) -> Result<bool, CliError> {
    let text = match &args.config {
        Some(path) => fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?,
        None => String::new(),
    };
    let spec = parse_config(args.command, &text, &args.overrides)?;
    let (outcome, written) = execute(&spec)?;
    for path in &written.csv {
        println!("wrote {}", path.display());
    }
    println!("wrote {}", written.manifest.display());
    for note in &outcome.notes {
        println!("{note}");
    }
    for failure in &outcome.failures {
        eprintln!("failed: {failure}");
    }
    Ok(outcome.failures.is_empty())
}
