//! Configuration, grid expansion and output for the `committee-flow` binary.

pub mod config;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod output;
pub mod presets;

pub use config::{parse_config, Command, ConfigError, ExperimentSpec};
pub use error::CliError;
pub use experiment::{output_tag, run_experiment};
pub use output::{write_outputs, Outcome, Table, Written};
pub use presets::Figure;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "COMMITTEE_FLOW_THREADS";

/// Worker count from [`THREADS_ENV`], `None` when unset.
pub fn thread_cap() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(CliError::Threads(format!("{THREADS_ENV}: {e}"))),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Threads(format!(
                "{THREADS_ENV} must be a positive integer, got '{s}'"
            ))),
        },
    }
}

/// Runs `spec` on a pool capped by [`THREADS_ENV`] and writes its outputs.
pub fn execute(spec: &ExperimentSpec) -> Result<(Outcome, Written), CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap()? {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Threads(e.to_string()))?;
    let outcome = pool.install(|| run_experiment(spec))?;
    let written = write_outputs(spec, &output_tag(spec), &outcome)?;
    Ok((outcome, written))
}
