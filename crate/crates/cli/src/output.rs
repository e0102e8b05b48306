//! CSV tables and run manifests.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::config::ExperimentSpec;
use crate::error::CliError;

/// Rows under a fixed header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: &'static [&'static str],
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: impl Into<String>, header: &'static [&'static str]) -> Self {
        Self {
            name: name.into(),
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// RFC 4180 text with `\n` line ends.
    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        writer.write_record(self.header)?;
        for row in &self.rows {
            writer.write_record(row)?;
        }
        let bytes = writer
            .into_inner()
            .map_err(|e| CliError::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))
    }
}

/// Shortest text that parses back to the same value, in exponent form below
/// `1e-4` and from `1e15` on.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

/// Empty for a missing value.
pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// What a finished command produced.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Outcome {
    pub tables: Vec<Table>,
    /// Failed grid points, one line each.
    pub failures: Vec<String>,
    /// Run seed of every grid point.
    pub seeds: Vec<String>,
    /// Derived results worth a line on the console, such as fitted exponents.
    pub notes: Vec<String>,
}

/// Paths written by [`write_outputs`].
#[derive(Debug, Clone, PartialEq)]
pub struct Written {
    pub csv: Vec<PathBuf>,
    pub manifest: PathBuf,
}

/// Writes every table and a manifest named after `tag` into the output directory.
pub fn write_outputs(
    spec: &ExperimentSpec,
    tag: &str,
    outcome: &Outcome,
) -> Result<Written, CliError> {
    let dir = &spec.output_dir;
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    let mut csv = Vec::new();
    for table in &outcome.tables {
        let path = dir.join(format!("{}.csv", table.name));
        write_file(&path, &table.to_csv()?)?;
        csv.push(path);
    }
    let manifest = dir.join(format!("{tag}.manifest"));
    write_file(&manifest, &manifest_text(spec, outcome, &csv))?;
    Ok(Written { csv, manifest })
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

/// Manifest text: comments with provenance and status, then every resolved
/// setting in configuration syntax, so `--config` on the manifest repeats the run.
pub fn manifest_text(spec: &ExperimentSpec, outcome: &Outcome, csv: &[PathBuf]) -> String {
    let created = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# committee-flow {} manifest",
        env!("CARGO_PKG_VERSION")
    );
    let _ = writeln!(out, "# command: {}", spec.command);
    let _ = writeln!(out, "# created_unix: {created}");
    for path in csv {
        let _ = writeln!(out, "# output: {}", path.display());
    }
    if outcome.failures.is_empty() {
        let _ = writeln!(out, "# status: ok");
    } else {
        let _ = writeln!(out, "# status: {} failed", outcome.failures.len());
    }
    for failure in &outcome.failures {
        let _ = writeln!(out, "# failed: {failure}");
    }
    for note in &outcome.notes {
        let _ = writeln!(out, "# result: {note}");
    }
    for seed in &outcome.seeds {
        let _ = writeln!(out, "# run seed: {seed}");
    }
    for (section, entries) in spec.settings.by_section() {
        let _ = writeln!(out, "\n[{section}]");
        for (key, value) in entries {
            let _ = writeln!(out, "{key} = {value}");
        }
    }
    out
}
