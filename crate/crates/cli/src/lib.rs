//! Command-line driver for lacelab experiments.
//!
//! Every run produces a JSON document with the parameters, version tag, seed,
//! result and a list of checks. Sweeps also produce a CSV table with `x`,
//! `y`, `yerr` and `note` columns. Exit status is 0 on success, 1 on invalid
//! input and 2 when a check fails.

pub mod acceptance;
pub mod commands;
pub mod output;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Parser;
use serde::Deserialize;
use serde_json::Value;

use commands::Command;
use output::{csv_table, Sink, OUT_DIR_ENV};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_CHECK_FAILED: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "lacelab", version, about = "Lace-expansion numerical laboratory")]
pub struct Cli {
    /// Output path for the JSON document; a CSV table goes next to it.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

/// A complete run described in a file.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub subcommand: String,
    #[serde(default)]
    pub parameters: serde_json::Map<String, Value>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentSpec {
    /// Equivalent command-line arguments.
    pub fn to_args(&self) -> Vec<String> {
        let mut args = vec!["lacelab".to_string(), self.subcommand.clone()];
        for (key, value) in &self.parameters {
            let flag = format!("--{key}");
            match value {
                Value::Bool(true) => args.push(flag),
                Value::Bool(false) | Value::Null => {}
                Value::Array(items) => {
                    args.push(flag);
                    args.push(items.iter().map(scalar).collect::<Vec<_>>().join(","));
                }
                v => {
                    args.push(flag);
                    args.push(scalar(v));
                }
            }
        }
        if let Some(seed) = self.seed {
            args.push("--seed".into());
            args.push(seed.to_string());
        }
        if let Some(out) = &self.output {
            args.push("--out".into());
            args.push(out.display().to_string());
        }
        args
    }
}

fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Loads an experiment file and runs it.
pub fn run_spec_file(path: &Path, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let parsed = std::fs::read_to_string(path)
        .map_err(|e| e.to_string())
        .and_then(|t| serde_json::from_str::<ExperimentSpec>(&t).map_err(|e| e.to_string()));
    match parsed {
        Ok(spec) => run(spec.to_args(), stdout, stderr),
        Err(e) => {
            let _ = writeln!(stderr, "error: experiment file {}: {e}", path.display());
            EXIT_INVALID
        }
    }
}

/// Parses arguments, runs the subcommand, writes the outputs and returns the exit status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(text.as_bytes())
            } else {
                stdout.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let name = cli.command.name();
    let run = match cli.command.execute() {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_INVALID;
        }
    };
    for line in &run.log {
        let _ = writeln!(stderr, "{line}");
    }
    let table = match run.table.as_deref().map(csv_table).transpose() {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(stderr, "error: writing table: {e}");
            return EXIT_INVALID;
        }
    };
    let sink = Sink::resolve(
        cli.out.as_deref(),
        name,
        std::env::var_os(OUT_DIR_ENV).map(PathBuf::from),
    );
    if let Err(e) = sink.write(&run.doc, table.as_deref(), stdout) {
        let _ = writeln!(stderr, "error: writing output: {e}");
        return EXIT_INVALID;
    }
    for c in run.doc.checks.iter().filter(|c| !c.holds) {
        let _ = writeln!(stderr, "check failed: {}: {}", c.name, c.detail);
    }
    if run.doc.passed {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    }
}
