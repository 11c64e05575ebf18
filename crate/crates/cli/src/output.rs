//! Result documents and where they are written.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "LACELAB_OUT";

pub const VERSION: &str = concat!("lacelab ", env!("CARGO_PKG_VERSION"));

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub holds: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, holds: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            holds,
            detail: detail.into(),
        }
    }
}

/// Everything one run emits. `metadata` holds run-dependent data such as
/// wall-clock timings; the other fields are a pure function of the inputs.
#[derive(Clone, Debug, Serialize)]
pub struct Document {
    pub subcommand: String,
    pub version: String,
    pub seed: Option<u64>,
    pub params: Value,
    /// How the numbers in `result` are qualified: exact, truncation bound, or standard error.
    pub uncertainty: String,
    pub result: Value,
    pub checks: Vec<Check>,
    pub passed: bool,
    #[serde(skip_serializing_if = "Value::is_null")]
    pub metadata: Value,
}

impl Document {
    pub fn new(
        subcommand: &str,
        seed: Option<u64>,
        params: Value,
        uncertainty: &str,
        result: Value,
        checks: Vec<Check>,
    ) -> Self {
        Self {
            subcommand: subcommand.into(),
            version: VERSION.into(),
            seed,
            params,
            uncertainty: uncertainty.into(),
            passed: checks.iter().all(|c| c.holds),
            result,
            checks,
            metadata: Value::Null,
        }
    }
}

/// One row of a plot-data table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Row {
    pub x: f64,
    pub y: f64,
    pub yerr: f64,
    pub note: String,
}

pub fn csv_table(rows: &[Row]) -> std::io::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Resolved destinations for one run.
#[derive(Clone, Debug, PartialEq)]
pub enum Sink {
    Stdout,
    Files { json: PathBuf, csv: PathBuf },
}

impl Sink {
    pub fn resolve(out: Option<&Path>, subcommand: &str, env_dir: Option<PathBuf>) -> Self {
        let json = match (out, env_dir) {
            (Some(p), _) => p.to_path_buf(),
            (None, Some(dir)) => dir.join(format!("{subcommand}.json")),
            (None, None) => return Sink::Stdout,
        };
        Sink::Files {
            csv: json.with_extension("csv"),
            json,
        }
    }

    pub fn write(&self, doc: &Document, table: Option<&str>, stdout: &mut dyn Write) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(doc)? + "\n";
        match self {
            Sink::Stdout => stdout.write_all(text.as_bytes()),
            Sink::Files { json, csv } => {
                if let Some(dir) = json.parent().filter(|d| !d.as_os_str().is_empty()) {
                    std::fs::create_dir_all(dir)?;
                }
                std::fs::write(json, text)?;
                if let Some(t) = table {
                    std::fs::write(csv, t)?;
                }
                Ok(())
            }
        }
    }
}
