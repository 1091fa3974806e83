use std::io::Write;

use serde::Serialize;
use serde_json::Value;

use crate::config::{Format, RunConfig};
use crate::CliError;

/// One asserted inequality and whether it held.
#[derive(Debug, Clone, Serialize)]
pub struct Flag {
    pub name: String,
    pub passed: bool,
}

impl Flag {
    pub fn new(name: impl Into<String>, passed: bool) -> Self {
        Self { name: name.into(), passed }
    }
}

#[derive(Debug, Serialize)]
pub struct Timings {
    pub total_seconds: f64,
}

/// Everything a run writes in JSON form.
#[derive(Debug, Serialize)]
pub struct ResultEnvelope {
    pub version: String,
    pub config: RunConfig,
    pub reports: Value,
    pub checks: Vec<Flag>,
    pub passed: bool,
    pub timings: Timings,
}

/// What a subcommand hands back to `main`.
pub struct Outcome {
    pub reports: Value,
    pub checks: Vec<Flag>,
    /// Rows for `--format csv`; `None` when the command has no table form.
    pub table: Option<Table>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

/// Full precision, round-trippable.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

pub fn to_value<T: Serialize>(v: &T) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Output(e.to_string()))
}

pub fn version() -> String {
    match option_env!("STEININFO_GIT_REV") {
        Some(rev) => format!("{}+{rev}", env!("CARGO_PKG_VERSION")),
        None => env!("CARGO_PKG_VERSION").to_string(),
    }
}

pub fn render(cfg: &RunConfig, outcome: Outcome, seconds: f64) -> Result<String, CliError> {
    let passed = outcome.passed();
    match (cfg.format, outcome.table) {
        (Format::Csv, Some(table)) => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let io = |e: csv::Error| CliError::Output(e.to_string());
            w.write_record(&table.header).map_err(io)?;
            for row in &table.rows {
                w.write_record(row).map_err(io)?;
            }
            let bytes = w.into_inner().map_err(|e| CliError::Output(e.to_string()))?;
            String::from_utf8(bytes).map_err(|e| CliError::Output(e.to_string()))
        }
        _ => {
            let env = ResultEnvelope {
                version: version(),
                config: cfg.clone(),
                reports: outcome.reports,
                checks: outcome.checks,
                passed,
                timings: Timings { total_seconds: if cfg.canonical { 0.0 } else { seconds } },
            };
            let mut s = serde_json::to_string_pretty(&env).map_err(|e| CliError::Output(e.to_string()))?;
            s.push('\n');
            Ok(s)
        }
    }
}

pub fn emit(cfg: &RunConfig, text: &str) -> Result<(), CliError> {
    match &cfg.out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Output(format!("{}: {e}", path.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|e| CliError::Output(e.to_string()))
        }
    }
}
