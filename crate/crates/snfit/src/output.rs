//! Report envelope, JSON/CSV writers and number formatting.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::commands::{Command, RunConfig};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    /// Some items failed; see the per-item status in the result.
    Partial,
}

/// Every report: what ran, with which settings, and the result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report<T> {
    pub software: String,
    pub version: String,
    pub command: Command,
    pub config: RunConfig,
    pub seed: Option<u64>,
    pub status: Status,
    /// Only recorded with `--timing`, so that reruns stay byte-identical by default.
    pub wall_clock_seconds: Option<f64>,
    pub result: T,
}

impl<T> Report<T> {
    pub fn new(config: &RunConfig, status: Status, result: T) -> Self {
        Report {
            software: "snfit".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: config.command,
            config: config.clone(),
            seed: config.seed,
            status,
            wall_clock_seconds: None,
            result,
        }
    }
}

/// A flat table for CSV output.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::io("<csv buffer>", e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Results that have a CSV rendering.
pub trait Tabular {
    fn table(&self) -> Table;
}

/// 10 significant digits, `.` as decimal separator, no grouping. Plain notation in
/// `[1e−5, 1e15)`, exponent notation outside; empty for missing values.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let rounded: f64 = format!("{x:.9e}").parse().expect("formatted float parses");
    let a = rounded.abs();
    if (1e-5..1e15).contains(&a) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn to_json<T: Serialize>(report: &Report<T>) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

/// Renders `report` in `format` and writes it to `out`, or stdout when `None`.
pub fn emit<T: Serialize + Tabular>(report: &Report<T>, format: Format, out: Option<&Path>) -> Result<(), CliError> {
    let text = match format {
        Format::Json => to_json(report)?,
        Format::Csv => report.result.table().to_csv()?,
    };
    match out {
        Some(path) => fs::write(path, text).map_err(|e| CliError::io(path, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::io("<stdout>", e))
        }
    }
}

pub fn read_report<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Report<T>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
