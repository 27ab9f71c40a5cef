//! Report assembly and writing.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use capaf::Tolerances;
use serde::Serialize;
use serde_json::Value;

use crate::config::{Format, RunConfig};
use crate::error::CliError;

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub command: String,
    /// The identity or inequality under test, in words.
    pub identity: String,
    pub config: RunConfig,
    pub tolerances: Tolerances,
    pub passed: bool,
    pub summary: BTreeMap<String, Value>,
    pub result: Value,
}

#[derive(Clone, Debug, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

/// Shortest round-trip representation, in exponent form outside `[1e-4, 1e7)`.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e7).contains(&a) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub struct Output {
    pub report: Report,
    pub table: Table,
    /// Additional CSV files (name without extension, table) for plotting.
    pub extra: Vec<(String, Table)>,
}

#[derive(Serialize)]
struct Meta {
    command: String,
    created_unix: u64,
    threads: usize,
    version: &'static str,
}

fn pretty(v: &impl Serialize) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

pub fn emit(cfg: &RunConfig, out: &Output) -> Result<(), CliError> {
    let name = &cfg.command;
    match &cfg.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            write(dir, &format!("{name}.json"), &pretty(&out.report)?)?;
            if cfg.format == Format::Csv {
                write(dir, &format!("{name}.csv"), &out.table.to_csv()?)?;
            }
            for (extra, table) in &out.extra {
                write(dir, &format!("{extra}.csv"), &table.to_csv()?)?;
            }
            let meta = Meta {
                command: name.clone(),
                created_unix: SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0),
                threads: rayon::current_num_threads(),
                version: env!("CARGO_PKG_VERSION"),
            };
            write(dir, &format!("{name}.meta.json"), &pretty(&meta)?)?;
        }
        None => {
            let text = match cfg.format {
                Format::Json => pretty(&out.report)?,
                Format::Csv => out.table.to_csv()?,
            };
            std::io::stdout().lock().write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

fn write(dir: &Path, file: &str, contents: &str) -> Result<(), CliError> {
    std::fs::write(dir.join(file), contents)?;
    Ok(())
}
