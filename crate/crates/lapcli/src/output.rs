//! CSV tables with a versioned schema line, and JSON summaries.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::error::CliError;

/// A table in row-major order; cells are already formatted.
#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: Vec<&'static str>) -> Self {
        Self { name: name.into(), columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Shortest round-trip form, so equal floats give equal bytes.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn write_table(dir: &Path, table: &Table) -> Result<(), CliError> {
    let path = dir.join(format!("{}.csv", table.name));
    let mut file = fs::File::create(path)?;
    writeln!(file, "# schema: lapcli/{}/v1", table.name)?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(file);
    w.write_record(&table.columns)?;
    for r in &table.rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
pub struct Summary<'a, C: Serialize> {
    pub command: &'a str,
    pub version: &'a str,
    pub family_version: &'a str,
    pub config: &'a C,
    pub results: Value,
    pub status: &'a str,
    pub exit_code: i32,
    pub wall_clock_seconds: f64,
}

pub fn write_summary<C: Serialize>(dir: &Path, summary: &Summary<C>) -> Result<(), CliError> {
    let path = dir.join(format!("{}.json", summary.command));
    let mut s = serde_json::to_string_pretty(summary)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}
