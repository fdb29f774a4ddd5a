//! CSV writers and readers with fixed schemas.

use std::fmt::Display;
use std::fs::File;
use std::path::Path;

use serde::Serialize;

use crate::error::{CliError, CliResult};

pub const SUMMARY_FILE: &str = "summary.csv";

/// Writes `rows` with a header taken from the field names of `T`.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Key/value summary written as `summary.csv`, one row per entry in
/// insertion order.
#[derive(Debug, Default)]
pub struct Summary {
    entries: Vec<(String, String)>,
}

impl Summary {
    pub fn new(command: &str) -> Self {
        let mut s = Self::default();
        s.add("command", command);
        s
    }

    pub fn add(&mut self, key: &str, value: impl Display) -> &mut Self {
        self.entries.push((key.to_string(), value.to_string()));
        self
    }

    pub fn add_opt(&mut self, key: &str, value: Option<impl Display>) -> &mut Self {
        let text = value.map(|v| v.to_string()).unwrap_or_default();
        self.entries.push((key.to_string(), text));
        self
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn write(&self, dir: &Path) -> CliResult<()> {
        let rows: Vec<SummaryRow> = self
            .entries
            .iter()
            .map(|(key, value)| SummaryRow { key, value })
            .collect();
        write_csv(&dir.join(SUMMARY_FILE), &rows)
    }
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    key: &'a str,
    value: &'a str,
}

/// A CSV file read into a header and string records.
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<csv::StringRecord>,
}

impl Table {
    pub fn read(path: &Path) -> CliResult<Self> {
        let file = File::open(path)
            .map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))?;
        let mut r = csv::Reader::from_reader(file);
        let headers = r.headers()?.iter().map(str::to_string).collect();
        let rows = r.records().collect::<Result<Vec<_>, _>>()?;
        Ok(Self { headers, rows })
    }

    pub fn column(&self, name: &str) -> CliResult<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Data(format!("missing column {name:?}")))
    }

    pub fn optional_column(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    pub fn f64_at(&self, row: usize, col: usize) -> CliResult<f64> {
        let text = self.rows[row].get(col).unwrap_or("").trim();
        text.parse()
            .map_err(|_| CliError::Data(format!("row {}: {text:?} is not a number", row + 1)))
    }
}
