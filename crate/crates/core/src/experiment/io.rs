//! CSV tables and the JSON report.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// A header plus string cells; what every experiment writes and what
/// `read_table` gives back.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Cell `(row, column name)` parsed as a float; empty cells are `None`.
    pub fn float(&self, row: usize, name: &str) -> Result<Option<f64>> {
        let j = self
            .column(name)
            .ok_or_else(|| Error::InvalidArgument(format!("no column named {name}")))?;
        parse_cell(&self.rows[row][j])
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_path(path)?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Reads a headed CSV file. Every row must have the header's width.
pub fn read_table(path: &Path) -> Result<Table> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec?.iter().map(str::to_string).collect());
    }
    Ok(Table { header, rows })
}

/// Shortest text that parses back to the same float. Plain decimal in the
/// everyday range, exponent form outside it.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-5..1e16).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub fn parse_cell(s: &str) -> Result<Option<f64>> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<f64>()
        .map(Some)
        .map_err(|_| Error::InvalidArgument(format!("cannot parse {s:?} as a number")))
}

/// Numeric columns of a data file, in the order of `names`.
pub(crate) fn numeric_columns(t: &Table, names: &[String], path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(names.len());
    for name in names {
        let j = t
            .column(name)
            .ok_or_else(|| Error::Config(format!("{}: missing column {name}", path.display())))?;
        let col = t
            .rows
            .iter()
            .enumerate()
            .map(|(i, row)| match parse_cell(&row[j]) {
                Ok(Some(v)) => Ok(v),
                _ => Err(Error::Config(format!(
                    "{}: row {} column {name} is not a number",
                    path.display(),
                    i + 1
                ))),
            })
            .collect::<Result<Vec<f64>>>()?;
        out.push(col);
    }
    Ok(out)
}

/// Data-file read whose failures are reported as configuration errors.
pub(crate) fn read_input(path: &Path) -> Result<Table> {
    read_table(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.0, -0.0, 1.0, 0.1, 1.0 / 3.0, 1e-7, -2.5e-300, 1e16, 6.02e23, 12345.678, f64::MIN_POSITIVE] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(fmt_f64(0.25), "0.25");
        assert_eq!(fmt_f64(1e-7), "1e-7");
        assert_eq!(fmt_opt(None), "");
    }

    #[test]
    fn quoting_survives_a_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut t = Table::new(["label", "value"]);
        t.push(vec!["a,b \"quoted\"".into(), fmt_f64(0.1)]);
        t.push(vec!["line\nbreak".into(), String::new()]);
        t.write(&path).unwrap();
        let back = read_table(&path).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.float(0, "value").unwrap(), Some(0.1));
        assert_eq!(back.float(1, "value").unwrap(), None);
    }
}
