//! Tabular results and their CSV / JSON serialization.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Real,
    Complex,
    Integer,
    Text,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Real(f64),
    Complex(C64),
    Integer(i64),
    Text(String),
    Missing,
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Real(x)
    }
}

impl From<C64> for Value {
    fn from(z: C64) -> Self {
        Value::Complex(z)
    }
}

impl From<i64> for Value {
    fn from(n: i64) -> Self {
        Value::Integer(n)
    }
}

impl From<usize> for Value {
    fn from(n: usize) -> Self {
        Value::Integer(n as i64)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.to_owned())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Text(s)
    }
}

impl<T: Into<Value>> From<Option<T>> for Value {
    fn from(v: Option<T>) -> Self {
        v.map_or(Value::Missing, Into::into)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::InvalidParameter(format!("unknown format '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    pub metadata: BTreeMap<String, serde_json::Value>,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Value>>,
}

impl ResultTable {
    pub fn new(columns: Vec<Column>) -> Self {
        Self { metadata: BTreeMap::new(), columns, rows: Vec::new() }
    }

    pub fn with_columns(spec: &[(&str, ColumnKind)]) -> Self {
        Self::new(spec.iter().map(|&(name, kind)| Column { name: name.to_owned(), kind }).collect())
    }

    pub fn push_row(&mut self, row: Vec<Value>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::Schema(format!("row has {} values, table has {} columns", row.len(), self.columns.len())));
        }
        for (value, col) in row.iter().zip(&self.columns) {
            let ok = matches!(
                (value, col.kind),
                (Value::Missing, _)
                    | (Value::Real(_), ColumnKind::Real)
                    | (Value::Complex(_), ColumnKind::Complex)
                    | (Value::Integer(_), ColumnKind::Integer)
                    | (Value::Text(_), ColumnKind::Text)
            );
            if !ok {
                return Err(Error::Schema(format!("value {value:?} does not fit column '{}'", col.name)));
            }
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Header after splitting complex columns into `_re` / `_im`.
    pub fn flat_header(&self) -> Vec<String> {
        let mut out = Vec::new();
        for c in &self.columns {
            match c.kind {
                ColumnKind::Complex => {
                    out.push(format!("{}_re", c.name));
                    out.push(format!("{}_im", c.name));
                }
                _ => out.push(c.name.clone()),
            }
        }
        out
    }

    fn flat_cells(&self, row: &[Value]) -> Vec<String> {
        let mut out = Vec::new();
        for (value, col) in row.iter().zip(&self.columns) {
            match (value, col.kind) {
                (Value::Real(x), _) => out.push(format_real(*x)),
                (Value::Complex(z), _) => {
                    out.push(format_real(z.re));
                    out.push(format_real(z.im));
                }
                (Value::Integer(n), _) => out.push(n.to_string()),
                (Value::Text(s), _) => out.push(s.clone()),
                (Value::Missing, ColumnKind::Complex) => {
                    out.push(String::new());
                    out.push(String::new());
                }
                (Value::Missing, _) => out.push(String::new()),
            }
        }
        out
    }

    /// Real values of a column, skipping missing cells.
    pub fn reals(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self.column_index(name).ok_or_else(|| Error::Schema(format!("missing column '{name}'")))?;
        Ok(self
            .rows
            .iter()
            .filter_map(|r| match &r[idx] {
                Value::Real(x) => Some(*x),
                Value::Integer(n) => Some(*n as f64),
                _ => None,
            })
            .collect())
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_real(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".to_owned()
    } else if x > 0.0 {
        "inf".to_owned()
    } else {
        "-inf".to_owned()
    }
}

pub fn write_csv_to<W: Write>(table: &ResultTable, writer: W) -> std::result::Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(writer);
    w.write_record(table.flat_header())?;
    for row in &table.rows {
        w.write_record(table.flat_cells(row))?;
    }
    w.flush()?;
    Ok(())
}

fn json_real(x: f64) -> serde_json::Value {
    serde_json::Number::from_f64(x).map_or(serde_json::Value::Null, serde_json::Value::Number)
}

pub fn to_json(table: &ResultTable) -> serde_json::Value {
    let rows: Vec<serde_json::Value> = table
        .rows
        .iter()
        .map(|row| {
            let mut cells = Vec::new();
            for (value, col) in row.iter().zip(&table.columns) {
                match (value, col.kind) {
                    (Value::Real(x), _) => cells.push(json_real(*x)),
                    (Value::Complex(z), _) => {
                        cells.push(json_real(z.re));
                        cells.push(json_real(z.im));
                    }
                    (Value::Integer(n), _) => cells.push(json!(n)),
                    (Value::Text(s), _) => cells.push(json!(s)),
                    (Value::Missing, ColumnKind::Complex) => cells.extend([serde_json::Value::Null, serde_json::Value::Null]),
                    (Value::Missing, _) => cells.push(serde_json::Value::Null),
                }
            }
            serde_json::Value::Array(cells)
        })
        .collect();
    json!({
        "metadata": table.metadata,
        "columns": table.flat_header(),
        "rows": rows,
    })
}

pub fn write_table(table: &ResultTable, format: Format, path: &Path) -> Result<()> {
    let io_err = |source| Error::Io { path: path.to_path_buf(), source };
    let file = File::create(path).map_err(io_err)?;
    let mut out = BufWriter::new(file);
    match format {
        Format::Csv => write_csv_to(table, &mut out).map_err(|source| Error::Csv { path: path.to_path_buf(), source })?,
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, &to_json(table))
                .map_err(|source| Error::Json { path: path.to_path_buf(), source })?;
            out.write_all(b"\n").map_err(io_err)?;
        }
    }
    out.flush().map_err(io_err)
}

/// Header and raw cells of a CSV file.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = r.headers().map_err(csv_err)?.iter().map(str::to_owned).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec.map_err(csv_err)?.iter().map(str::to_owned).collect());
    }
    Ok((header, rows))
}
