//! Immutable tabular data model: typed cells, rectangular tables, CSV in/out.
//!
//! Ingestion is string-typed. A loaded table only ever contains `Text` and
//! `Missing` cells; `Number` and `Date` cells appear only after the `numeric`
//! and `date` operations run.

use std::fmt;

use chrono::{DateTime, Utc};
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric;

/// Canonical rendering used for every `Date` cell.
pub const DATE_FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TableError {
    #[error("input is not valid UTF-8 (byte offset {offset})")]
    Encoding { offset: usize },
    #[error("input is empty")]
    EmptyInput,
    #[error("row {row} has {found} fields, expected {expected}")]
    RowArity {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("duplicate column name {0:?}")]
    DuplicateColumn(String),
    #[error("unknown column {name:?} (available: {})", available.join(", "))]
    UnknownColumn {
        name: String,
        available: Vec<String>,
    },
    #[error("malformed CSV: {0}")]
    Csv(String),
}

/// A single cell.
///
/// `Number` is always finite (a `Decimal` cannot hold NaN or infinity) and
/// `Date` carries second precision in UTC.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum CellValue {
    Text(String),
    Number(Decimal),
    Date(DateTime<Utc>),
    Missing,
}

impl CellValue {
    pub fn text(s: impl Into<String>) -> Self {
        CellValue::Text(s.into())
    }

    pub fn is_missing(&self) -> bool {
        matches!(self, CellValue::Missing)
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            CellValue::Text(s) => Some(s),
            _ => None,
        }
    }

    /// Numeric reading of the cell: a `Number`, or `Text` that matches the
    /// numeric grammar.
    pub fn numeric_value(&self) -> Option<Decimal> {
        match self {
            CellValue::Number(d) => Some(*d),
            CellValue::Text(s) => numeric::parse(s),
            _ => None,
        }
    }

    /// Canonical text rendering. `Missing` renders as the empty string.
    pub fn render(&self) -> String {
        match self {
            CellValue::Text(s) => s.clone(),
            CellValue::Number(d) => numeric::render(*d),
            CellValue::Date(dt) => dt.format(DATE_FORMAT).to_string(),
            CellValue::Missing => String::new(),
        }
    }
}

impl fmt::Display for CellValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl From<&str> for CellValue {
    fn from(s: &str) -> Self {
        CellValue::Text(s.to_string())
    }
}

/// Parses a canonical `YYYY-MM-DDTHH:MM:SSZ` rendering back into an instant.
pub fn parse_canonical_date(s: &str) -> Option<DateTime<Utc>> {
    chrono::NaiveDateTime::parse_from_str(s, DATE_FORMAT)
        .ok()
        .map(|naive| naive.and_utc())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadOptions {
    pub delimiter: u8,
    pub has_header: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            delimiter: b',',
            has_header: true,
        }
    }
}

/// A rectangular grid of cells with unique, ordered column names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<CellValue>>,
    provenance: Option<String>,
}

impl Table {
    pub fn new(columns: Vec<String>, rows: Vec<Vec<CellValue>>) -> Result<Self, TableError> {
        for (i, name) in columns.iter().enumerate() {
            if columns[..i].contains(name) {
                return Err(TableError::DuplicateColumn(name.clone()));
            }
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != columns.len() {
                return Err(TableError::RowArity {
                    row: i + 1,
                    expected: columns.len(),
                    found: row.len(),
                });
            }
        }
        Ok(Self {
            columns,
            rows,
            provenance: None,
        })
    }

    pub fn with_provenance(mut self, source: impl Into<String>) -> Self {
        self.provenance = Some(source.into());
        self
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<CellValue>] {
        &self.rows
    }

    pub fn provenance(&self) -> Option<&str> {
        self.provenance.as_deref()
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn column_count(&self) -> usize {
        self.columns.len()
    }

    pub fn cell(&self, row: usize, column: usize) -> &CellValue {
        &self.rows[row][column]
    }

    pub fn column_index(&self, name: &str) -> Result<usize, TableError> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| TableError::UnknownColumn {
                name: name.to_string(),
                available: self.columns.clone(),
            })
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.columns.iter().any(|c| c == name)
    }

    pub fn get_column(&self, name: &str) -> Result<ColumnView, TableError> {
        let idx = self.column_index(name)?;
        Ok(ColumnView {
            name: name.to_string(),
            values: self.rows.iter().map(|r| r[idx].clone()).collect(),
        })
    }

    /// Returns a new table where every cell of `column` is replaced by
    /// `f(cell)`, together with the number of cells whose value changed.
    pub fn map_column<F>(&self, column: &str, mut f: F) -> Result<(Table, usize), TableError>
    where
        F: FnMut(&CellValue) -> CellValue,
    {
        let idx = self.column_index(column)?;
        let mut changed = 0;
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let mut row = row.clone();
                let next = f(&row[idx]);
                if next != row[idx] {
                    changed += 1;
                    row[idx] = next;
                }
                row
            })
            .collect();
        Ok((
            Table {
                columns: self.columns.clone(),
                rows,
                provenance: self.provenance.clone(),
            },
            changed,
        ))
    }

    /// Returns a copy with one cell replaced.
    pub fn with_cell(&self, row: usize, column: usize, value: CellValue) -> Table {
        let mut next = self.clone();
        next.rows[row][column] = value;
        next
    }

    /// Serializes to RFC-4180 CSV with a header row and `\n` line endings.
    pub fn to_csv(&self) -> String {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .quote_style(csv::QuoteStyle::Necessary)
            .from_writer(Vec::new());
        // Writing into a Vec cannot fail.
        writer.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            writer
                .write_record(row.iter().map(CellValue::render))
                .expect("in-memory write");
        }
        let bytes = writer.into_inner().expect("in-memory flush");
        String::from_utf8(bytes).expect("rendered cells are UTF-8")
    }
}

/// One column's values in row order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnView {
    pub name: String,
    pub values: Vec<CellValue>,
}

impl ColumnView {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Loads a CSV payload. Empty fields become `Missing`; everything else is
/// kept verbatim as `Text`.
pub fn load_table(bytes: &[u8], options: LoadOptions) -> Result<Table, TableError> {
    let text = std::str::from_utf8(bytes).map_err(|e| TableError::Encoding {
        offset: e.valid_up_to(),
    })?;
    if text.trim().is_empty() {
        return Err(TableError::EmptyInput);
    }
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());

    let mut records = reader.records();
    let mut columns: Vec<String> = Vec::new();
    let mut rows: Vec<Vec<CellValue>> = Vec::new();
    let mut pending_first: Option<csv::StringRecord> = None;

    if options.has_header {
        match records.next() {
            Some(rec) => {
                let rec = rec.map_err(|e| TableError::Csv(e.to_string()))?;
                columns = rec.iter().map(str::to_string).collect();
            }
            None => return Err(TableError::EmptyInput),
        }
    } else if let Some(rec) = records.next() {
        let rec = rec.map_err(|e| TableError::Csv(e.to_string()))?;
        columns = (1..=rec.len()).map(|i| format!("column_{i}")).collect();
        pending_first = Some(rec);
    }

    for (i, name) in columns.iter().enumerate() {
        if columns[..i].contains(name) {
            return Err(TableError::DuplicateColumn(name.clone()));
        }
    }

    let data = pending_first.into_iter().map(Ok).chain(records);
    for (i, rec) in data.enumerate() {
        let rec = rec.map_err(|e| TableError::Csv(e.to_string()))?;
        if rec.len() != columns.len() {
            return Err(TableError::RowArity {
                row: i + 1,
                expected: columns.len(),
                found: rec.len(),
            });
        }
        rows.push(
            rec.iter()
                .map(|field| {
                    if field.is_empty() {
                        CellValue::Missing
                    } else {
                        CellValue::Text(field.to_string())
                    }
                })
                .collect(),
        );
    }

    Table::new(columns, rows)
}

/// Loads with default options (comma delimiter, header row).
pub fn load_csv(bytes: &[u8]) -> Result<Table, TableError> {
    load_table(bytes, LoadOptions::default())
}
