//! Prompt templates and the table excerpts spliced into them.

use std::collections::HashSet;
use std::path::Path;

use serde_json::{json, Value};

use crate::table::{CellValue, Table};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Templates {
    pub select_columns: String,
    pub quality_report: String,
    pub choose_operation: String,
    pub arguments: String,
    pub direct: String,
}

impl Default for Templates {
    fn default() -> Self {
        Self {
            select_columns: include_str!("../../prompts/select_columns.txt").to_string(),
            quality_report: include_str!("../../prompts/quality_report.txt").to_string(),
            choose_operation: include_str!("../../prompts/choose_operation.txt").to_string(),
            arguments: include_str!("../../prompts/arguments.txt").to_string(),
            direct: include_str!("../../prompts/direct.txt").to_string(),
        }
    }
}

impl Templates {
    /// Defaults overridden by any `<name>.txt` present in `dir`.
    pub fn from_dir(dir: &Path) -> std::io::Result<Self> {
        let mut t = Self::default();
        for (name, slot) in [
            ("select_columns", &mut t.select_columns),
            ("quality_report", &mut t.quality_report),
            ("choose_operation", &mut t.choose_operation),
            ("arguments", &mut t.arguments),
            ("direct", &mut t.direct),
        ] {
            let path = dir.join(format!("{name}.txt"));
            if path.exists() {
                *slot = std::fs::read_to_string(path)?;
            }
        }
        Ok(t)
    }
}

/// Substitutes `{name}` slots. Unknown braces are left alone so templates can
/// contain literal JSON.
pub fn render(template: &str, slots: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (name, value) in slots {
        out = out.replace(&format!("{{{name}}}"), value);
    }
    out
}

fn distinct_rendered(values: &[CellValue]) -> Vec<String> {
    let mut seen = HashSet::new();
    values
        .iter()
        .filter(|v| !v.is_missing())
        .map(CellValue::render)
        .filter(|s| seen.insert(s.clone()))
        .collect()
}

/// Column overview for the selection prompt: caption, names, and the first
/// few distinct values of each column.
pub fn selection_block(table: &Table, preview: usize) -> String {
    let rows: Vec<Value> = table
        .columns()
        .iter()
        .enumerate()
        .map(|(c, name)| {
            let values: Vec<CellValue> = (0..table.row_count()).map(|r| table.cell(r, c).clone()).collect();
            let mut row = vec![Value::String(name.clone())];
            row.extend(distinct_rendered(&values).into_iter().take(preview).map(Value::String));
            Value::Array(row)
        })
        .collect();
    let block = json!({
        "table_caption": table.provenance().unwrap_or("table"),
        "columns": table.columns(),
        "table_column_priority": rows,
    });
    serde_json::to_string_pretty(&block).expect("json values serialize")
}

/// Distinct values of one column handed out in prompt-sized batches. Each
/// batch takes the first unseen values in row order; once every value has
/// been shown the cycle starts over.
#[derive(Debug, Clone, Default)]
pub struct ColumnSampler {
    shown: HashSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub values: Vec<String>,
    pub distinct_total: usize,
    pub missing: usize,
    pub rows: usize,
}

impl ColumnSampler {
    pub fn next_sample(&mut self, values: &[CellValue], size: usize) -> Sample {
        let distinct = distinct_rendered(values);
        if distinct.iter().all(|v| self.shown.contains(v)) {
            self.shown.clear();
        }
        let batch: Vec<String> = distinct
            .iter()
            .filter(|v| !self.shown.contains(*v))
            .take(size)
            .cloned()
            .collect();
        self.shown.extend(batch.iter().cloned());
        Sample {
            values: batch,
            distinct_total: distinct.len(),
            missing: values.iter().filter(|v| v.is_missing()).count(),
            rows: values.len(),
        }
    }
}

impl Sample {
    pub fn block(&self, column: &str) -> String {
        let mut out = format!("| {column} |\n");
        for v in &self.values {
            out.push_str(&format!("| {v} |\n"));
        }
        out.push_str(&format!(
            "({} of {} distinct values shown; {} of {} cells missing)",
            self.values.len(),
            self.distinct_total,
            self.missing,
            self.rows
        ));
        out
    }
}

/// Whole table as pipe-separated rows, for the single-prompt mode.
pub fn full_table_block(table: &Table, max_rows: usize) -> String {
    let mut out = format!("| {} |\n", table.columns().join(" | "));
    for row in table.rows().iter().take(max_rows) {
        let cells: Vec<String> = row.iter().map(CellValue::render).collect();
        out.push_str(&format!("| {} |\n", cells.join(" | ")));
    }
    if table.row_count() > max_rows {
        out.push_str(&format!("({} of {} rows shown)\n", max_rows, table.row_count()));
    }
    out
}
