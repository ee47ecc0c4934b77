//! Recorded operation sequences and their replay history.
//!
//! A [`Workflow`] is an ordered list of [`OpSpec`]s. Replaying it over a
//! source table produces a [`History`] `D0..Dn`, one table per step plus the
//! input. Workflows serialize to the versioned `dcflow/1` JSON format.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::dates::DateParser;
use crate::ops::{self, MassEdit, MassEditSpec, OpError, OpKind, Operation};
use crate::table::Table;

pub const FORMAT_VERSION: &str = "dcflow/1";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WorkflowError {
    #[error("step {step_index} ({op} on {column:?}): {source}")]
    Step {
        step_index: usize,
        op: OpKind,
        column: String,
        #[source]
        source: OpError,
    },
    #[error("schema error at {path}: {reason}")]
    Schema { path: String, reason: String },
    #[error("arguments do not match operation {0}")]
    ArgsMismatch(OpKind),
}

impl WorkflowError {
    fn schema(path: impl Into<String>, reason: impl Into<String>) -> Self {
        WorkflowError::Schema {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// Step index of a replay failure, when there is one.
    pub fn step_index(&self) -> Option<usize> {
        match self {
            WorkflowError::Step { step_index, .. } => Some(*step_index),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OpArgs {
    None,
    MassEdit(MassEditSpec),
    /// Source text of a `regexr_transform` snippet.
    Expression(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpSpec {
    pub step_index: usize,
    pub op: OpKind,
    pub column: String,
    pub args: OpArgs,
    pub rationale: Option<String>,
}

impl OpSpec {
    /// A step without arguments (`upper`, `trim`, `numeric`, `date`).
    pub fn simple(op: OpKind, column: impl Into<String>) -> Self {
        Self {
            step_index: 0,
            op,
            column: column.into(),
            args: OpArgs::None,
            rationale: None,
        }
    }

    pub fn mass_edit(column: impl Into<String>, spec: MassEditSpec) -> Self {
        Self {
            step_index: 0,
            op: OpKind::MassEdit,
            column: column.into(),
            args: OpArgs::MassEdit(spec),
            rationale: None,
        }
    }

    pub fn regexr(column: impl Into<String>, expression: impl Into<String>) -> Self {
        Self {
            step_index: 0,
            op: OpKind::RegexrTransform,
            column: column.into(),
            args: OpArgs::Expression(expression.into()),
            rationale: None,
        }
    }

    pub fn with_rationale(mut self, rationale: impl Into<String>) -> Self {
        self.rationale = Some(rationale.into());
        self
    }

    /// Resolves the step into a runnable operation, parsing any snippet.
    pub fn to_operation(&self, dates: &DateParser) -> Result<Operation, WorkflowError> {
        let op = match (self.op, &self.args) {
            (OpKind::Upper, OpArgs::None) => Operation::Upper,
            (OpKind::Trim, OpArgs::None) => Operation::Trim,
            (OpKind::ToNumeric, OpArgs::None) => Operation::ToNumeric,
            (OpKind::ToDate, OpArgs::None) => Operation::ToDate(dates.clone()),
            (OpKind::MassEdit, OpArgs::MassEdit(spec)) => Operation::MassEdit(spec.clone()),
            (OpKind::RegexrTransform, OpArgs::Expression(src)) => {
                let expr = ops::parse_transform_expr(src).map_err(|e| self.step_error(e.into()))?;
                Operation::RegexrTransform(expr)
            }
            (op, _) => return Err(WorkflowError::ArgsMismatch(op)),
        };
        Ok(op)
    }

    fn step_error(&self, source: OpError) -> WorkflowError {
        WorkflowError::Step {
            step_index: self.step_index,
            op: self.op,
            column: self.column.clone(),
            source,
        }
    }
}

/// Intermediate tables `D0..Dn` of one replay.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct History {
    pub tables: Vec<Table>,
    /// Cells changed by each step; `cells_changed[k]` belongs to step `k + 1`.
    pub cells_changed: Vec<usize>,
}

impl History {
    pub fn initial(&self) -> &Table {
        &self.tables[0]
    }

    pub fn final_table(&self) -> &Table {
        self.tables.last().expect("history always holds the input table")
    }

    pub fn into_final(mut self) -> Table {
        self.tables.pop().expect("history always holds the input table")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Workflow {
    steps: Vec<OpSpec>,
    pub source_table_id: String,
    pub purpose_id: Option<String>,
}

impl Workflow {
    pub fn new(source_table_id: impl Into<String>) -> Self {
        Self {
            steps: Vec::new(),
            source_table_id: source_table_id.into(),
            purpose_id: None,
        }
    }

    pub fn with_purpose(mut self, purpose_id: impl Into<String>) -> Self {
        self.purpose_id = Some(purpose_id.into());
        self
    }

    /// Builds a workflow from steps without a source table. Step indices are
    /// renumbered `1..=n` and arguments are checked; columns are not.
    pub fn from_steps(
        source_table_id: impl Into<String>,
        steps: impl IntoIterator<Item = OpSpec>,
    ) -> Result<Self, WorkflowError> {
        let mut wf = Self::new(source_table_id);
        for mut step in steps {
            step.step_index = wf.steps.len() + 1;
            step.to_operation(&DateParser::default())?;
            if let OpArgs::MassEdit(spec) = &step.args {
                spec.validate().map_err(|e| step.step_error(e))?;
            }
            wf.steps.push(step);
        }
        Ok(wf)
    }

    pub fn steps(&self) -> &[OpSpec] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// First `k` steps as a workflow of their own.
    pub fn prefix(&self, k: usize) -> Workflow {
        Workflow {
            steps: self.steps[..k.min(self.steps.len())].to_vec(),
            source_table_id: self.source_table_id.clone(),
            purpose_id: self.purpose_id.clone(),
        }
    }

    /// Appends `step` after checking it against the table produced by
    /// replaying the current steps over `source`.
    pub fn record(&self, source: &Table, step: OpSpec) -> Result<Workflow, WorkflowError> {
        self.record_with(source, step, &DateParser::default())
    }

    pub fn record_with(
        &self,
        source: &Table,
        mut step: OpSpec,
        dates: &DateParser,
    ) -> Result<Workflow, WorkflowError> {
        let frontier = self.replay_with(source, dates)?.into_final();
        step.step_index = self.steps.len() + 1;
        let op = step.to_operation(dates)?;
        ops::apply(&frontier, &step.column, &op).map_err(|e| step.step_error(e))?;
        let mut next = self.clone();
        next.steps.push(step);
        Ok(next)
    }

    pub fn replay(&self, table: &Table) -> Result<History, WorkflowError> {
        self.replay_with(table, &DateParser::default())
    }

    pub fn replay_with(&self, table: &Table, dates: &DateParser) -> Result<History, WorkflowError> {
        let mut tables = Vec::with_capacity(self.steps.len() + 1);
        let mut cells_changed = Vec::with_capacity(self.steps.len());
        tables.push(table.clone());
        for step in &self.steps {
            let op = step.to_operation(dates)?;
            let current = tables.last().expect("non-empty");
            let applied = ops::apply(current, &step.column, &op).map_err(|e| step.step_error(e))?;
            cells_changed.push(applied.cells_changed);
            tables.push(applied.table);
        }
        Ok(History {
            tables,
            cells_changed,
        })
    }

    pub fn op_stats(&self) -> OpStats {
        let mut counts = BTreeMap::new();
        for step in &self.steps {
            *counts.entry(step.op).or_insert(0) += 1;
        }
        OpStats {
            list_length: self.steps.len(),
            set_length: counts.len(),
            counts,
        }
    }

    /// Serializes to the `dcflow/1` JSON format (pretty-printed, newline
    /// terminated, stable key order).
    pub fn serialize(&self) -> String {
        let steps: Vec<Value> = self
            .steps
            .iter()
            .map(|s| {
                let args = match &s.args {
                    OpArgs::None => Value::Null,
                    OpArgs::MassEdit(spec) => json!({ "edits": spec.edits }),
                    OpArgs::Expression(src) => json!({ "expression": src }),
                };
                let mut m = Map::new();
                m.insert("index".into(), json!(s.step_index));
                m.insert("op".into(), json!(s.op.name()));
                m.insert("column".into(), json!(s.column));
                m.insert("args".into(), args);
                m.insert("rationale".into(), json!(s.rationale));
                Value::Object(m)
            })
            .collect();
        let mut root = Map::new();
        root.insert("version".into(), json!(FORMAT_VERSION));
        root.insert("source_table_id".into(), json!(self.source_table_id));
        root.insert("purpose_id".into(), json!(self.purpose_id));
        root.insert("steps".into(), Value::Array(steps));
        let mut out = serde_json::to_string_pretty(&Value::Object(root)).expect("json values serialize");
        out.push('\n');
        out
    }

    pub fn deserialize(bytes: &[u8]) -> Result<Workflow, WorkflowError> {
        let root: Value = serde_json::from_slice(bytes)
            .map_err(|e| WorkflowError::schema("$", format!("invalid JSON: {e}")))?;
        let obj = root
            .as_object()
            .ok_or_else(|| WorkflowError::schema("$", "expected an object"))?;
        match obj.get("version").and_then(Value::as_str) {
            Some(FORMAT_VERSION) => {}
            Some(other) => {
                return Err(WorkflowError::schema(
                    "$.version",
                    format!("unsupported version {other:?}"),
                ))
            }
            None => return Err(WorkflowError::schema("$.version", "missing version string")),
        }
        let source_table_id = obj
            .get("source_table_id")
            .and_then(Value::as_str)
            .ok_or_else(|| WorkflowError::schema("$.source_table_id", "expected a string"))?
            .to_string();
        let purpose_id = optional_string(obj.get("purpose_id"), "$.purpose_id")?;
        let steps_v = obj
            .get("steps")
            .and_then(Value::as_array)
            .ok_or_else(|| WorkflowError::schema("$.steps", "expected an array"))?;

        let mut steps = Vec::with_capacity(steps_v.len());
        for (i, sv) in steps_v.iter().enumerate() {
            steps.push(parse_step(sv, i)?);
        }
        Ok(Workflow {
            steps,
            source_table_id,
            purpose_id,
        })
    }
}

fn optional_string(v: Option<&Value>, path: &str) -> Result<Option<String>, WorkflowError> {
    match v {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(_) => Err(WorkflowError::schema(path, "expected a string or null")),
    }
}

fn parse_step(sv: &Value, i: usize) -> Result<OpSpec, WorkflowError> {
    let path = format!("$.steps[{i}]");
    let obj = sv
        .as_object()
        .ok_or_else(|| WorkflowError::schema(&path, "expected an object"))?;
    let index = obj
        .get("index")
        .and_then(Value::as_u64)
        .ok_or_else(|| WorkflowError::schema(format!("{path}.index"), "expected an integer"))?;
    if index != i as u64 + 1 {
        return Err(WorkflowError::schema(
            format!("{path}.index"),
            format!("expected {}, found {index}", i + 1),
        ));
    }
    let op_name = obj
        .get("op")
        .and_then(Value::as_str)
        .ok_or_else(|| WorkflowError::schema(format!("{path}.op"), "expected a string"))?;
    let op: OpKind = op_name
        .parse()
        .map_err(|e: ops::UnknownOp| WorkflowError::schema(format!("{path}.op"), e.to_string()))?;
    let column = obj
        .get("column")
        .and_then(Value::as_str)
        .ok_or_else(|| WorkflowError::schema(format!("{path}.column"), "expected a string"))?
        .to_string();
    let rationale = optional_string(obj.get("rationale"), &format!("{path}.rationale"))?;
    let args_path = format!("{path}.args");
    let args_v = obj.get("args").unwrap_or(&Value::Null);
    let args = match op {
        OpKind::Upper | OpKind::Trim | OpKind::ToNumeric | OpKind::ToDate => {
            if !args_v.is_null() {
                return Err(WorkflowError::schema(args_path, format!("{op} takes no arguments")));
            }
            OpArgs::None
        }
        OpKind::MassEdit => OpArgs::MassEdit(parse_edits(args_v, &args_path)?),
        OpKind::RegexrTransform => {
            let src = args_v
                .get("expression")
                .and_then(Value::as_str)
                .ok_or_else(|| {
                    WorkflowError::schema(format!("{args_path}.expression"), "expected a string")
                })?;
            ops::parse_transform_expr(src).map_err(|e| {
                WorkflowError::schema(format!("{args_path}.expression"), e.to_string())
            })?;
            OpArgs::Expression(src.to_string())
        }
    };
    Ok(OpSpec {
        step_index: i + 1,
        op,
        column,
        args,
        rationale,
    })
}

fn parse_edits(args: &Value, path: &str) -> Result<MassEditSpec, WorkflowError> {
    let edits_path = format!("{path}.edits");
    let edits_v = args
        .get("edits")
        .and_then(Value::as_array)
        .ok_or_else(|| WorkflowError::schema(&edits_path, "expected an array"))?;
    let mut edits = Vec::with_capacity(edits_v.len());
    for (j, ev) in edits_v.iter().enumerate() {
        let epath = format!("{edits_path}[{j}]");
        let from = ev
            .get("from")
            .and_then(Value::as_array)
            .ok_or_else(|| WorkflowError::schema(format!("{epath}.from"), "expected an array"))?
            .iter()
            .map(|v| v.as_str().map(str::to_string))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| WorkflowError::schema(format!("{epath}.from"), "expected strings"))?;
        let to = ev
            .get("to")
            .and_then(Value::as_str)
            .ok_or_else(|| WorkflowError::schema(format!("{epath}.to"), "expected a string"))?
            .to_string();
        edits.push(MassEdit { from, to });
    }
    let spec = MassEditSpec { edits };
    spec.validate()
        .map_err(|e| WorkflowError::schema(&edits_path, e.to_string()))?;
    Ok(spec)
}

/// Length statistics of a workflow.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct OpStats {
    /// Total number of steps.
    pub list_length: usize,
    /// Number of distinct operation kinds.
    pub set_length: usize,
    pub counts: BTreeMap<OpKind, usize>,
}

impl OpStats {
    pub const CSV_HEADER: &'static str =
        "list_length,set_length,upper,trim,numeric,date,mass_edit,regexr_transform";

    /// One CSV row matching [`OpStats::CSV_HEADER`].
    pub fn csv_row(&self) -> String {
        let mut fields = vec![self.list_length.to_string(), self.set_length.to_string()];
        fields.extend(
            OpKind::ALL
                .iter()
                .map(|k| self.counts.get(k).copied().unwrap_or(0).to_string()),
        );
        fields.join(",")
    }
}
