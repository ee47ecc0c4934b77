//! The iterative cleaning agent: pick target columns, then per column loop
//! over inspect, choose an operation, generate its arguments and apply it
//! until the quality report passes.

mod backend;
mod parse;
mod prompt;
mod trace;

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::dates::DateParser;
use crate::ops::{self, OpKind};
use crate::query::Purpose;
use crate::table::Table;
use crate::workflow::{OpSpec, Workflow, FORMAT_VERSION};

pub use backend::{
    BackendError, CompletionBackend, CompletionRequest, HttpBackend, HttpConfig, Script, ScriptEntry,
    ScriptedBackend, ENV_KEY, ENV_MODEL, ENV_URL,
};
pub use parse::{
    parse_column_list, parse_mass_edit, parse_op_choice, parse_quality_report, parse_transform_reply, OpChoice,
    QualityReport, Verdict,
};
pub use prompt::{full_table_block, render, selection_block, ColumnSampler, Sample, Templates};
pub use trace::{CallOutcome, CallRecord, EventKind, Trace, TraceEvent};

pub const DEFAULT_TEMPERATURE: f64 = 0.1;
pub const MASS_EDIT_TEMPERATURE: f64 = 0.2;
pub const RETRY_TEMPERATURE: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    SelectColumns,
    Inspect,
    ChooseOperation,
    Arguments,
    Direct,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::SelectColumns => "select_columns",
            Stage::Inspect => "inspect",
            Stage::ChooseOperation => "choose_operation",
            Stage::Arguments => "arguments",
            Stage::Direct => "direct",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodingParams {
    pub temperature: f64,
    pub top_k: u32,
    pub top_p: f64,
    pub mirostat: u32,
    pub max_output_tokens: u32,
    pub stop: Vec<String>,
}

impl Default for DecodingParams {
    fn default() -> Self {
        Self {
            temperature: DEFAULT_TEMPERATURE,
            top_k: 60,
            top_p: 0.95,
            mirostat: 1,
            max_output_tokens: 2048,
            stop: vec!["\n\n\n".to_string()],
        }
    }
}

impl DecodingParams {
    pub fn with_temperature(&self, temperature: f64) -> Self {
        Self {
            temperature,
            ..self.clone()
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("invalid pipeline configuration: {0}")]
    Config(String),
    #[error("column selection failed: {0}")]
    Selection(String),
    #[error("quality inspection of {column:?} failed: {detail}")]
    Inspection { column: String, detail: String },
    #[error("operation choice for {column:?} failed: {detail}")]
    OpChoice { column: String, detail: String },
    #[error("argument generation for {op} on {column:?} failed: {detail}")]
    ArgGen { column: String, op: OpKind, detail: String },
    #[error("direct workflow generation failed: {0}")]
    Direct(String),
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub max_iters_per_column: usize,
    pub sample_size: usize,
    pub max_retries_per_call: usize,
    /// Distinct values per column shown in the selection prompt.
    pub selection_preview: usize,
    pub decoding: DecodingParams,
    pub templates: Templates,
    pub dates: DateParser,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            max_iters_per_column: 8,
            sample_size: 30,
            max_retries_per_call: 1,
            selection_preview: 3,
            decoding: DecodingParams::default(),
            templates: Templates::default(),
            dates: DateParser::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        for (name, v) in [
            ("max_iters_per_column", self.max_iters_per_column),
            ("sample_size", self.sample_size),
            ("max_retries_per_call", self.max_retries_per_call),
            ("selection_preview", self.selection_preview),
        ] {
            if v == 0 {
                return Err(AgentError::Config(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    /// Finished, but at least one column was abandoned.
    Degraded,
    Aborted,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub final_table: Table,
    pub workflow: Workflow,
    pub trace: Trace,
    pub target_columns: Vec<String>,
    pub status: RunStatus,
    pub errors: Vec<AgentError>,
}

struct Run<'a> {
    backend: &'a dyn CompletionBackend,
    config: &'a PipelineConfig,
    trace: Trace,
}

impl Run<'_> {
    /// Sends a prompt, retrying at the retry temperature until `parse`
    /// accepts a reply or the attempts run out.
    fn call<T>(
        &mut self,
        stage: Stage,
        column: Option<&str>,
        prompt: &str,
        params: &DecodingParams,
        parse: impl Fn(&str) -> Result<T, String>,
    ) -> Result<T, String> {
        let mut last = String::new();
        for attempt in 0..=self.config.max_retries_per_call {
            let params = if attempt == 0 {
                params.clone()
            } else {
                params.with_temperature(RETRY_TEMPERATURE)
            };
            let request = CompletionRequest {
                prompt,
                params: &params,
                stage,
                column,
            };
            let (response, outcome, detail, parsed) = match self.backend.complete(&request) {
                Ok(text) => match parse(&text) {
                    Ok(v) => (Some(text), CallOutcome::Ok, None, Some(v)),
                    Err(e) => (Some(text), CallOutcome::ParseError, Some(e), None),
                },
                Err(e) => (None, CallOutcome::BackendError, Some(e.to_string()), None),
            };
            self.trace.calls.push(CallRecord {
                seq: self.trace.calls.len() + 1,
                stage,
                column: column.map(str::to_string),
                attempt,
                params,
                prompt: prompt.to_string(),
                response,
                outcome,
                detail: detail.clone(),
            });
            if let Some(v) = parsed {
                return Ok(v);
            }
            last = detail.unwrap_or_default();
            tracing::debug!(%stage, column, attempt, error = %last, "call failed");
        }
        Err(last)
    }

    fn select_columns(&mut self, table: &Table, purpose: &str) -> Result<Vec<String>, AgentError> {
        let prompt = render(
            &self.config.templates.select_columns,
            &[
                ("table_block", &selection_block(table, self.config.selection_preview)),
                ("purpose", purpose),
            ],
        );
        let params = self.config.decoding.clone();
        let mut dropped = Vec::new();
        let picked = self.call(Stage::SelectColumns, None, &prompt, &params, |reply| {
            let names = parse_column_list(reply).ok_or("no bracketed column list in reply")?;
            let (known, unknown): (Vec<String>, Vec<String>) = names.into_iter().partition(|n| table.has_column(n));
            if known.is_empty() {
                return Err(format!("no existing columns named (got {unknown:?})"));
            }
            Ok((known, unknown))
        });
        match picked {
            Ok((mut known, unknown)) => {
                dropped.extend(unknown);
                let mut seen = std::collections::HashSet::new();
                known.retain(|n| seen.insert(n.clone()));
                for name in &dropped {
                    tracing::warn!(column = %name, "selected column does not exist");
                    self.trace
                        .event(EventKind::UnknownColumnDropped, Some(name), "column does not exist in the table");
                }
                self.trace
                    .event(EventKind::ColumnsSelected, None, format!("{known:?}"));
                Ok(known)
            }
            Err(e) => {
                self.trace.event(EventKind::SelectionFailed, None, e.clone());
                Err(AgentError::Selection(e))
            }
        }
    }

    fn clean_column(
        &mut self,
        source: &Table,
        current: &mut Table,
        workflow: &mut Workflow,
        column: &str,
        purpose: &str,
    ) -> Result<(), AgentError> {
        let config = self.config;
        let mut sampler = ColumnSampler::default();
        let mut applied = 0;
        loop {
            let values = current.get_column(column).map(|c| c.values).unwrap_or_default();
            let sample = sampler.next_sample(&values, config.sample_size);
            let block = sample.block(column);
            let history = column_history(workflow, column);

            let prompt = render(
                &config.templates.quality_report,
                &[("table_block", &block), ("purpose", purpose), ("column", column), ("history", &history)],
            );
            let report = self
                .call(Stage::Inspect, Some(column), &prompt, &config.decoding, |r| {
                    parse_quality_report(r, column).ok_or_else(|| "quality report missing dimensions".to_string())
                })
                .map_err(|detail| {
                    self.trace.event(EventKind::InspectionFailed, Some(column), detail.clone());
                    AgentError::Inspection {
                        column: column.into(),
                        detail,
                    }
                })?;
            if report.relevance == Verdict::False {
                self.trace
                    .event(EventKind::ColumnIrrelevant, Some(column), "relevance is False; column removed");
                return Ok(());
            }
            if report.flag {
                self.trace.event(EventKind::ColumnClean, Some(column), "all dimensions pass");
                return Ok(());
            }
            if applied == config.max_iters_per_column {
                self.trace.event(
                    EventKind::BudgetExhausted,
                    Some(column),
                    format!("budget exhausted after {applied} operations"),
                );
                return Ok(());
            }

            let report_text = report.render();
            let prompt = render(
                &config.templates.choose_operation,
                &[
                    ("table_block", &block),
                    ("purpose", purpose),
                    ("column", column),
                    ("report", &report_text),
                    ("history", &history),
                ],
            );
            let choice = self
                .call(Stage::ChooseOperation, Some(column), &prompt, &config.decoding, |r| {
                    parse_op_choice(r).ok_or_else(|| "no valid operation in reply".to_string())
                })
                .map_err(|detail| {
                    self.trace.event(EventKind::OpChoiceFailed, Some(column), detail.clone());
                    AgentError::OpChoice {
                        column: column.into(),
                        detail,
                    }
                })?;

            let mut step = match choice.op {
                OpKind::MassEdit | OpKind::RegexrTransform => {
                    let op = choice.op;
                    let prompt = render(
                        &config.templates.arguments,
                        &[
                            ("op", op.name()),
                            ("table_block", &block),
                            ("purpose", purpose),
                            ("column", column),
                            ("report", &report_text),
                            ("history", &history),
                        ],
                    );
                    let params = if op == OpKind::MassEdit {
                        config.decoding.with_temperature(MASS_EDIT_TEMPERATURE)
                    } else {
                        config.decoding.clone()
                    };
                    let result = self.call(Stage::Arguments, Some(column), &prompt, &params, |r| {
                        if op == OpKind::MassEdit {
                            parse_mass_edit(r).map(|spec| OpSpec::mass_edit(column, spec))
                        } else {
                            parse_transform_reply(r).map(|e| OpSpec::regexr(column, e.source()))
                        }
                    });
                    result.map_err(|detail| {
                        self.trace.event(EventKind::ArgGenFailed, Some(column), detail.clone());
                        AgentError::ArgGen {
                            column: column.into(),
                            op,
                            detail,
                        }
                    })?
                }
                op => OpSpec::simple(op, column),
            };
            if !choice.explanation.is_empty() {
                step = step.with_rationale(choice.explanation.clone());
            }

            let op_name = step.op;
            match workflow.record_with(source, step, &config.dates) {
                Ok(next) => {
                    let last = next.steps().last().expect("just recorded");
                    let op = last.to_operation(&config.dates).expect("validated on record");
                    let out = ops::apply(current, column, &op).expect("validated on record");
                    self.trace.event(
                        EventKind::StepApplied,
                        Some(column),
                        format!("{op_name} changed {} cells", out.cells_changed),
                    );
                    *current = out.table;
                    *workflow = next;
                    applied += 1;
                }
                Err(e) => {
                    self.trace.event(EventKind::StepRejected, Some(column), e.to_string());
                    return Err(AgentError::ArgGen {
                        column: column.into(),
                        op: op_name,
                        detail: e.to_string(),
                    });
                }
            }
        }
    }
}

fn column_history(workflow: &Workflow, column: &str) -> String {
    let lines: Vec<String> = workflow
        .steps()
        .iter()
        .filter(|s| s.column == column)
        .map(|s| format!("{}. {}", s.step_index, s.op))
        .collect();
    if lines.is_empty() {
        "(none)".to_string()
    } else {
        lines.join("\n")
    }
}

fn table_id(table: &Table) -> String {
    table.provenance().unwrap_or("table").to_string()
}

fn finish(run: Run<'_>, final_table: Table, workflow: Workflow, target_columns: Vec<String>, errors: Vec<AgentError>) -> PipelineOutput {
    let status = if errors.is_empty() && !run.trace.has_failures() {
        RunStatus::Completed
    } else {
        RunStatus::Degraded
    };
    PipelineOutput {
        final_table,
        workflow,
        trace: run.trace,
        target_columns,
        status,
        errors,
    }
}

/// Runs the full iterative pipeline for one purpose.
///
/// Only an invalid configuration is returned as `Err`. A failed column
/// selection yields an `Aborted` output with an empty workflow; failures on
/// individual columns leave earlier steps in place and mark the run
/// `Degraded`.
pub fn run_pipeline(
    backend: &dyn CompletionBackend,
    table: &Table,
    purpose: &Purpose,
    config: &PipelineConfig,
) -> Result<PipelineOutput, AgentError> {
    config.validate()?;
    let mut run = Run {
        backend,
        config,
        trace: Trace::default(),
    };
    let mut workflow = Workflow::new(table_id(table)).with_purpose(purpose.id.clone());
    let targets = match run.select_columns(table, &purpose.statement) {
        Ok(t) => t,
        Err(e) => {
            return Ok(PipelineOutput {
                final_table: table.clone(),
                workflow,
                trace: run.trace,
                target_columns: Vec::new(),
                status: RunStatus::Aborted,
                errors: vec![e],
            })
        }
    };
    let mut current = table.clone();
    let mut errors = Vec::new();
    for column in &targets {
        if let Err(e) = run.clean_column(table, &mut current, &mut workflow, column, &purpose.statement) {
            tracing::warn!(%column, error = %e, "column abandoned");
            errors.push(e);
        }
    }
    Ok(finish(run, current, workflow, targets, errors))
}

fn parse_direct_steps(reply: &str) -> Result<Vec<Value>, String> {
    let start = reply.find('[').ok_or("no JSON list in reply")?;
    let end = reply.rfind(']').ok_or("no JSON list in reply")?;
    if end < start {
        return Err("no JSON list in reply".into());
    }
    let v: Value = serde_json::from_str(&reply[start..=end]).map_err(|e| format!("invalid JSON: {e}"))?;
    match v {
        Value::Array(steps) if !steps.is_empty() => Ok(steps),
        _ => Err("expected a non-empty list of steps".into()),
    }
}

/// Single-prompt baseline: one call asks for the whole workflow. Steps that
/// fail to parse or apply are dropped and reported.
pub fn run_direct(
    backend: &dyn CompletionBackend,
    table: &Table,
    purpose: &Purpose,
    config: &PipelineConfig,
) -> Result<PipelineOutput, AgentError> {
    config.validate()?;
    let mut run = Run {
        backend,
        config,
        trace: Trace::default(),
    };
    let prompt = render(
        &config.templates.direct,
        &[("table_block", &full_table_block(table, 100)), ("purpose", &purpose.statement)],
    );
    let mut workflow = Workflow::new(table_id(table)).with_purpose(purpose.id.clone());
    let steps = match run.call(Stage::Direct, None, &prompt, &config.decoding, parse_direct_steps) {
        Ok(s) => s,
        Err(e) => {
            return Ok(PipelineOutput {
                final_table: table.clone(),
                workflow,
                trace: run.trace,
                target_columns: Vec::new(),
                status: RunStatus::Aborted,
                errors: vec![AgentError::Direct(e)],
            })
        }
    };
    let mut current = table.clone();
    let mut columns: Vec<String> = Vec::new();
    for (i, raw) in steps.into_iter().enumerate() {
        let mut step = raw.clone();
        if let Some(obj) = step.as_object_mut() {
            obj.insert("index".into(), json!(1));
        }
        let doc = json!({"version": FORMAT_VERSION, "source_table_id": "direct", "purpose_id": null, "steps": [step]});
        let parsed = Workflow::deserialize(doc.to_string().as_bytes())
            .map_err(|e| e.to_string())
            .and_then(|w| {
                let spec = w.steps()[0].clone();
                workflow.record_with(table, spec, &config.dates).map_err(|e| e.to_string())
            });
        match parsed {
            Ok(next) => {
                let last = next.steps().last().expect("just recorded");
                let op = last.to_operation(&config.dates).expect("validated on record");
                current = ops::apply(&current, &last.column, &op).expect("validated on record").table;
                if !columns.contains(&last.column) {
                    columns.push(last.column.clone());
                }
                run.trace.event(EventKind::StepApplied, Some(&last.column), last.op.to_string());
                workflow = next;
            }
            Err(e) => run
                .trace
                .event(EventKind::StepRejected, None, format!("step {}: {e}", i + 1)),
        }
    }
    Ok(finish(run, current, workflow, columns, Vec::new()))
}
