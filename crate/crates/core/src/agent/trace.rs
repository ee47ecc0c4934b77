use serde::{Deserialize, Serialize};

use super::{DecodingParams, Stage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallOutcome {
    Ok,
    ParseError,
    BackendError,
}

/// One backend call, successful or not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallRecord {
    pub seq: usize,
    pub stage: Stage,
    pub column: Option<String>,
    /// 0 for the first attempt, 1 for the first retry.
    pub attempt: usize,
    pub params: DecodingParams,
    pub prompt: String,
    pub response: Option<String>,
    pub outcome: CallOutcome,
    pub detail: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    ColumnsSelected,
    UnknownColumnDropped,
    SelectionFailed,
    ColumnClean,
    ColumnIrrelevant,
    InspectionFailed,
    OpChoiceFailed,
    ArgGenFailed,
    StepApplied,
    StepRejected,
    BudgetExhausted,
}

impl EventKind {
    /// Events that mark a column as not cleaned to completion.
    pub fn is_failure(self) -> bool {
        matches!(
            self,
            EventKind::InspectionFailed
                | EventKind::OpChoiceFailed
                | EventKind::ArgGenFailed
                | EventKind::StepRejected
                | EventKind::BudgetExhausted
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub kind: EventKind,
    pub column: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub calls: Vec<CallRecord>,
    pub events: Vec<TraceEvent>,
}

impl Trace {
    pub fn event(&mut self, kind: EventKind, column: Option<&str>, message: impl Into<String>) {
        let message = message.into();
        tracing::debug!(?kind, column, %message, "pipeline event");
        self.events.push(TraceEvent {
            kind,
            column: column.map(str::to_string),
            message,
        });
    }

    /// One JSON object per backend call.
    pub fn calls_jsonl(&self) -> String {
        let mut out = String::new();
        for c in &self.calls {
            out.push_str(&serde_json::to_string(c).expect("trace records serialize"));
            out.push('\n');
        }
        out
    }

    pub fn has_failures(&self) -> bool {
        self.events.iter().any(|e| e.kind.is_failure())
    }
}
