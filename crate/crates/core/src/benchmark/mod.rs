//! Benchmark cases: error injection, case manifests and suites, and the
//! self-checks every bundled case must pass.

mod inject;

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::eval_columns;
use crate::query::{answer_to_canonical_text, execute_purpose, Purpose};
use crate::table::{load_csv, Table};
use crate::workflow::Workflow;

pub use inject::{
    corrupt, eligible, inject_errors, ErrorEntry, ErrorFamily, ErrorLog, ErrorProfile, InjectError, Mix,
    TYPE_ERROR_TOKENS,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BenchmarkError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("schema error in {path}: {reason}")]
    Schema { path: PathBuf, reason: String },
    #[error("self-check failed: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    SelfCheck(Vec<Finding>),
}

fn read(path: &Path) -> Result<Vec<u8>, BenchmarkError> {
    std::fs::read(path).map_err(|e| BenchmarkError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn schema(path: &Path, reason: impl fmt::Display) -> BenchmarkError {
    BenchmarkError::Schema {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    }
}

/// A case manifest as stored on disk. Paths are relative to the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseManifest {
    pub purpose: Purpose,
    pub raw_table: PathBuf,
    pub gold_table: PathBuf,
    pub silver_workflow: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_log: Option<PathBuf>,
}

/// A manifest with its files loaded.
#[derive(Debug, Clone)]
pub struct Case {
    pub id: String,
    pub topic: String,
    pub dir: PathBuf,
    pub manifest: CaseManifest,
    pub raw: Table,
    pub gold: Table,
    pub silver: Workflow,
    pub error_log: Option<ErrorLog>,
}

impl Case {
    pub fn purpose(&self) -> &Purpose {
        &self.manifest.purpose
    }
}

fn load_table_file(path: &Path) -> Result<Table, BenchmarkError> {
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("table").to_string();
    load_csv(&read(path)?)
        .map(|t| t.with_provenance(name))
        .map_err(|e| schema(path, e))
}

pub fn load_case(manifest_path: &Path) -> Result<Case, BenchmarkError> {
    let manifest: CaseManifest = serde_json::from_slice(&read(manifest_path)?).map_err(|e| schema(manifest_path, e))?;
    let dir = manifest_path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let raw = load_table_file(&dir.join(&manifest.raw_table))?;
    let gold = load_table_file(&dir.join(&manifest.gold_table))?;
    let wf_path = dir.join(&manifest.silver_workflow);
    let silver = Workflow::deserialize(&read(&wf_path)?).map_err(|e| schema(&wf_path, e))?;
    let error_log = match &manifest.error_log {
        Some(p) => {
            let path = dir.join(p);
            Some(serde_json::from_slice(&read(&path)?).map_err(|e| schema(&path, e))?)
        }
        None => None,
    };
    Ok(Case {
        id: manifest.purpose.id.clone(),
        topic: String::new(),
        dir,
        manifest,
        raw,
        gold,
        silver,
        error_log,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingKind {
    GoldAnswerMismatch,
    GoldQueryFailed,
    MissingTargetColumn,
    SilverReplayFailed,
    SilverRatioBelowOne,
    ShapeMismatch,
    ErrorLogMismatch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub kind: FindingKind,
    pub step_index: Option<usize>,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.step_index {
            Some(i) => write!(f, "{} (step {i})", self.message),
            None => f.write_str(&self.message),
        }
    }
}

fn finding(kind: FindingKind, message: impl Into<String>) -> Finding {
    Finding {
        kind,
        step_index: None,
        message: message.into(),
    }
}

/// All self-checks for a loaded case; empty when the case is consistent.
pub fn validate_case(case: &Case) -> Vec<Finding> {
    let mut out = Vec::new();
    let purpose = case.purpose();

    match execute_purpose(&purpose.query, &case.gold) {
        Ok(answer) => {
            if answer_to_canonical_text(&answer) != answer_to_canonical_text(&purpose.gold_answer) {
                out.push(finding(
                    FindingKind::GoldAnswerMismatch,
                    format!(
                        "gold answer mismatch: query gives {:?}, manifest says {:?}",
                        answer_to_canonical_text(&answer),
                        answer_to_canonical_text(&purpose.gold_answer)
                    ),
                ));
            }
        }
        Err(e) => out.push(finding(FindingKind::GoldQueryFailed, format!("gold query failed: {e}"))),
    }

    for col in &purpose.target_columns_gold {
        for (label, t) in [("raw", &case.raw), ("gold", &case.gold)] {
            if !t.has_column(col) {
                out.push(finding(
                    FindingKind::MissingTargetColumn,
                    format!("target column {col:?} missing from {label} table"),
                ));
            }
        }
    }

    match case.silver.replay(&case.raw) {
        Ok(history) => {
            let replayed = history.into_final();
            match eval_columns(&replayed, &case.gold, &purpose.target_columns_gold) {
                Ok(scores) if scores.ratio < 1.0 => {
                    let bad: Vec<String> = scores
                        .per_column
                        .iter()
                        .filter(|(_, v)| **v < 1.0)
                        .map(|(k, v)| format!("{k}={v:.4}"))
                        .collect();
                    out.push(finding(
                        FindingKind::SilverRatioBelowOne,
                        format!("silver workflow replay does not match gold: {}", bad.join(", ")),
                    ));
                }
                Ok(_) => {}
                Err(e) => out.push(finding(FindingKind::ShapeMismatch, e.to_string())),
            }
        }
        Err(e) => out.push(Finding {
            kind: FindingKind::SilverReplayFailed,
            step_index: e.step_index(),
            message: format!("silver workflow does not replay: {e}"),
        }),
    }

    if let Some(log) = &case.error_log {
        for e in &log.entries {
            let cell = case
                .raw
                .column_index(&e.column)
                .ok()
                .filter(|_| e.row < case.raw.row_count())
                .map(|c| case.raw.cell(e.row, c));
            if cell != Some(&e.corrupted) {
                out.push(finding(
                    FindingKind::ErrorLogMismatch,
                    format!("error log entry at row {} column {:?} does not match raw table", e.row, e.column),
                ));
            }
        }
    }
    out
}

/// Fails with every finding when the case is inconsistent.
pub fn check_case(case: &Case) -> Result<(), BenchmarkError> {
    let findings = validate_case(case);
    if findings.is_empty() {
        Ok(())
    } else {
        Err(BenchmarkError::SelfCheck(findings))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteEntry {
    pub id: String,
    pub topic: String,
    pub manifest: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Suite {
    pub name: String,
    pub cases: Vec<SuiteEntry>,
    #[serde(skip)]
    pub dir: PathBuf,
}

impl Suite {
    pub fn load(path: &Path) -> Result<Suite, BenchmarkError> {
        let mut suite: Suite = serde_json::from_slice(&read(path)?).map_err(|e| schema(path, e))?;
        suite.dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        let mut seen = std::collections::HashSet::new();
        for c in &suite.cases {
            if !seen.insert(c.id.as_str()) {
                return Err(schema(path, format!("duplicate case id {:?}", c.id)));
            }
        }
        Ok(suite)
    }

    pub fn manifest_path(&self, entry: &SuiteEntry) -> PathBuf {
        self.dir.join(&entry.manifest)
    }

    pub fn load_case(&self, entry: &SuiteEntry) -> Result<Case, BenchmarkError> {
        let mut case = load_case(&self.manifest_path(entry))?;
        if case.id != entry.id {
            return Err(schema(
                &self.manifest_path(entry),
                format!("purpose id {:?} does not match suite id {:?}", case.id, entry.id),
            ));
        }
        case.topic = entry.topic.clone();
        Ok(case)
    }

    pub fn find(&self, id: &str) -> Option<&SuiteEntry> {
        self.cases.iter().find(|c| c.id == id)
    }
}
