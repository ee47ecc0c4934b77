//! Scoring a cleaned table and its workflow against ground truth along three
//! axes: the purpose answer, target-column values, and the workflow itself.

mod similarity;

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::numeric;
use crate::ops::OpKind;
use crate::query::{answer_to_canonical_text, execute_purpose, Answer, Purpose, QueryError};
use crate::table::{CellValue, Table, TableError};
use crate::workflow::{OpStats, Workflow};

pub use similarity::{matched_chars, similarity};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("row count mismatch: predicted table has {pred} rows, gold has {gold}")]
    ShapeMismatch { pred: usize, gold: usize },
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error("no target columns to score")]
    NoTargetColumns,
    #[error("nothing to aggregate")]
    EmptyInput,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnswerScores {
    pub exact: bool,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColumnScores {
    pub ratio: f64,
    pub per_column: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorkflowScores {
    pub exact: bool,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub pred_stats: OpStats,
    pub gold_stats: OpStats,
}

/// How workflow steps are matched against the reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchGranularity {
    /// `(column, operation)` pairs.
    #[default]
    ColumnAndOp,
    /// Operation kinds only, ignoring columns.
    OpOnly,
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Equivalence key for answer elements: numbers by value, everything else
/// case-insensitively by text.
fn element_key(s: &str) -> String {
    match numeric::parse(s) {
        Some(n) => format!("n:{}", numeric::render(n)),
        None => format!("t:{}", s.to_lowercase()),
    }
}

fn multiset_overlap<K: std::hash::Hash + Eq>(pred: Vec<K>, gold: Vec<K>) -> usize {
    let mut counts: HashMap<K, usize> = HashMap::new();
    for k in gold {
        *counts.entry(k).or_insert(0) += 1;
    }
    let mut matched = 0;
    for k in pred {
        if let Some(c) = counts.get_mut(&k) {
            if *c > 0 {
                *c -= 1;
                matched += 1;
            }
        }
    }
    matched
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn eval_answer(pred: &Answer, gold: &Answer) -> AnswerScores {
    let pred_text = answer_to_canonical_text(pred);
    let gold_text = answer_to_canonical_text(gold);
    let exact = pred_text == gold_text;
    let sim = similarity(&pred_text, &gold_text);

    let (precision, recall) = match (pred, gold) {
        (Answer::Scalar(_), Answer::Scalar(_)) => {
            let v = if exact { 1.0 } else { 0.0 };
            (v, v)
        }
        _ => {
            let p = pred.elements();
            let g = gold.elements();
            if p.is_empty() && g.is_empty() {
                (1.0, 1.0)
            } else {
                let (np, ng) = (p.len(), g.len());
                let m = multiset_overlap(
                    p.iter().map(|s| element_key(s)).collect(),
                    g.iter().map(|s| element_key(s)).collect(),
                );
                (ratio(m, np), ratio(m, ng))
            }
        }
    };
    AnswerScores {
        exact,
        precision,
        recall,
        f1: f1(precision, recall),
        similarity: sim,
    }
}

/// Cell equivalence used by the column cleanness ratio.
///
/// Two cells match when both read as numbers under the numeric grammar and
/// are equal, when both are dates at the same instant, or when their text
/// renderings agree case-insensitively. `Missing` only matches `Missing`.
pub fn delta_equiv(t: &CellValue, g: &CellValue) -> u8 {
    match (t, g) {
        (CellValue::Missing, CellValue::Missing) => return 1,
        (CellValue::Missing, _) | (_, CellValue::Missing) => return 0,
        (CellValue::Date(a), CellValue::Date(b)) if a == b => return 1,
        _ => {}
    }
    if let (Some(a), Some(b)) = (t.numeric_value(), g.numeric_value()) {
        if a == b {
            return 1;
        }
    }
    u8::from(t.render().to_lowercase() == g.render().to_lowercase())
}

pub fn eval_columns(pred: &Table, gold: &Table, target_columns: &[String]) -> Result<ColumnScores, EvalError> {
    if pred.row_count() != gold.row_count() {
        return Err(EvalError::ShapeMismatch {
            pred: pred.row_count(),
            gold: gold.row_count(),
        });
    }
    if target_columns.is_empty() {
        return Err(EvalError::NoTargetColumns);
    }
    let n = pred.row_count();
    let mut per_column = BTreeMap::new();
    let mut total = 0.0;
    for name in target_columns {
        let pi = pred.column_index(name)?;
        let gi = gold.column_index(name)?;
        let matches: usize = (0..n)
            .map(|i| usize::from(delta_equiv(pred.cell(i, pi), gold.cell(i, gi))))
            .sum();
        // An empty column has nothing out of place.
        let score = if n == 0 { 1.0 } else { matches as f64 / n as f64 };
        total += score;
        per_column.insert(name.clone(), score);
    }
    Ok(ColumnScores {
        ratio: total / target_columns.len() as f64,
        per_column,
    })
}

fn step_keys(wf: &Workflow, granularity: MatchGranularity) -> Vec<(Option<String>, OpKind)> {
    wf.steps()
        .iter()
        .map(|s| match granularity {
            MatchGranularity::ColumnAndOp => (Some(s.column.clone()), s.op),
            MatchGranularity::OpOnly => (None, s.op),
        })
        .collect()
}

pub fn eval_workflow(pred: &Workflow, gold: &Workflow) -> WorkflowScores {
    eval_workflow_with(pred, gold, MatchGranularity::default())
}

/// Arguments are never compared; only which operation ran on which column.
pub fn eval_workflow_with(pred: &Workflow, gold: &Workflow, granularity: MatchGranularity) -> WorkflowScores {
    let p = step_keys(pred, granularity);
    let g = step_keys(gold, granularity);
    let exact = p == g;
    let (precision, recall) = if p.is_empty() && g.is_empty() {
        (1.0, 1.0)
    } else {
        let (np, ng) = (p.len(), g.len());
        let m = multiset_overlap(p, g);
        (ratio(m, np), ratio(m, ng))
    };
    WorkflowScores {
        exact,
        precision,
        recall,
        f1: f1(precision, recall),
        pred_stats: pred.op_stats(),
        gold_stats: gold.op_stats(),
    }
}

/// Scores for one benchmark case. `workflow` is `None` for baseline rows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseScores {
    pub case_id: String,
    pub topic: String,
    pub answer: AnswerScores,
    pub column: ColumnScores,
    pub workflow: Option<WorkflowScores>,
}

/// Scores a predicted table (and optionally its workflow) for one purpose.
pub fn score_case(
    case_id: &str,
    topic: &str,
    purpose: &Purpose,
    gold_table: &Table,
    pred_table: &Table,
    workflows: Option<(&Workflow, &Workflow)>,
    granularity: MatchGranularity,
) -> Result<CaseScores, EvalError> {
    let pred_answer = execute_purpose(&purpose.query, pred_table)?;
    Ok(CaseScores {
        case_id: case_id.to_string(),
        topic: topic.to_string(),
        answer: eval_answer(&pred_answer, &purpose.gold_answer),
        column: eval_columns(pred_table, gold_table, &purpose.target_columns_gold)?,
        workflow: workflows.map(|(pred, gold)| eval_workflow_with(pred, gold, granularity)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorkflowMeans {
    pub exact: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// One line of the summary table: means over a group of cases.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub label: String,
    /// `None` for the all-topics row.
    pub topic: Option<String>,
    pub cases: usize,
    pub answer_exact: f64,
    pub answer_precision: f64,
    pub answer_recall: f64,
    pub answer_f1: f64,
    pub answer_similarity: f64,
    pub column_ratio: f64,
    pub workflow: Option<WorkflowMeans>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub cases: Vec<CaseScores>,
    pub baseline: Vec<CaseScores>,
    pub summary: Vec<SummaryRow>,
}

fn mean<I: Iterator<Item = f64>>(it: I) -> f64 {
    let (sum, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn summarize(label: &str, topic: Option<&str>, cases: &[&CaseScores]) -> SummaryRow {
    let b = |v: bool| if v { 1.0 } else { 0.0 };
    let wf: Vec<&WorkflowScores> = cases.iter().filter_map(|c| c.workflow.as_ref()).collect();
    let workflow = (!wf.is_empty() && wf.len() == cases.len()).then(|| WorkflowMeans {
        exact: mean(wf.iter().map(|w| b(w.exact))),
        precision: mean(wf.iter().map(|w| w.precision)),
        recall: mean(wf.iter().map(|w| w.recall)),
        f1: mean(wf.iter().map(|w| w.f1)),
    });
    SummaryRow {
        label: label.to_string(),
        topic: topic.map(str::to_string),
        cases: cases.len(),
        answer_exact: mean(cases.iter().map(|c| b(c.answer.exact))),
        answer_precision: mean(cases.iter().map(|c| c.answer.precision)),
        answer_recall: mean(cases.iter().map(|c| c.answer.recall)),
        answer_f1: mean(cases.iter().map(|c| c.answer.f1)),
        answer_similarity: mean(cases.iter().map(|c| c.answer.similarity)),
        column_ratio: mean(cases.iter().map(|c| c.column.ratio)),
        workflow,
    }
}

fn summarize_group(label: &str, cases: &[CaseScores], out: &mut Vec<SummaryRow>) {
    let all: Vec<&CaseScores> = cases.iter().collect();
    out.push(summarize(label, None, &all));
    let mut topics: BTreeMap<&str, Vec<&CaseScores>> = BTreeMap::new();
    for c in cases {
        topics.entry(c.topic.as_str()).or_default().push(c);
    }
    for (topic, group) in topics {
        out.push(summarize(label, Some(topic), &group));
    }
}

pub const BASELINE_LABEL: &str = "Baseline (Raw Tables)";

/// Arithmetic means per topic and overall, for the system under test and,
/// when given, the raw-table baseline.
pub fn aggregate(cases: Vec<CaseScores>, baseline: Vec<CaseScores>, label: &str) -> Result<EvalReport, EvalError> {
    if cases.is_empty() && baseline.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut summary = Vec::new();
    if !baseline.is_empty() {
        summarize_group(BASELINE_LABEL, &baseline, &mut summary);
    }
    if !cases.is_empty() {
        summarize_group(label, &cases, &mut summary);
    }
    Ok(EvalReport {
        cases,
        baseline,
        summary,
    })
}

impl EvalReport {
    /// Aligned text table: answer, column and workflow dimensions, with `--`
    /// where a row has no workflow.
    pub fn to_text_table(&self) -> String {
        let header = [
            "Model", "Topic", "N", "Precision", "Recall", "F1", "Similarity", "Ratio", "Exact",
            "Precision", "Recall", "F1",
        ];
        let fmt = |v: f64| format!("{v:.4}");
        let rows: Vec<Vec<String>> = self
            .summary
            .iter()
            .map(|r| {
                let mut cells = vec![
                    r.label.clone(),
                    r.topic.clone().unwrap_or_else(|| "all".into()),
                    r.cases.to_string(),
                    fmt(r.answer_precision),
                    fmt(r.answer_recall),
                    fmt(r.answer_f1),
                    fmt(r.answer_similarity),
                    fmt(r.column_ratio),
                ];
                match &r.workflow {
                    Some(w) => cells.extend([fmt(w.exact), fmt(w.precision), fmt(w.recall), fmt(w.f1)]),
                    None => cells.extend(std::iter::repeat_n("--".to_string(), 4)),
                }
                cells
            })
            .collect();
        let widths: Vec<usize> = (0..header.len())
            .map(|i| {
                rows.iter()
                    .map(|r| r[i].chars().count())
                    .chain([header[i].len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let line = |cells: &[String]| -> String {
            let mut s = String::new();
            for (i, c) in cells.iter().enumerate() {
                if i > 0 {
                    s.push_str(" | ");
                }
                if i < 2 {
                    let _ = write!(s, "{c:<w$}", w = widths[i]);
                } else {
                    let _ = write!(s, "{c:>w$}", w = widths[i]);
                }
            }
            s.trim_end().to_string()
        };
        let mut out = String::new();
        let answer_w = widths[3..7].iter().sum::<usize>() + 9;
        let wf_w = widths[8..12].iter().sum::<usize>() + 9;
        let lead = widths[0] + widths[1] + widths[2] + 6;
        let _ = writeln!(
            out,
            "{:lead$} | {:^answer_w$} | {:^rw$} | {:^wf_w$}",
            "",
            "Answer",
            "Column",
            "Workflow",
            rw = widths[7]
        );
        out.push_str(&line(&header.map(str::to_string)));
        out.push('\n');
        let rule: usize = widths.iter().sum::<usize>() + 3 * (widths.len() - 1);
        out.push_str(&"-".repeat(rule));
        out.push('\n');
        for r in &rows {
            out.push_str(&line(r));
            out.push('\n');
        }
        out
    }

    pub const CASES_CSV_HEADER: &'static str = "kind,case_id,topic,answer_exact,answer_precision,answer_recall,answer_f1,answer_similarity,column_ratio,workflow_exact,workflow_precision,workflow_recall,workflow_f1";

    /// Per-case rows for both the system and the baseline.
    pub fn cases_csv(&self) -> String {
        let mut out = String::from(Self::CASES_CSV_HEADER);
        out.push('\n');
        let rows = self
            .baseline
            .iter()
            .map(|c| ("baseline", c))
            .chain(self.cases.iter().map(|c| ("system", c)));
        for (kind, c) in rows {
            let wf = match &c.workflow {
                Some(w) => format!("{},{},{},{}", u8::from(w.exact), w.precision, w.recall, w.f1),
                None => ",,,".to_string(),
            };
            let _ = writeln!(
                out,
                "{kind},{},{},{},{},{},{},{},{},{wf}",
                csv_field(&c.case_id),
                csv_field(&c.topic),
                u8::from(c.answer.exact),
                c.answer.precision,
                c.answer.recall,
                c.answer.f1,
                c.answer.similarity,
                c.column.ratio,
            );
        }
        out
    }

    /// Workflow length statistics per case, predicted and reference.
    pub fn op_stats_csv(&self) -> String {
        let mut out = format!("case_id,topic,source,{}\n", OpStats::CSV_HEADER);
        for c in &self.cases {
            if let Some(w) = &c.workflow {
                for (source, stats) in [("predicted", &w.pred_stats), ("reference", &w.gold_stats)] {
                    let _ = writeln!(
                        out,
                        "{},{},{source},{}",
                        csv_field(&c.case_id),
                        csv_field(&c.topic),
                        stats.csv_row()
                    );
                }
            }
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
