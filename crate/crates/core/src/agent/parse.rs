//! Turning free-text model replies into structured values.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::ops::{parse_transform_expr, MassEdit, MassEditSpec, OpKind, TransformExpr};

/// Verdict on one quality dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    True,
    False,
    #[serde(rename = "NA")]
    Na,
}

impl Verdict {
    pub fn passes(self) -> bool {
        self != Verdict::False
    }

    fn label(self) -> &'static str {
        match self {
            Verdict::True => "True",
            Verdict::False => "False",
            Verdict::Na => "NA",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QualityReport {
    pub accuracy: Verdict,
    pub relevance: Verdict,
    pub completeness: Verdict,
    pub conciseness: Verdict,
    pub flag: bool,
    pub explanation: String,
    pub objectives: Vec<String>,
}

impl QualityReport {
    pub fn dimensions(&self) -> [(&'static str, Verdict); 4] {
        [
            ("Accuracy", self.accuracy),
            ("Relevance", self.relevance),
            ("Completeness", self.completeness),
            ("Conciseness", self.conciseness),
        ]
    }

    /// Text placed into later prompts.
    pub fn render(&self) -> String {
        let mut out = format!("Flag: {}\n", if self.flag { "True" } else { "False" });
        let dims: Vec<String> = self.dimensions().iter().map(|(n, v)| format!("{n}: {}", v.label())).collect();
        out.push_str(&dims.join(", "));
        out.push('\n');
        if !self.explanation.is_empty() {
            out.push_str(&format!("Explanations: {}\n", self.explanation));
        }
        if !self.objectives.is_empty() {
            out.push_str(&format!("Objectives: {}\n", self.objectives.join("; ")));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpChoice {
    pub op: OpKind,
    pub explanation: String,
    pub raw_response: String,
}

static LIST_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\[([^\[\]]*)\]").unwrap());
static QUOTED_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r#"'([^']*)'|"([^"]*)""#).unwrap());
static DIM_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b(accuracy|relevance|completeness|conciseness)\s*\**\s*:\s*\**\s*(true|false|n/?a)\b").unwrap()
});
static EXPL_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?is)explanations?\s*:\s*(.*)").unwrap());
static OBJ_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)objectives?\s*:\s*(.*)").unwrap());
static SELECTED_OP_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)selected\s+operation\s*:\s*[*`'\x22]*\s*([A-Za-z_]+)").unwrap());
static WORD_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[A-Za-z_]+").unwrap());

/// Column names from the first bracketed, quoted list in the reply.
pub fn parse_column_list(response: &str) -> Option<Vec<String>> {
    for cap in LIST_RE.captures_iter(response) {
        let inner = &cap[1];
        let names: Vec<String> = QUOTED_RE
            .captures_iter(inner)
            .map(|c| c.get(1).or_else(|| c.get(2)).map(|m| m.as_str().trim().to_string()).unwrap_or_default())
            .filter(|s| !s.is_empty())
            .collect();
        if !names.is_empty() {
            return Some(names);
        }
    }
    None
}

fn verdict(word: &str) -> Verdict {
    match word.to_ascii_lowercase().as_str() {
        "true" => Verdict::True,
        "false" => Verdict::False,
        _ => Verdict::Na,
    }
}

/// Parses a quality report. All four dimensions must be present. The flag
/// is derived from the dimensions rather than read from the reply.
pub fn parse_quality_report(response: &str, column: &str) -> Option<QualityReport> {
    let mut dims: [Option<Verdict>; 4] = [None; 4];
    for cap in DIM_RE.captures_iter(response) {
        let slot = match cap[1].to_ascii_lowercase().as_str() {
            "accuracy" => 0,
            "relevance" => 1,
            "completeness" => 2,
            _ => 3,
        };
        dims[slot].get_or_insert(verdict(&cap[2]));
    }
    let [Some(accuracy), Some(relevance), Some(completeness), Some(conciseness)] = dims else {
        return None;
    };
    let flag = [accuracy, relevance, completeness, conciseness].iter().all(|v| v.passes());
    let explanation = EXPL_RE
        .captures(response)
        .map(|c| c[1].to_string())
        .unwrap_or_else(|| response.to_string());
    let explanation = match OBJ_RE.find(&explanation) {
        Some(m) => explanation[..m.start()].trim().to_string(),
        None => explanation.trim().to_string(),
    };
    let mut objectives: Vec<String> = if flag {
        Vec::new()
    } else {
        OBJ_RE
            .captures(response)
            .map(|c| {
                c[1].split(';')
                    .map(|s| s.trim().trim_start_matches(['-', '*']).trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect()
            })
            .unwrap_or_default()
    };
    let mut report = QualityReport {
        accuracy,
        relevance,
        completeness,
        conciseness,
        flag,
        explanation,
        objectives: Vec::new(),
    };
    if !flag && objectives.is_empty() {
        objectives = report
            .dimensions()
            .iter()
            .filter(|(_, v)| !v.passes())
            .map(|(n, _)| format!("improve {} of column {column}", n.to_lowercase()))
            .collect();
    }
    report.objectives = objectives;
    Some(report)
}

/// Reads the chosen operation: an explicit `Selected Operation:` label, else
/// a reply that starts with an operation name, else the only operation
/// named anywhere in the reply.
pub fn parse_op_choice(response: &str) -> Option<OpChoice> {
    let explanation = EXPL_RE
        .captures(response)
        .map(|c| c[1].trim().to_string())
        .unwrap_or_default();
    let choice = |op| OpChoice {
        op,
        explanation: explanation.clone(),
        raw_response: response.to_string(),
    };
    if let Some(c) = SELECTED_OP_RE.captures(response) {
        return c[1].to_ascii_lowercase().parse().ok().map(choice);
    }
    let words: Vec<&str> = WORD_RE.find_iter(response).map(|m| m.as_str()).collect();
    if let Some(op) = words.first().and_then(|w| w.to_ascii_lowercase().parse::<OpKind>().ok()) {
        return Some(choice(op));
    }
    let mut named: Vec<OpKind> = words.iter().filter_map(|w| w.to_ascii_lowercase().parse().ok()).collect();
    named.sort();
    named.dedup();
    match named.as_slice() {
        [op] => Some(choice(*op)),
        _ => None,
    }
}

fn strip_fences(s: &str) -> &str {
    let s = s.trim();
    let s = s.strip_prefix("```json").or_else(|| s.strip_prefix("```")).unwrap_or(s);
    s.strip_suffix("```").unwrap_or(s).trim()
}

fn json_slice(s: &str, open: char, close: char) -> Option<&str> {
    let start = s.find(open)?;
    let end = s.rfind(close)?;
    (end > start).then(|| &s[start..=end])
}

fn edits_from_value(v: &Value) -> Option<Vec<MassEdit>> {
    let v = v.get("edits").unwrap_or(v);
    let items = match v {
        Value::Array(items) => items.clone(),
        Value::Object(_) => vec![v.clone()],
        _ => return None,
    };
    let mut edits: Vec<MassEdit> = Vec::new();
    for item in &items {
        let obj = item.as_object()?;
        if let (Some(from), Some(to)) = (obj.get("from"), obj.get("to")) {
            let from = match from {
                Value::Array(xs) => xs.iter().map(|x| x.as_str().map(str::to_string)).collect::<Option<Vec<_>>>()?,
                Value::String(s) => vec![s.clone()],
                _ => return None,
            };
            edits.push(MassEdit {
                from,
                to: to.as_str()?.to_string(),
            });
        } else {
            // {"variant": "canonical", ...}: one pair per key, grouped by target.
            for (from, to) in obj {
                let to = to.as_str()?;
                match edits.iter_mut().find(|e| e.to == to) {
                    Some(e) => e.from.push(from.clone()),
                    None => edits.push(MassEdit {
                        from: vec![from.clone()],
                        to: to.to_string(),
                    }),
                }
            }
        }
    }
    Some(edits)
}

/// Parses a mass_edit edits list. Accepts `[{"from": [...], "to": ...}]`,
/// the same wrapped in `{"edits": ...}`, or variant-to-canonical maps.
/// Single-quoted JSON is tolerated.
pub fn parse_mass_edit(response: &str) -> Result<MassEditSpec, String> {
    let body = strip_fences(response);
    let candidate = json_slice(body, '[', ']')
        .filter(|_| !body.trim_start().starts_with('{'))
        .or_else(|| json_slice(body, '{', '}'))
        .ok_or("no JSON list or object in reply")?;
    let value: Value = serde_json::from_str(candidate)
        .or_else(|_| serde_json::from_str(&candidate.replace('\'', "\"")))
        .map_err(|e| format!("invalid JSON: {e}"))?;
    let edits = edits_from_value(&value).ok_or("unexpected edits shape")?;
    if edits.is_empty() {
        return Err("empty edits list".into());
    }
    MassEditSpec::new(edits).map_err(|e| e.to_string())
}

/// Extracts a `jython:` snippet from the reply and parses it.
pub fn parse_transform_reply(response: &str) -> Result<TransformExpr, String> {
    let body = strip_fences(response);
    let start = body.find("jython:").ok_or("no jython: snippet in reply")?;
    let snippet = body[start..].trim_end();
    let snippet = snippet.split("```").next().unwrap_or(snippet).trim_end();
    parse_transform_expr(snippet).map_err(|e| e.to_string())
}
