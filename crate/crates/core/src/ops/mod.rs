//! The six column operations: `upper`, `trim`, `numeric`, `date`,
//! `mass_edit` and `regexr_transform`.
//!
//! Every operation is a pure function from a table to a new table. Only the
//! target column changes, and only `Text` cells are rewritten.

mod transform;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dates::DateParser;
use crate::numeric;
use crate::table::{CellValue, Table, TableError};

pub use transform::{eval_transform_expr, parse_transform_expr, ParseError, TransformExpr};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OpError {
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("mass_edit value {value:?} appears in more than one `from` group")]
    OverlappingEdit { value: String },
    #[error("mass_edit group {index} has an empty `from` list")]
    EmptyFrom { index: usize },
    #[error("mass_edit group {index} has an empty `to` value")]
    EmptyTo { index: usize },
    #[error(transparent)]
    Parse(#[from] ParseError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    Upper,
    Trim,
    #[serde(rename = "numeric")]
    ToNumeric,
    #[serde(rename = "date")]
    ToDate,
    MassEdit,
    RegexrTransform,
}

impl OpKind {
    pub const ALL: [OpKind; 6] = [
        OpKind::Upper,
        OpKind::Trim,
        OpKind::ToNumeric,
        OpKind::ToDate,
        OpKind::MassEdit,
        OpKind::RegexrTransform,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OpKind::Upper => "upper",
            OpKind::Trim => "trim",
            OpKind::ToNumeric => "numeric",
            OpKind::ToDate => "date",
            OpKind::MassEdit => "mass_edit",
            OpKind::RegexrTransform => "regexr_transform",
        }
    }

    /// Whether the operation needs generated arguments.
    pub fn takes_arguments(self) -> bool {
        matches!(self, OpKind::MassEdit | OpKind::RegexrTransform)
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("unknown operation {0:?}")]
pub struct UnknownOp(pub String);

impl FromStr for OpKind {
    type Err = UnknownOp;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        OpKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| UnknownOp(s.to_string()))
    }
}

/// One value group: every cell exactly equal to a member of `from` becomes `to`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MassEdit {
    pub from: Vec<String>,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MassEditSpec {
    pub edits: Vec<MassEdit>,
}

impl MassEditSpec {
    pub fn new(edits: Vec<MassEdit>) -> Result<Self, OpError> {
        let spec = Self { edits };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), OpError> {
        let mut owner: HashMap<&str, usize> = HashMap::new();
        for (index, edit) in self.edits.iter().enumerate() {
            if edit.from.is_empty() {
                return Err(OpError::EmptyFrom { index });
            }
            if edit.to.is_empty() {
                return Err(OpError::EmptyTo { index });
            }
            for value in &edit.from {
                match owner.insert(value, index) {
                    Some(prev) if prev != index => {
                        return Err(OpError::OverlappingEdit {
                            value: value.clone(),
                        })
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    fn lookup(&self) -> HashMap<&str, &str> {
        self.edits
            .iter()
            .flat_map(|e| e.from.iter().map(move |f| (f.as_str(), e.to.as_str())))
            .collect()
    }
}

/// A fully resolved operation, ready to run.
#[derive(Debug, Clone)]
pub enum Operation {
    Upper,
    Trim,
    ToNumeric,
    ToDate(DateParser),
    MassEdit(MassEditSpec),
    RegexrTransform(TransformExpr),
}

impl Operation {
    pub fn kind(&self) -> OpKind {
        match self {
            Operation::Upper => OpKind::Upper,
            Operation::Trim => OpKind::Trim,
            Operation::ToNumeric => OpKind::ToNumeric,
            Operation::ToDate(_) => OpKind::ToDate,
            Operation::MassEdit(_) => OpKind::MassEdit,
            Operation::RegexrTransform(_) => OpKind::RegexrTransform,
        }
    }
}

/// Result of applying one operation: the new table and how many cells changed.
#[derive(Debug, Clone)]
pub struct Applied {
    pub table: Table,
    pub cells_changed: usize,
}

pub fn apply(table: &Table, column: &str, op: &Operation) -> Result<Applied, OpError> {
    let (table, cells_changed) = match op {
        Operation::Upper => table.map_column(column, upper_cell)?,
        Operation::Trim => table.map_column(column, trim_cell)?,
        Operation::ToNumeric => table.map_column(column, numeric_cell)?,
        Operation::ToDate(parser) => table.map_column(column, |c| date_cell(parser, c))?,
        Operation::MassEdit(spec) => {
            spec.validate()?;
            let lookup = spec.lookup();
            table.map_column(column, |c| match c {
                CellValue::Text(s) => match lookup.get(s.as_str()) {
                    Some(to) => CellValue::Text((*to).to_string()),
                    None => c.clone(),
                },
                _ => c.clone(),
            })?
        }
        Operation::RegexrTransform(expr) => {
            table.map_column(column, |c| eval_transform_expr(expr, c))?
        }
    };
    Ok(Applied {
        table,
        cells_changed,
    })
}

pub fn apply_upper(table: &Table, column: &str) -> Result<Table, OpError> {
    apply(table, column, &Operation::Upper).map(|a| a.table)
}

pub fn apply_trim(table: &Table, column: &str) -> Result<Table, OpError> {
    apply(table, column, &Operation::Trim).map(|a| a.table)
}

pub fn apply_numeric(table: &Table, column: &str) -> Result<Table, OpError> {
    apply(table, column, &Operation::ToNumeric).map(|a| a.table)
}

pub fn apply_date(table: &Table, column: &str) -> Result<Table, OpError> {
    apply_date_with(table, column, &DateParser::default())
}

pub fn apply_date_with(table: &Table, column: &str, parser: &DateParser) -> Result<Table, OpError> {
    apply(table, column, &Operation::ToDate(parser.clone())).map(|a| a.table)
}

pub fn apply_mass_edit(table: &Table, column: &str, spec: &MassEditSpec) -> Result<Table, OpError> {
    apply(table, column, &Operation::MassEdit(spec.clone())).map(|a| a.table)
}

pub fn apply_regexr_transform(
    table: &Table,
    column: &str,
    expr: &TransformExpr,
) -> Result<Table, OpError> {
    apply(table, column, &Operation::RegexrTransform(expr.clone())).map(|a| a.table)
}

/// Simple (one-to-one) uppercase mapping; characters whose uppercase form
/// expands to several characters are kept as they are.
fn simple_upper(s: &str) -> String {
    s.chars()
        .map(|c| {
            let mut up = c.to_uppercase();
            match (up.next(), up.next()) {
                (Some(u), None) => u,
                _ => c,
            }
        })
        .collect()
}

fn upper_cell(cell: &CellValue) -> CellValue {
    match cell {
        CellValue::Text(s) => CellValue::Text(simple_upper(s)),
        other => other.clone(),
    }
}

fn trim_cell(cell: &CellValue) -> CellValue {
    match cell {
        // `str::trim` strips the Unicode White_Space set, which includes U+00A0.
        CellValue::Text(s) => CellValue::Text(s.trim().to_string()),
        other => other.clone(),
    }
}

fn numeric_cell(cell: &CellValue) -> CellValue {
    match cell {
        CellValue::Text(s) => numeric::parse(s).map_or_else(|| cell.clone(), CellValue::Number),
        other => other.clone(),
    }
}

fn date_cell(parser: &DateParser, cell: &CellValue) -> CellValue {
    match cell {
        CellValue::Text(s) => parser.parse(s).map_or_else(|| cell.clone(), CellValue::Date),
        other => other.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use rust_decimal::Decimal;

    fn single(values: Vec<CellValue>) -> Table {
        Table::new(
            vec!["c".into(), "other".into()],
            values
                .into_iter()
                .map(|v| vec![v, CellValue::from(" keep ")])
                .collect(),
        )
        .unwrap()
    }

    fn texts(values: &[&str]) -> Vec<CellValue> {
        values.iter().map(|v| CellValue::from(*v)).collect()
    }

    fn col(t: &Table) -> Vec<CellValue> {
        t.get_column("c").unwrap().values
    }

    #[test]
    fn upper_fixes_mixed_case() {
        let t = apply_upper(&single(texts(&["Ohare", "OHARE", "ohare"])), "c").unwrap();
        assert_eq!(col(&t), texts(&["OHARE", "OHARE", "OHARE"]));
        assert_eq!(t.get_column("other").unwrap().values, texts(&[" keep "; 3]));
    }

    #[test]
    fn upper_is_idempotent_and_skips_non_text() {
        let t = apply_upper(&single(texts(&["SCHOOL"])), "c").unwrap();
        assert_eq!(col(&t), texts(&["SCHOOL"]));
        let mixed = single(vec![CellValue::Missing, CellValue::Number(Decimal::from(3))]);
        assert_eq!(col(&apply_upper(&mixed, "c").unwrap()), col(&mixed));
    }

    #[test]
    fn upper_keeps_expanding_characters() {
        let t = apply_upper(&single(texts(&["straße"])), "c").unwrap();
        assert_eq!(col(&t), texts(&["STRAßE"]));
    }

    #[test]
    fn trim_cases() {
        let t = apply_trim(&single(texts(&[" x ", "a b", "\u{00A0}RESTAURANT\u{00A0}"])), "c")
            .unwrap();
        assert_eq!(col(&t), texts(&["x", "a b", "RESTAURANT"]));
    }

    #[test]
    fn trim_matches_codepoint_oracle() {
        // Explicit White_Space codepoint list, independent of `str::trim`.
        const WS: &[char] = &[
            '\u{9}', '\u{A}', '\u{B}', '\u{C}', '\u{D}', '\u{20}', '\u{85}', '\u{A0}', '\u{1680}',
            '\u{2000}', '\u{2001}', '\u{2002}', '\u{2003}', '\u{2004}', '\u{2005}', '\u{2006}',
            '\u{2007}', '\u{2008}', '\u{2009}', '\u{200A}', '\u{2028}', '\u{2029}', '\u{202F}',
            '\u{205F}', '\u{3000}',
        ];
        let oracle = |s: &str| -> String {
            let chars: Vec<char> = s.chars().collect();
            let start = chars.iter().position(|c| !WS.contains(c)).unwrap_or(chars.len());
            let end = chars.iter().rposition(|c| !WS.contains(c)).map_or(start, |e| e + 1);
            chars[start..end].iter().collect()
        };
        for s in ["\u{00A0}RESTAURANT\u{00A0}", "\u{3000} x\u{2009}", "\t\n", "a\u{00A0}b "] {
            let t = apply_trim(&single(texts(&[s])), "c").unwrap();
            assert_eq!(col(&t), vec![CellValue::Text(oracle(s))], "{s:?}");
        }
    }

    #[test]
    fn numeric_conversions() {
        let t = apply_numeric(&single(texts(&["1000.", "N/A", "1,234.5"])), "c").unwrap();
        assert_eq!(
            col(&t),
            vec![
                CellValue::Number(Decimal::from(1000)),
                CellValue::from("N/A"),
                CellValue::Number(Decimal::new(12345, 1)),
            ]
        );
    }

    #[test]
    fn numeric_reports_conversion_count() {
        let applied = apply(
            &single(texts(&["1", "x", "2"])),
            "c",
            &Operation::ToNumeric,
        )
        .unwrap();
        assert_eq!(applied.cells_changed, 2);
    }

    #[test]
    fn date_conversions() {
        let t = apply_date(&single(texts(&["2023/04/01", "not a date", "04/01/2023"])), "c")
            .unwrap();
        let expected = NaiveDate::from_ymd_opt(2023, 4, 1)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap()
            .and_utc();
        assert_eq!(
            col(&t),
            vec![
                CellValue::Date(expected),
                CellValue::from("not a date"),
                CellValue::Date(expected),
            ]
        );
    }

    #[test]
    fn mass_edit_merges_variants() {
        let spec = MassEditSpec::new(vec![
            MassEdit {
                from: vec!["SCHOOOL".into(), "school".into()],
                to: "SCHOOL".into(),
            },
            MassEdit {
                from: vec!["RESTUARANT".into()],
                to: "RESTAURANT".into(),
            },
            MassEdit {
                from: vec!["GROCRY STORE".into()],
                to: "GROCERY STORE".into(),
            },
        ])
        .unwrap();
        let t = apply_mass_edit(
            &single(texts(&["SCHOOOL", "RESTUARANT", "school", "GROCRY STORE"])),
            "c",
            &spec,
        )
        .unwrap();
        assert_eq!(
            col(&t),
            texts(&["SCHOOL", "RESTAURANT", "SCHOOL", "GROCERY STORE"])
        );
    }

    #[test]
    fn mass_edit_is_whole_cell_and_case_sensitive() {
        let spec = MassEditSpec::new(vec![MassEdit {
            from: vec!["school".into()],
            to: "SCHOOL".into(),
        }])
        .unwrap();
        let t = apply_mass_edit(&single(texts(&["School", "school ", "school"])), "c", &spec)
            .unwrap();
        assert_eq!(col(&t), texts(&["School", "school ", "SCHOOL"]));
    }

    #[test]
    fn empty_mass_edit_is_identity() {
        let t = single(texts(&["a", "b"]));
        assert_eq!(apply_mass_edit(&t, "c", &MassEditSpec::default()).unwrap(), t);
    }

    #[test]
    fn overlapping_edits_rejected() {
        let err = MassEditSpec::new(vec![
            MassEdit {
                from: vec!["x".into()],
                to: "y".into(),
            },
            MassEdit {
                from: vec!["x".into()],
                to: "z".into(),
            },
        ])
        .unwrap_err();
        assert_eq!(err, OpError::OverlappingEdit { value: "x".into() });
    }

    #[test]
    fn mass_edit_rejects_empty_groups() {
        let empty_from = MassEditSpec {
            edits: vec![MassEdit {
                from: vec![],
                to: "y".into(),
            }],
        };
        assert_eq!(empty_from.validate(), Err(OpError::EmptyFrom { index: 0 }));
        let empty_to = MassEditSpec {
            edits: vec![MassEdit {
                from: vec!["x".into()],
                to: String::new(),
            }],
        };
        assert_eq!(empty_to.validate(), Err(OpError::EmptyTo { index: 0 }));
    }

    #[test]
    fn regexr_transform_extracts_years() {
        let expr = parse_transform_expr(
            "jython: import re\nmatch = re.search(r'\\b\\d{4}\\b', value)\nif match:\n    return match.group(0)",
        )
        .unwrap();
        let t = apply_regexr_transform(
            &single(texts(&["Feyerabend,1975,", "Collins,1985", "Stanford,2006"])),
            "c",
            &expr,
        )
        .unwrap();
        assert_eq!(col(&t), texts(&["1975", "1985", "2006"]));
    }

    #[test]
    fn unknown_column_is_reported() {
        let err = apply_trim(&single(texts(&["a"])), "nope").unwrap_err();
        assert!(matches!(err, OpError::Table(TableError::UnknownColumn { .. })));
    }

    #[test]
    fn op_kind_names_round_trip() {
        for k in OpKind::ALL {
            assert_eq!(k.name().parse::<OpKind>().unwrap(), k);
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{}\"", k.name()));
        }
        assert!("delete_rows".parse::<OpKind>().is_err());
    }
}
