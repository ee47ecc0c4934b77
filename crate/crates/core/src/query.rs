//! Executable analysis purposes.
//!
//! Each benchmark purpose carries a natural-language statement and a
//! [`QuerySpec`] that computes its [`Answer`] from a table. Missing cells
//! never pass a filter and never enter an aggregate. Text cells are coerced
//! through the numeric grammar when compared against numbers; rows whose
//! cells cannot be compared are dropped.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::{DateTime, Utc};
use rust_decimal::Decimal;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;
use thiserror::Error;

use crate::dates::DateParser;
use crate::numeric;
use crate::table::{parse_canonical_date, CellValue, Table, TableError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QueryError {
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("comparator {comparator} on column {column:?} cannot take literal {literal:?}")]
    TypeMismatch {
        column: String,
        comparator: Comparator,
        literal: String,
    },
    #[error("{0} requires a `by` column")]
    MissingBy(AggFn),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    DescriptiveStatistics,
    CountingGrouping,
    Classification,
    TimeBased,
    Correlation,
    Filtering,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = "=", alias = "eq")]
    Eq,
    #[serde(rename = "!=", alias = "ne", alias = "≠")]
    Ne,
    #[serde(rename = "<", alias = "lt")]
    Lt,
    #[serde(rename = "<=", alias = "le", alias = "≤")]
    Le,
    #[serde(rename = ">", alias = "gt")]
    Gt,
    #[serde(rename = ">=", alias = "ge", alias = "≥")]
    Ge,
    #[serde(rename = "contains")]
    Contains,
    #[serde(rename = "before")]
    Before,
    #[serde(rename = "after")]
    After,
}

impl fmt::Display for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Comparator::Eq => "=",
            Comparator::Ne => "!=",
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Gt => ">",
            Comparator::Ge => ">=",
            Comparator::Contains => "contains",
            Comparator::Before => "before",
            Comparator::After => "after",
        };
        f.write_str(s)
    }
}

/// A filter literal as written in a manifest: a JSON string or number.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Literal {
    Number(serde_json::Number),
    Text(String),
}

impl Literal {
    fn render(&self) -> String {
        match self {
            Literal::Number(n) => n.to_string(),
            Literal::Text(s) => s.clone(),
        }
    }

    fn as_decimal(&self) -> Option<Decimal> {
        match self {
            Literal::Number(n) => {
                let s = n.to_string();
                numeric::parse(&s).or_else(|| Decimal::from_scientific(&s).ok())
            }
            Literal::Text(s) => numeric::parse(s),
        }
    }

    fn as_date(&self, dates: &DateParser) -> Option<DateTime<Utc>> {
        match self {
            Literal::Text(s) => dates.parse(s),
            Literal::Number(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Filter {
    pub column: String,
    pub op: Comparator,
    pub value: Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggFn {
    Count,
    CountDistinct,
    Min,
    Max,
    Sum,
    Mean,
    ArgmaxBy,
    ArgminBy,
}

impl AggFn {
    pub fn name(self) -> &'static str {
        match self {
            AggFn::Count => "count",
            AggFn::CountDistinct => "count_distinct",
            AggFn::Min => "min",
            AggFn::Max => "max",
            AggFn::Sum => "sum",
            AggFn::Mean => "mean",
            AggFn::ArgmaxBy => "argmax_by",
            AggFn::ArgminBy => "argmin_by",
        }
    }
}

impl fmt::Display for AggFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Aggregate {
    #[serde(rename = "fn")]
    pub func: AggFn,
    pub column: String,
    /// Ranking column for `argmax_by` / `argmin_by`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub by: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderBy {
    /// A column name, or the aggregate's function name for grouped queries.
    pub key: String,
    #[serde(default)]
    pub descending: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct QuerySpec {
    #[serde(default)]
    pub select: Vec<String>,
    #[serde(default)]
    pub filters: Vec<Filter>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_by: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aggregate: Option<Aggregate>,
    #[serde(default)]
    pub distinct: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order_by: Option<OrderBy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<usize>,
}

impl QuerySpec {
    /// Every column the query reads.
    pub fn referenced_columns(&self) -> BTreeSet<&str> {
        let mut cols: BTreeSet<&str> = self.select.iter().map(String::as_str).collect();
        cols.extend(self.filters.iter().map(|f| f.column.as_str()));
        cols.extend(self.group_by.as_deref());
        if let Some(agg) = &self.aggregate {
            cols.insert(agg.column.as_str());
            cols.extend(agg.by.as_deref());
        }
        cols
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Purpose {
    pub id: String,
    pub statement: String,
    pub category: Category,
    #[serde(rename = "target_columns")]
    pub target_columns_gold: Vec<String>,
    pub query: QuerySpec,
    pub gold_answer: Answer,
}

pub type Record = BTreeMap<String, CellValue>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Answer {
    Scalar(CellValue),
    ValueList(Vec<CellValue>),
    Records(Vec<Record>),
}

impl Answer {
    /// Elements for element-wise scoring; a scalar is a one-element list.
    pub fn elements(&self) -> Vec<String> {
        match self {
            Answer::Scalar(c) => vec![c.render()],
            Answer::ValueList(vs) => vs.iter().map(CellValue::render).collect(),
            Answer::Records(rs) => rs.iter().map(record_json).collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            Answer::Scalar(_) => false,
            Answer::ValueList(v) => v.is_empty(),
            Answer::Records(r) => r.is_empty(),
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            Answer::Scalar(c) => cell_json(c),
            Answer::ValueList(vs) => Value::Array(vs.iter().map(cell_json).collect()),
            Answer::Records(rs) => Value::Array(
                rs.iter()
                    .map(|r| {
                        Value::Object(r.iter().map(|(k, v)| (k.clone(), cell_json(v))).collect())
                    })
                    .collect(),
            ),
        }
    }

    pub fn from_json(v: &Value) -> Result<Answer, String> {
        match v {
            Value::Array(items) if items.iter().any(Value::is_object) => {
                let records = items
                    .iter()
                    .map(|item| {
                        let obj = item
                            .as_object()
                            .ok_or_else(|| "records must all be objects".to_string())?;
                        obj.iter()
                            .map(|(k, v)| Ok((k.clone(), json_cell(v)?)))
                            .collect::<Result<Record, String>>()
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                if let Some(first) = records.first() {
                    if records.iter().any(|r| !r.keys().eq(first.keys())) {
                        return Err("records must share the same keys".into());
                    }
                }
                Ok(Answer::Records(records))
            }
            Value::Array(items) => Ok(Answer::ValueList(
                items.iter().map(json_cell).collect::<Result<_, _>>()?,
            )),
            other => Ok(Answer::Scalar(json_cell(other)?)),
        }
    }
}

impl Serialize for Answer {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Answer {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let v = Value::deserialize(deserializer)?;
        Answer::from_json(&v).map_err(D::Error::custom)
    }
}

fn cell_json(c: &CellValue) -> Value {
    match c {
        CellValue::Missing => Value::Null,
        other => Value::String(other.render()),
    }
}

fn json_cell(v: &Value) -> Result<CellValue, String> {
    match v {
        Value::Null => Ok(CellValue::Missing),
        Value::String(s) => Ok(CellValue::Text(s.clone())),
        Value::Number(n) => {
            let s = n.to_string();
            numeric::parse(&s)
                .or_else(|| Decimal::from_scientific(&s).ok())
                .map(CellValue::Number)
                .ok_or_else(|| format!("number {s} out of range"))
        }
        Value::Bool(b) => Ok(CellValue::Text(b.to_string())),
        other => Err(format!("unsupported answer value {other}")),
    }
}

fn record_json(r: &Record) -> String {
    let obj: serde_json::Map<String, Value> =
        r.iter().map(|(k, v)| (k.clone(), cell_json(v))).collect();
    serde_json::to_string(&Value::Object(obj)).expect("json values serialize")
}

/// Canonical text: scalar rendering, sorted list joined by `", "`, or
/// compact JSON (sorted keys) for records.
pub fn answer_to_canonical_text(answer: &Answer) -> String {
    match answer {
        Answer::Scalar(c) => c.render(),
        Answer::ValueList(vs) => {
            let mut items: Vec<String> = vs.iter().map(CellValue::render).collect();
            items.sort();
            items.join(", ")
        }
        Answer::Records(rs) => {
            let items: Vec<Value> = rs
                .iter()
                .map(|r| Value::Object(r.iter().map(|(k, v)| (k.clone(), cell_json(v))).collect()))
                .collect();
            serde_json::to_string(&Value::Array(items)).expect("json values serialize")
        }
    }
}

/// Comparable reading of a cell used by min/max/argmax and ordering.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum SortKey {
    Number(Decimal),
    Date(DateTime<Utc>),
    Text(String),
}

fn sort_key(c: &CellValue) -> Option<SortKey> {
    match c {
        CellValue::Missing => None,
        CellValue::Date(d) => Some(SortKey::Date(*d)),
        other => match other.numeric_value() {
            Some(n) => Some(SortKey::Number(n)),
            None => Some(SortKey::Text(other.render())),
        },
    }
}

/// Keys of the dominant kind only: numbers if any, else dates, else text.
fn comparable_keys<'a, I>(cells: I) -> Vec<(usize, SortKey)>
where
    I: Iterator<Item = (usize, &'a CellValue)>,
{
    let keys: Vec<(usize, SortKey)> = cells.filter_map(|(i, c)| sort_key(c).map(|k| (i, k))).collect();
    let rank = |k: &SortKey| match k {
        SortKey::Number(_) => 0,
        SortKey::Date(_) => 1,
        SortKey::Text(_) => 2,
    };
    let Some(best) = keys.iter().map(|(_, k)| rank(k)).min() else {
        return keys;
    };
    keys.into_iter().filter(|(_, k)| rank(k) == best).collect()
}

fn key_cell(k: SortKey) -> CellValue {
    match k {
        SortKey::Number(n) => CellValue::Number(n),
        SortKey::Date(d) => CellValue::Date(d),
        SortKey::Text(s) => CellValue::Text(s),
    }
}

struct Executor<'a> {
    table: &'a Table,
    dates: DateParser,
}

impl Executor<'_> {
    fn check_filter(&self, f: &Filter) -> Result<(), QueryError> {
        let ok = match f.op {
            Comparator::Before | Comparator::After => f.value.as_date(&self.dates).is_some(),
            Comparator::Lt | Comparator::Le | Comparator::Gt | Comparator::Ge => {
                f.value.as_decimal().is_some() || f.value.as_date(&self.dates).is_some()
            }
            Comparator::Eq | Comparator::Ne | Comparator::Contains => true,
        };
        if ok {
            Ok(())
        } else {
            Err(QueryError::TypeMismatch {
                column: f.column.clone(),
                comparator: f.op,
                literal: f.value.render(),
            })
        }
    }

    /// `None` when the cell cannot be compared with the literal.
    fn equals(&self, cell: &CellValue, lit: &Literal) -> Option<bool> {
        match (cell, lit) {
            (CellValue::Missing, _) => None,
            (_, Literal::Number(_)) => {
                let want = lit.as_decimal()?;
                cell.numeric_value().map(|n| n == want)
            }
            (CellValue::Text(t), Literal::Text(s)) => Some(t == s),
            (CellValue::Number(n), Literal::Text(s)) => numeric::parse(s).map(|v| v == *n),
            (CellValue::Date(d), Literal::Text(s)) => self.dates.parse(s).map(|v| v == *d),
        }
    }

    fn order(&self, cell: &CellValue, lit: &Literal) -> Option<Ordering> {
        if let CellValue::Date(d) = cell {
            return lit.as_date(&self.dates).map(|v| d.cmp(&v));
        }
        let want = lit.as_decimal()?;
        cell.numeric_value().map(|n| n.cmp(&want))
    }

    fn passes(&self, cell: &CellValue, f: &Filter) -> bool {
        if cell.is_missing() {
            return false;
        }
        let result = match f.op {
            Comparator::Eq => self.equals(cell, &f.value),
            Comparator::Ne => self.equals(cell, &f.value).map(|b| !b),
            Comparator::Lt => self.order(cell, &f.value).map(Ordering::is_lt),
            Comparator::Le => self.order(cell, &f.value).map(Ordering::is_le),
            Comparator::Gt => self.order(cell, &f.value).map(Ordering::is_gt),
            Comparator::Ge => self.order(cell, &f.value).map(Ordering::is_ge),
            Comparator::Contains => Some(cell.render().contains(&f.value.render())),
            Comparator::Before | Comparator::After => match cell {
                CellValue::Date(d) => f.value.as_date(&self.dates).map(|v| {
                    if f.op == Comparator::Before {
                        *d < v
                    } else {
                        *d > v
                    }
                }),
                _ => None,
            },
        };
        result.unwrap_or(false)
    }

    fn aggregate(&self, agg: &Aggregate, rows: &[usize]) -> Result<Answer, QueryError> {
        let col = self.table.column_index(&agg.column)?;
        let cells = || rows.iter().map(|&r| (r, self.table.cell(r, col))).filter(|(_, c)| !c.is_missing());
        let scalar = |c: CellValue| Ok(Answer::Scalar(c));
        match agg.func {
            AggFn::Count => scalar(CellValue::Number(Decimal::from(cells().count()))),
            AggFn::CountDistinct => {
                let distinct: BTreeSet<String> = cells().map(|(_, c)| c.render()).collect();
                scalar(CellValue::Number(Decimal::from(distinct.len())))
            }
            AggFn::Sum | AggFn::Mean => {
                let nums: Vec<Decimal> = cells().filter_map(|(_, c)| c.numeric_value()).collect();
                if nums.is_empty() {
                    return scalar(CellValue::Missing);
                }
                let total = nums
                    .iter()
                    .try_fold(Decimal::ZERO, |acc, n| acc.checked_add(*n));
                let Some(total) = total else {
                    return scalar(CellValue::Missing);
                };
                if agg.func == AggFn::Sum {
                    scalar(CellValue::Number(total))
                } else {
                    let mean = total / Decimal::from(nums.len());
                    scalar(CellValue::Number(mean.round_dp(10).normalize()))
                }
            }
            AggFn::Min | AggFn::Max => {
                let keys = comparable_keys(cells());
                let pick = if agg.func == AggFn::Min {
                    keys.into_iter().map(|(_, k)| k).min()
                } else {
                    keys.into_iter().map(|(_, k)| k).max()
                };
                scalar(pick.map_or(CellValue::Missing, key_cell))
            }
            AggFn::ArgmaxBy | AggFn::ArgminBy => {
                let by = agg.by.as_deref().ok_or(QueryError::MissingBy(agg.func))?;
                let by_col = self.table.column_index(by)?;
                let keys = comparable_keys(rows.iter().map(|&r| (r, self.table.cell(r, by_col))));
                let best = if agg.func == AggFn::ArgmaxBy {
                    keys.iter().map(|(_, k)| k).max()
                } else {
                    keys.iter().map(|(_, k)| k).min()
                };
                let Some(best) = best else {
                    return Ok(Answer::ValueList(Vec::new()));
                };
                let mut values: BTreeMap<String, CellValue> = BTreeMap::new();
                for (r, k) in &keys {
                    let v = self.table.cell(*r, col);
                    if k == best && !v.is_missing() {
                        values.insert(v.render(), v.clone());
                    }
                }
                let mut values: Vec<CellValue> = values.into_values().collect();
                if values.len() == 1 {
                    Ok(Answer::Scalar(values.remove(0)))
                } else {
                    Ok(Answer::ValueList(values))
                }
            }
        }
    }
}

fn dedup_by_render<T: Clone, F: Fn(&T) -> String>(items: Vec<T>, key: F) -> Vec<T> {
    let mut seen = BTreeSet::new();
    items.into_iter().filter(|i| seen.insert(key(i))).collect()
}

fn compare_cells(a: &CellValue, b: &CellValue) -> Ordering {
    match (sort_key(a), sort_key(b)) {
        (Some(x), Some(y)) => x.cmp(&y),
        (None, None) => Ordering::Equal,
        (None, Some(_)) => Ordering::Greater,
        (Some(_), None) => Ordering::Less,
    }
}

fn canonical_date(c: &CellValue) -> Option<CellValue> {
    c.as_text().and_then(parse_canonical_date).map(CellValue::Date)
}

/// Text cells holding the canonical timestamp rendering read back as dates,
/// so a cleaned table compares the same before and after a CSV round trip.
fn with_typed_dates(table: &Table) -> Option<Table> {
    let any = table.rows().iter().flatten().any(|c| canonical_date(c).is_some());
    if !any {
        return None;
    }
    let rows = table
        .rows()
        .iter()
        .map(|r| r.iter().map(|c| canonical_date(c).unwrap_or_else(|| c.clone())).collect())
        .collect();
    Some(Table::new(table.columns().to_vec(), rows).expect("same shape"))
}

/// Runs `query` against `table`.
pub fn execute_purpose(query: &QuerySpec, table: &Table) -> Result<Answer, QueryError> {
    let typed = with_typed_dates(table);
    let table = typed.as_ref().unwrap_or(table);
    for col in query.referenced_columns() {
        table.column_index(col)?;
    }
    if let Some(ob) = &query.order_by {
        let is_agg_key = query.aggregate.as_ref().is_some_and(|a| a.func.name() == ob.key);
        if !is_agg_key {
            table.column_index(&ob.key)?;
        }
    }
    let exec = Executor {
        table,
        dates: DateParser::default(),
    };
    for f in &query.filters {
        exec.check_filter(f)?;
    }
    let filter_cols: Vec<(usize, &Filter)> = query
        .filters
        .iter()
        .map(|f| Ok((table.column_index(&f.column)?, f)))
        .collect::<Result<_, TableError>>()?;
    let rows: Vec<usize> = (0..table.row_count())
        .filter(|&r| filter_cols.iter().all(|(c, f)| exec.passes(table.cell(r, *c), f)))
        .collect();

    if let Some(group_col) = &query.group_by {
        let gi = table.column_index(group_col)?;
        let mut groups: BTreeMap<String, (CellValue, Vec<usize>)> = BTreeMap::new();
        for &r in &rows {
            let key = table.cell(r, gi);
            if key.is_missing() {
                continue;
            }
            groups
                .entry(key.render())
                .or_insert_with(|| (key.clone(), Vec::new()))
                .1
                .push(r);
        }
        let mut records: Vec<Record> = Vec::with_capacity(groups.len());
        for (key_cell_value, members) in groups.into_values() {
            let mut rec = Record::new();
            rec.insert(group_col.clone(), key_cell_value);
            if let Some(agg) = &query.aggregate {
                let value = match exec.aggregate(agg, &members)? {
                    Answer::Scalar(c) => c,
                    Answer::ValueList(vs) => CellValue::Text(
                        vs.iter().map(CellValue::render).collect::<Vec<_>>().join(", "),
                    ),
                    Answer::Records(_) => unreachable!("aggregates never yield records"),
                };
                rec.insert(agg.func.name().to_string(), value);
            }
            records.push(rec);
        }
        if let Some(ob) = &query.order_by {
            records.sort_by(|a, b| {
                let ord = compare_cells(
                    a.get(&ob.key).unwrap_or(&CellValue::Missing),
                    b.get(&ob.key).unwrap_or(&CellValue::Missing),
                );
                if ob.descending {
                    ord.reverse()
                } else {
                    ord
                }
            });
        }
        if let Some(limit) = query.limit {
            records.truncate(limit);
        }
        let keys_only = query.aggregate.is_none()
            || (query.select.len() == 1 && &query.select[0] == group_col);
        if keys_only {
            return Ok(Answer::ValueList(
                records.into_iter().map(|mut r| r.remove(group_col).expect("group key")).collect(),
            ));
        }
        return Ok(Answer::Records(records));
    }

    if let Some(agg) = &query.aggregate {
        return exec.aggregate(agg, &rows);
    }

    let mut rows = rows;
    if let Some(ob) = &query.order_by {
        let oi = table.column_index(&ob.key)?;
        rows.sort_by(|&a, &b| {
            let ord = compare_cells(table.cell(a, oi), table.cell(b, oi));
            if ob.descending {
                ord.reverse()
            } else {
                ord
            }
        });
    }
    let select: Vec<usize> = query
        .select
        .iter()
        .map(|c| table.column_index(c))
        .collect::<Result<_, _>>()?;

    if select.len() == 1 {
        let mut values: Vec<CellValue> = rows
            .iter()
            .map(|&r| table.cell(r, select[0]).clone())
            .filter(|c| !c.is_missing())
            .collect();
        if query.distinct {
            values = dedup_by_render(values, CellValue::render);
        }
        if let Some(limit) = query.limit {
            values.truncate(limit);
        }
        return Ok(Answer::ValueList(values));
    }

    let mut records: Vec<Record> = rows
        .iter()
        .map(|&r| {
            query
                .select
                .iter()
                .zip(&select)
                .map(|(name, &ci)| (name.clone(), table.cell(r, ci).clone()))
                .collect()
        })
        .collect();
    if query.distinct {
        records = dedup_by_render(records, record_json);
    }
    if let Some(limit) = query.limit {
        records.truncate(limit);
    }
    Ok(Answer::Records(records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::load_csv;

    fn grid() -> Table {
        load_csv(
            "LoanAmount,City,State,Zip\n\
             30333,Honolulu,HI,96814\n\
             149900,Honolulu,HI,\n\
             148100,Honolulu,HI,96814\n\
             334444,,IL,\n\
             120,Urbana,IL,61802\n\
             100000,Chicago,IL,\n\
             1000.,Champaign,IL,61820\n"
                .as_bytes(),
        )
        .unwrap()
    }

    fn q(json: &str) -> QuerySpec {
        serde_json::from_str(json).unwrap()
    }

    #[test]
    fn count_distinct_city() {
        // Distinct non-missing cities by hand: Honolulu, Urbana, Chicago, Champaign.
        let oracle: BTreeSet<&str> = ["Honolulu", "Honolulu", "Honolulu", "Urbana", "Chicago", "Champaign"]
            .into_iter()
            .collect();
        let ans = execute_purpose(&q(r#"{"aggregate":{"fn":"count_distinct","column":"City"}}"#), &grid())
            .unwrap();
        assert_eq!(ans, Answer::Scalar(CellValue::Number(Decimal::from(oracle.len()))));
        assert_eq!(answer_to_canonical_text(&ans), "4");
    }

    #[test]
    fn highest_risk_facility_types() {
        let t = load_csv(
            b"Facility Type,Risk\nSCHOOL,Risk 1 (High)\nRESTAURANT,Risk 1 (High)\nSCHOOL,Risk 1 (High)\nGROCERY STORE,Risk 1 (High)\nDAYCARE,Risk 2 (Medium)\n",
        )
        .unwrap();
        let ans = execute_purpose(
            &q(r#"{"select":["Facility Type"],"filters":[{"column":"Risk","op":"=","value":"Risk 1 (High)"}],"distinct":true}"#),
            &t,
        )
        .unwrap();
        assert_eq!(answer_to_canonical_text(&ans), "GROCERY STORE, RESTAURANT, SCHOOL");
    }

    #[test]
    fn canonical_timestamps_read_as_dates() {
        let t = load_csv(b"d,x\n2023-05-10T00:00:00Z,a\n05/10/2023,b\n2023-05-09T00:00:00Z,c\n").unwrap();
        let eq = q(r#"{"select":["x"],"filters":[{"column":"d","op":"=","value":"2023-05-10"}]}"#);
        assert_eq!(answer_to_canonical_text(&execute_purpose(&eq, &t).unwrap()), "a");
        let before = q(r#"{"select":["x"],"filters":[{"column":"d","op":"before","value":"2023-05-10"}]}"#);
        assert_eq!(answer_to_canonical_text(&execute_purpose(&before, &t).unwrap()), "c");
    }

    #[test]
    fn filters_on_empty_table() {
        let t = load_csv(b"a,b\n").unwrap();
        let ans = execute_purpose(&q(r#"{"select":["a"],"filters":[{"column":"b","op":">","value":3}]}"#), &t)
            .unwrap();
        assert_eq!(ans, Answer::ValueList(vec![]));
    }

    #[test]
    fn numeric_filters_coerce_text() {
        let ans = execute_purpose(
            &q(r#"{"select":["City"],"filters":[{"column":"LoanAmount","op":">=","value":100000}]}"#),
            &grid(),
        )
        .unwrap();
        assert_eq!(answer_to_canonical_text(&ans), "Chicago, Honolulu, Honolulu");
    }

    #[test]
    fn sum_mean_min_max() {
        let t = grid();
        let run = |f: &str| {
            answer_to_canonical_text(
                &execute_purpose(&q(&format!(r#"{{"aggregate":{{"fn":"{f}","column":"LoanAmount"}}}}"#)), &t)
                    .unwrap(),
            )
        };
        assert_eq!(run("sum"), "763897");
        assert_eq!(run("min"), "120");
        assert_eq!(run("max"), "334444");
        assert_eq!(run("count"), "7");
        assert_eq!(run("mean"), "109128.1428571429");
    }

    #[test]
    fn grouped_max_records() {
        let ans = execute_purpose(
            &q(r#"{"group_by":"State","aggregate":{"fn":"max","column":"LoanAmount"}}"#),
            &grid(),
        )
        .unwrap();
        assert_eq!(
            answer_to_canonical_text(&ans),
            r#"[{"State":"HI","max":"149900"},{"State":"IL","max":"334444"}]"#
        );
    }

    #[test]
    fn grouped_count_top_key() {
        let ans = execute_purpose(
            &q(r#"{"select":["State"],"group_by":"State","aggregate":{"fn":"count","column":"City"},
                   "order_by":{"key":"count","descending":true},"limit":1}"#),
            &grid(),
        )
        .unwrap();
        assert_eq!(ans, Answer::ValueList(vec![CellValue::from("HI")]));
    }

    #[test]
    fn argmax_by_returns_value_at_max() {
        let ans = execute_purpose(
            &q(r#"{"aggregate":{"fn":"argmax_by","column":"City","by":"LoanAmount"}}"#),
            &grid(),
        )
        .unwrap();
        // Row with the largest amount has a missing city.
        assert_eq!(ans, Answer::ValueList(vec![]));
        let ans = execute_purpose(
            &q(r#"{"aggregate":{"fn":"argmin_by","column":"City","by":"LoanAmount"}}"#),
            &grid(),
        )
        .unwrap();
        assert_eq!(ans, Answer::Scalar(CellValue::from("Urbana")));
    }

    #[test]
    fn date_filters_need_date_cells() {
        let raw = load_csv(b"d,x\n2023-05-10,a\n05/09/2023,b\n").unwrap();
        let query = q(r#"{"select":["x"],"filters":[{"column":"d","op":"after","value":"2023-05-01"}]}"#);
        assert_eq!(execute_purpose(&query, &raw).unwrap(), Answer::ValueList(vec![]));
        let typed = crate::ops::apply_date(&raw, "d").unwrap();
        assert_eq!(answer_to_canonical_text(&execute_purpose(&query, &typed).unwrap()), "a, b");
    }

    #[test]
    fn type_mismatch_on_bad_literal() {
        let err = execute_purpose(
            &q(r#"{"select":["City"],"filters":[{"column":"Zip","op":"before","value":"soon"}]}"#),
            &grid(),
        )
        .unwrap_err();
        assert!(matches!(err, QueryError::TypeMismatch { comparator: Comparator::Before, .. }));
    }

    #[test]
    fn unknown_column() {
        let err = execute_purpose(&q(r#"{"select":["Nope"]}"#), &grid()).unwrap_err();
        assert!(matches!(err, QueryError::Table(TableError::UnknownColumn { .. })));
    }

    #[test]
    fn canonical_text_rules() {
        assert_eq!(answer_to_canonical_text(&Answer::Scalar(CellValue::Number(Decimal::from(4)))), "4");
        assert_eq!(
            answer_to_canonical_text(&Answer::ValueList(vec![
                "SCHOOL".into(),
                "RESTAURANT".into(),
                "GROCERY STORE".into()
            ])),
            "GROCERY STORE, RESTAURANT, SCHOOL"
        );
        assert_eq!(answer_to_canonical_text(&Answer::Records(vec![])), "[]");
    }

    #[test]
    fn answer_json_round_trip() {
        for text in [r#""RESTAURANT""#, r#"["a","b"]"#, r#"[{"k":"v","n":null}]"#, "4", "[]"] {
            let ans: Answer = serde_json::from_str(text).unwrap();
            let back: Answer = serde_json::from_value(ans.to_json()).unwrap();
            assert_eq!(answer_to_canonical_text(&back), answer_to_canonical_text(&ans));
        }
        assert!(serde_json::from_str::<Answer>(r#"[{"a":"1"},{"b":"2"}]"#).is_err());
    }
}
