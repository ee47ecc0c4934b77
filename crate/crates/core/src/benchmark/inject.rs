//! Seeded error injection into clean tables.

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::table::{CellValue, Table, TableError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorFamily {
    DuplicateVariant,
    Formatting,
    CaseVariation,
    TypeError,
}

impl ErrorFamily {
    pub const ALL: [ErrorFamily; 4] = [
        ErrorFamily::DuplicateVariant,
        ErrorFamily::Formatting,
        ErrorFamily::CaseVariation,
        ErrorFamily::TypeError,
    ];
}

pub const TYPE_ERROR_TOKENS: [&str; 4] = ["N/A", "missing", "-", "unknown"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mix {
    pub duplicate_variant: f64,
    pub formatting: f64,
    pub case_variation: f64,
    pub type_error: f64,
}

impl Default for Mix {
    fn default() -> Self {
        Self {
            duplicate_variant: 0.25,
            formatting: 0.25,
            case_variation: 0.25,
            type_error: 0.25,
        }
    }
}

impl Mix {
    pub fn weight(&self, f: ErrorFamily) -> f64 {
        match f {
            ErrorFamily::DuplicateVariant => self.duplicate_variant,
            ErrorFamily::Formatting => self.formatting,
            ErrorFamily::CaseVariation => self.case_variation,
            ErrorFamily::TypeError => self.type_error,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorProfile {
    /// Fraction of target-column cells to corrupt.
    pub rate: f64,
    #[serde(default)]
    pub mix: Mix,
    pub seed: u64,
    pub columns: Vec<String>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InjectError {
    #[error("invalid profile: {0}")]
    Profile(String),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("no cell in the target columns is eligible for any error family")]
    NoEligibleCells,
}

impl ErrorProfile {
    pub fn validate(&self) -> Result<(), InjectError> {
        let bad = |m: String| Err(InjectError::Profile(m));
        if !(0.0..=1.0).contains(&self.rate) {
            return bad(format!("rate {} is outside [0, 1]", self.rate));
        }
        let weights = ErrorFamily::ALL.map(|f| self.mix.weight(f));
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return bad("mix weights must be non-negative".into());
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return bad(format!("mix weights sum to {sum}, expected 1"));
        }
        if self.columns.is_empty() {
            return bad("no target columns".into());
        }
        Ok(())
    }
}

/// Cell contents in the error log: `null` for a missing cell, else its text.
mod cell_json {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::table::CellValue;

    pub fn serialize<S: Serializer>(v: &CellValue, s: S) -> Result<S::Ok, S::Error> {
        match v {
            CellValue::Missing => s.serialize_none(),
            other => s.serialize_some(&other.render()),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CellValue, D::Error> {
        Ok(match Option::<String>::deserialize(d)? {
            None => CellValue::Missing,
            Some(s) => CellValue::Text(s),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorEntry {
    /// Zero-based data row.
    pub row: usize,
    pub column: String,
    #[serde(with = "cell_json")]
    pub original: CellValue,
    #[serde(with = "cell_json")]
    pub corrupted: CellValue,
    pub family: ErrorFamily,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorLog {
    pub entries: Vec<ErrorEntry>,
}

impl ErrorLog {
    /// Corrupted cells over all target cells.
    pub fn realized_rate(&self, rows: usize, columns: usize) -> f64 {
        let cells = rows * columns;
        if cells == 0 {
            0.0
        } else {
            self.entries.len() as f64 / cells as f64
        }
    }
}

fn is_numeric(v: &CellValue) -> bool {
    v.numeric_value().is_some()
}

fn flippable(c: char) -> Option<char> {
    let mut up = c.to_uppercase();
    let mut low = c.to_lowercase();
    let (u, l) = (up.next()?, low.next()?);
    if up.next().is_some() || low.next().is_some() {
        return None;
    }
    if c == u && c != l {
        Some(l)
    } else if c == l && c != u {
        Some(u)
    } else {
        None
    }
}

pub fn eligible(family: ErrorFamily, v: &CellValue) -> bool {
    match (family, v) {
        (_, CellValue::Missing) | (_, CellValue::Date(_)) => false,
        (ErrorFamily::Formatting, _) => true,
        (ErrorFamily::TypeError, v) => is_numeric(v),
        (ErrorFamily::DuplicateVariant, CellValue::Text(s)) => {
            !is_numeric(v) && s.chars().filter(|c| c.is_alphabetic()).count() >= 2
        }
        (ErrorFamily::CaseVariation, CellValue::Text(s)) => s.chars().any(|c| flippable(c).is_some()),
        _ => false,
    }
}

fn duplicate_variant(s: &str, rng: &mut ChaCha8Rng) -> String {
    let chars: Vec<char> = s.chars().collect();
    let swaps: Vec<usize> = (0..chars.len().saturating_sub(1))
        .filter(|&i| chars[i] != chars[i + 1] && !chars[i].is_whitespace() && !chars[i + 1].is_whitespace())
        .collect();
    let gaps: Vec<usize> = (1..chars.len())
        .filter(|&i| !chars[i - 1].is_whitespace() && !chars[i].is_whitespace())
        .collect();
    let letters: Vec<usize> = (0..chars.len()).filter(|&i| chars[i].is_alphabetic()).collect();
    let mut kinds = vec![0u8];
    if !swaps.is_empty() {
        kinds.push(1);
    }
    if !gaps.is_empty() {
        kinds.push(2);
    }
    let mut out = chars.clone();
    match kinds[rng.gen_range(0..kinds.len())] {
        1 => {
            let i = swaps[rng.gen_range(0..swaps.len())];
            out.swap(i, i + 1);
        }
        2 => {
            let i = gaps[rng.gen_range(0..gaps.len())];
            out.insert(i, ' ');
        }
        _ => {
            let i = letters[rng.gen_range(0..letters.len())];
            out.remove(i);
        }
    }
    out.into_iter().collect()
}

fn formatting(s: &str, rng: &mut ChaCha8Rng) -> String {
    let pad = " ".repeat(rng.gen_range(1..=3));
    match rng.gen_range(0..4) {
        0 => format!("{pad}{s}"),
        1 => format!("{s}{pad}"),
        2 => format!("{pad}{s}{pad}"),
        _ if rng.gen_bool(0.5) => format!("\u{a0}{s}"),
        _ => format!("{s}\u{a0}"),
    }
}

fn case_variation(s: &str, rng: &mut ChaCha8Rng) -> String {
    let mut chars: Vec<char> = s.chars().collect();
    let candidates: Vec<usize> = (0..chars.len()).filter(|&i| flippable(chars[i]).is_some()).collect();
    let mut flipped = false;
    for &i in &candidates {
        if rng.gen_bool(0.5) {
            chars[i] = flippable(chars[i]).expect("candidate");
            flipped = true;
        }
    }
    if !flipped {
        let i = candidates[rng.gen_range(0..candidates.len())];
        chars[i] = flippable(chars[i]).expect("candidate");
    }
    chars.into_iter().collect()
}

pub fn corrupt(family: ErrorFamily, v: &CellValue, rng: &mut ChaCha8Rng) -> CellValue {
    let s = v.render();
    CellValue::Text(match family {
        ErrorFamily::DuplicateVariant => duplicate_variant(&s, rng),
        ErrorFamily::Formatting => formatting(&s, rng),
        ErrorFamily::CaseVariation => case_variation(&s, rng),
        ErrorFamily::TypeError => TYPE_ERROR_TOKENS[rng.gen_range(0..TYPE_ERROR_TOKENS.len())].to_string(),
    })
}

/// Corrupts `round(rate * rows * |columns|)` cells drawn uniformly without
/// replacement. A family that cannot apply to the drawn cell is redrawn
/// among those that can, by weight. If fewer cells are eligible than
/// requested, every eligible cell is corrupted.
pub fn inject_errors(table: &Table, profile: &ErrorProfile) -> Result<(Table, ErrorLog), InjectError> {
    profile.validate()?;
    let col_idx: Vec<usize> = profile
        .columns
        .iter()
        .map(|c| table.column_index(c))
        .collect::<Result<_, _>>()?;
    let target_cells = table.row_count() * col_idx.len();
    let k = (profile.rate * target_cells as f64).round() as usize;
    if k == 0 {
        return Ok((table.clone(), ErrorLog::default()));
    }
    let weights = ErrorFamily::ALL.map(|f| profile.mix.weight(f));
    let families_for = |v: &CellValue| -> Vec<usize> {
        (0..4).filter(|&i| weights[i] > 0.0 && eligible(ErrorFamily::ALL[i], v)).collect()
    };

    let mut pool: Vec<(usize, usize)> = (0..table.row_count())
        .flat_map(|r| col_idx.iter().map(move |&c| (r, c)))
        .filter(|&(r, c)| !families_for(table.cell(r, c)).is_empty())
        .collect();
    if pool.is_empty() {
        return Err(InjectError::NoEligibleCells);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
    pool.shuffle(&mut rng);
    pool.truncate(k);
    pool.sort_unstable();

    let mut out = table.clone();
    let mut log = ErrorLog::default();
    for (r, c) in pool {
        let original = table.cell(r, c).clone();
        let options = families_for(&original);
        let dist = WeightedIndex::new(options.iter().map(|&i| weights[i])).expect("positive weights");
        let family = ErrorFamily::ALL[options[dist.sample(&mut rng)]];
        let corrupted = corrupt(family, &original, &mut rng);
        out = out.with_cell(r, c, corrupted.clone());
        log.entries.push(ErrorEntry {
            row: r,
            column: table.columns()[c].clone(),
            original,
            corrupted,
            family,
        });
    }
    Ok((out, log))
}
