//! Date recognition for the `date` operation and for date-literal filters.

use chrono::{DateTime, NaiveDate, NaiveDateTime, NaiveTime, Utc};
use serde::{Deserialize, Serialize};

/// One accepted input shape. Order in [`DateParser::formats`] is the order
/// in which shapes are tried.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DateFormat {
    /// `YYYY-MM-DD`, optionally followed by `THH:MM[:SS]` (or a space) and `Z`.
    Iso,
    /// `YYYY/MM/DD`
    YearSlash,
    /// `MM/DD/YYYY` or `DD/MM/YYYY`, depending on [`SlashOrder`].
    NumericSlash,
    /// `Month D, YYYY` (full or abbreviated month name)
    MonthNameFirst,
    /// `D Month YYYY`
    DayFirstMonthName,
    /// `H:MM` / `HH:MM` and `H:MM AM|PM`, pinned to 1970-01-01.
    TimeOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlashOrder {
    #[default]
    MonthFirst,
    DayFirst,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateParser {
    pub formats: Vec<DateFormat>,
    #[serde(default)]
    pub slash_order: SlashOrder,
}

impl Default for DateParser {
    fn default() -> Self {
        Self {
            formats: vec![
                DateFormat::Iso,
                DateFormat::YearSlash,
                DateFormat::NumericSlash,
                DateFormat::MonthNameFirst,
                DateFormat::DayFirstMonthName,
                DateFormat::TimeOnly,
            ],
            slash_order: SlashOrder::MonthFirst,
        }
    }
}

impl DateParser {
    pub fn parse(&self, raw: &str) -> Option<DateTime<Utc>> {
        let s = raw.trim();
        if s.is_empty() {
            return None;
        }
        self.formats
            .iter()
            .find_map(|f| self.parse_with(*f, s))
            .map(|naive| naive.and_utc())
    }

    fn parse_with(&self, format: DateFormat, s: &str) -> Option<NaiveDateTime> {
        match format {
            DateFormat::Iso => parse_iso(s),
            DateFormat::YearSlash => date_only(s, "%Y/%m/%d"),
            DateFormat::NumericSlash => match self.slash_order {
                SlashOrder::MonthFirst => date_only(s, "%m/%d/%Y"),
                SlashOrder::DayFirst => date_only(s, "%d/%m/%Y"),
            },
            DateFormat::MonthNameFirst => {
                date_only(s, "%B %d, %Y").or_else(|| date_only(s, "%B %d %Y"))
            }
            DateFormat::DayFirstMonthName => date_only(s, "%d %B %Y"),
            DateFormat::TimeOnly => parse_time(s),
        }
    }
}

fn date_only(s: &str, fmt: &str) -> Option<NaiveDateTime> {
    // chrono accepts years with more than four digits; the accepted shapes
    // all carry exactly four.
    if !s.split(|c: char| !c.is_ascii_digit()).any(|run| run.len() == 4) {
        return None;
    }
    NaiveDate::parse_from_str(s, fmt)
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
}

fn parse_iso(s: &str) -> Option<NaiveDateTime> {
    let s = s.strip_suffix('Z').unwrap_or(s);
    if s.len() < 10 || !s.as_bytes()[..4].iter().all(u8::is_ascii_digit) || s.as_bytes()[4] != b'-'
    {
        return None;
    }
    if s.len() == 10 {
        return date_only(s, "%Y-%m-%d");
    }
    for fmt in [
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%d %H:%M",
    ] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt);
        }
    }
    None
}

fn parse_time(s: &str) -> Option<NaiveDateTime> {
    let epoch = NaiveDate::from_ymd_opt(1970, 1, 1)?;
    let upper = s.to_ascii_uppercase();
    let time = if upper.ends_with("AM") || upper.ends_with("PM") {
        NaiveTime::parse_from_str(&upper, "%I:%M %p")
            .or_else(|_| NaiveTime::parse_from_str(&upper, "%I:%M%p"))
            .ok()?
    } else {
        let (h, m) = s.split_once(':')?;
        if h.is_empty() || h.len() > 2 || m.len() != 2 {
            return None;
        }
        NaiveTime::parse_from_str(s, "%H:%M").ok()?
    };
    Some(epoch.and_time(time))
}
