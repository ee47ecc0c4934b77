//! The numeric grammar shared by the `numeric` operation, query coercion and
//! cell equivalence: optional sign, digits with optional `,` thousands
//! groups, optional decimal point (a trailing point is allowed), optional
//! surrounding whitespace. Currency symbols and exponents are not accepted.

use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;
use rust_decimal::Decimal;

static NUMERIC: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^\s*([+-]?)((?:\d{1,3}(?:,\d{3})+)|\d+)(?:\.(\d*))?\s*$").expect("valid pattern")
});

/// Parses `s` under the numeric grammar. Values that overflow the decimal
/// range are rejected.
pub fn parse(s: &str) -> Option<Decimal> {
    let caps = NUMERIC.captures(s)?;
    let sign = caps.get(1).map_or("", |m| m.as_str());
    let int_part = caps[2].replace(',', "");
    let frac = caps.get(3).map_or("", |m| m.as_str());
    let literal = if frac.is_empty() {
        format!("{sign}{int_part}")
    } else {
        format!("{sign}{int_part}.{frac}")
    };
    Decimal::from_str(&literal).ok()
}

/// Canonical rendering: no trailing fractional zeros, no negative zero.
pub fn render(d: Decimal) -> String {
    if d.is_zero() {
        return "0".to_string();
    }
    d.normalize().to_string()
}
