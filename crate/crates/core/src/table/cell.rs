// SPDX-License-Identifier: Apache-2.0

use std::fmt;

use serde::{Deserialize, Serialize};

/// Parsed content of a cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum CellValue {
    Number(f64),
    Text(String),
    Empty,
}

/// One grid cell: the source text plus its parsed value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub raw: String,
    pub value: CellValue,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit_hint: Option<String>,
}

impl Cell {
    /// Parses `raw` into a cell. Thousands separators are dropped and a
    /// trailing `%` is kept as a unit hint; the magnitude is stored as written.
    pub fn parse(raw: impl Into<String>) -> Self {
        let raw = raw.into();
        let (value, unit_hint) = parse_value(&raw);
        Cell {
            raw,
            value,
            unit_hint,
        }
    }

    pub fn empty() -> Self {
        Cell::parse("")
    }

    pub fn is_empty(&self) -> bool {
        matches!(self.value, CellValue::Empty)
    }

    pub fn as_number(&self) -> Option<f64> {
        match self.value {
            CellValue::Number(n) => Some(n),
            _ => None,
        }
    }

    /// Trimmed source text.
    pub fn text(&self) -> &str {
        self.raw.trim()
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.text())
    }
}

impl From<&str> for Cell {
    fn from(raw: &str) -> Self {
        Cell::parse(raw)
    }
}

impl From<String> for Cell {
    fn from(raw: String) -> Self {
        Cell::parse(raw)
    }
}

/// Numeric parsing shared by cells and answer normalization.
///
/// Returns the parsed number and an optional unit hint (`"%"`).
pub fn parse_number(text: &str) -> Option<(f64, Option<String>)> {
    let trimmed = text.trim();
    let (body, unit) = match trimmed.strip_suffix('%') {
        Some(rest) => (rest.trim_end(), Some("%".to_string())),
        None => (trimmed, None),
    };
    if body.is_empty() || !valid_grouping(body) {
        return None;
    }
    let cleaned: String = body.chars().filter(|c| *c != ',').collect();
    if !cleaned
        .chars()
        .all(|c| c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E'))
    {
        // rejects "inf", "nan" and friends that f64::from_str would accept
        return None;
    }
    if !cleaned.chars().any(|c| c.is_ascii_digit()) {
        return None;
    }
    cleaned.parse::<f64>().ok().map(|n| (n, unit))
}

// Commas are only accepted as thousands separators in the integer part.
fn valid_grouping(body: &str) -> bool {
    if !body.contains(',') {
        return true;
    }
    let unsigned = body.trim_start_matches(['-', '+']);
    let int_part = unsigned.split('.').next().unwrap_or("");
    if unsigned[int_part.len()..].contains(',') {
        return false;
    }
    let groups: Vec<&str> = int_part.split(',').collect();
    let first = groups[0];
    if first.is_empty() || first.len() > 3 {
        return false;
    }
    groups[1..].iter().all(|g| g.len() == 3)
}

fn parse_value(raw: &str) -> (CellValue, Option<String>) {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return (CellValue::Empty, None);
    }
    match parse_number(trimmed) {
        Some((n, unit)) => (CellValue::Number(n), unit),
        None => (CellValue::Text(trimmed.to_string()), None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn thousands_separators_are_stripped() {
        assert_eq!(Cell::parse("10,000").value, CellValue::Number(10000.0));
        assert_eq!(Cell::parse(" 1,234.5 ").value, CellValue::Number(1234.5));
    }

    #[test]
    fn percent_keeps_written_magnitude() {
        let c = Cell::parse("0.2%");
        assert_eq!(c.value, CellValue::Number(0.2));
        assert_eq!(c.unit_hint.as_deref(), Some("%"));
    }

    #[test]
    fn text_and_empty() {
        assert_eq!(Cell::parse("  ").value, CellValue::Empty);
        assert_eq!(Cell::parse("Cold").value, CellValue::Text("Cold".into()));
        assert_eq!(Cell::parse("nan").value, CellValue::Text("nan".into()));
        assert_eq!(Cell::parse("1,2").value, CellValue::Text("1,2".into()));
        assert_eq!(Cell::parse("-").value, CellValue::Text("-".into()));
        assert_eq!(Cell::parse("%").value, CellValue::Text("%".into()));
    }

    #[test]
    fn negative_numbers() {
        assert_eq!(Cell::parse("-1,500").value, CellValue::Number(-1500.0));
    }

    proptest! {
        #[test]
        fn reparsing_raw_is_idempotent(raw in "[ 0-9,.%a-z-]{0,12}") {
            let once = Cell::parse(raw.clone());
            let twice = Cell::parse(once.raw.clone());
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn formatted_integers_parse_back(n in -10_000_000i64..10_000_000) {
            let grouped = group_thousands(n);
            prop_assert_eq!(Cell::parse(grouped).value, CellValue::Number(n as f64));
        }
    }

    fn group_thousands(n: i64) -> String {
        let digits = n.unsigned_abs().to_string();
        let mut out = String::new();
        for (i, ch) in digits.chars().enumerate() {
            if i > 0 && (digits.len() - i).is_multiple_of(3) {
                out.push(',');
            }
            out.push(ch);
        }
        if n < 0 {
            format!("-{out}")
        } else {
            out
        }
    }
}
