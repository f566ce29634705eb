// SPDX-License-Identifier: Apache-2.0

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::table::parse_number;
use crate::value::{format_number, Value};

pub const NUMERIC_TOLERANCE: f64 = 1e-6;

/// Comparable form of an answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Canonical {
    Number(f64),
    Text(String),
    List(Vec<Canonical>),
}

impl fmt::Display for Canonical {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Canonical::Number(n) => f.write_str(&format_number(*n)),
            Canonical::Text(s) => f.write_str(s),
            Canonical::List(items) => {
                let parts: Vec<String> = items.iter().map(ToString::to_string).collect();
                write!(f, "[{}]", parts.join(", "))
            }
        }
    }
}

/// Trims, lowercases and collapses whitespace; numeric text (thousands
/// separators, trailing `%`) becomes a number.
pub fn normalize_text(raw: &str) -> Canonical {
    let trimmed = raw.trim();
    if let Some((n, _)) = parse_number(trimmed) {
        return Canonical::Number(n);
    }
    Canonical::Text(trimmed.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase())
}

/// Canonical form of a program result. Sub-tables with one cell unwrap to
/// that cell; larger ones become their cells in row-major order.
pub fn normalize_answer(v: &Value) -> Canonical {
    match v {
        Value::Null => Canonical::Text(String::new()),
        Value::Bool(true) => Canonical::Text("yes".into()),
        Value::Bool(false) => Canonical::Text("no".into()),
        Value::Number(n) => Canonical::Number(*n),
        Value::Text(s) => normalize_text(s),
        Value::List(items) => Canonical::List(items.iter().map(normalize_answer).collect()),
        Value::Table(t) => {
            let cells: Vec<Canonical> = t
                .values()
                .iter()
                .flatten()
                .map(|c| normalize_text(c.text()))
                .collect();
            if cells.len() == 1 {
                cells.into_iter().next().expect("one cell")
            } else {
                Canonical::List(cells)
            }
        }
    }
}

fn numbers_close(a: f64, b: f64) -> bool {
    let diff = (a - b).abs();
    diff <= NUMERIC_TOLERANCE || diff <= NUMERIC_TOLERANCE * a.abs().max(b.abs())
}

fn scalar_eq(a: &Canonical, b: &Canonical) -> bool {
    match (a, b) {
        (Canonical::Number(x), Canonical::Number(y)) => numbers_close(*x, *y),
        (Canonical::Text(x), Canonical::Text(y)) => x == y,
        (Canonical::List(x), y) | (y, Canonical::List(x)) if x.len() == 1 => scalar_eq(&x[0], y),
        _ => false,
    }
}

fn multiset_eq(pred: &[Canonical], gold: &[Canonical]) -> bool {
    if pred.len() != gold.len() {
        return false;
    }
    let mut used = vec![false; gold.len()];
    pred.iter().all(|p| {
        match gold.iter().enumerate().position(|(i, g)| !used[i] && scalar_eq(p, g)) {
            Some(i) => {
                used[i] = true;
                true
            }
            None => false,
        }
    })
}

/// True iff `pred` matches the gold answers: a scalar (or one-element list)
/// must equal some gold value, a longer list must equal the gold list as a multiset.
pub fn answers_match(pred: &Canonical, gold: &[String]) -> bool {
    let gold: Vec<Canonical> = gold.iter().map(|g| normalize_text(g)).collect();
    match pred {
        Canonical::List(items) if items.len() != 1 => multiset_eq(items, &gold),
        Canonical::List(items) => gold.iter().any(|g| scalar_eq(&items[0], g)),
        scalar => gold.iter().any(|g| scalar_eq(scalar, g)),
    }
}
