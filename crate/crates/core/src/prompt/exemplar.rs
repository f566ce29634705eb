// SPDX-License-Identifier: Apache-2.0

//! Solved examples shown before the question.
//!
//! Asset format, one record per exemplar:
//!
//! ```text
//! === exemplar
//! question: <one line>
//! uses_api: none | operation | qa | operation, qa
//! --- table
//! <serialized table snippet, any number of lines>
//! --- program
//! <program, any number of lines>
//! ```
//!
//! Lines starting with `#` before the first record are comments.

use serde::{Deserialize, Serialize};

use super::PromptError;
use crate::apis::ApiFamily;
use crate::datasets::DatasetKind;
use crate::executor::Dialect;

const OPERATION_NAMES: &[&str] = &["compare_larger", "compare_smaller"];
const QA_NAMES: &[&str] = &["qa", "qa_mask"];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiUsage {
    pub operation: bool,
    pub qa: bool,
}

/// Balance category: QA takes precedence over operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Plain,
    Operation,
    Qa,
}

impl ApiUsage {
    pub fn category(self) -> Category {
        if self.qa {
            Category::Qa
        } else if self.operation {
            Category::Operation
        } else {
            Category::Plain
        }
    }

    fn parse(s: &str) -> Result<Self, String> {
        let mut u = ApiUsage::default();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "none" => {}
                "operation" => u.operation = true,
                "qa" => u.qa = true,
                other => return Err(format!("unknown api flag `{other}`")),
            }
        }
        Ok(u)
    }

    /// Usage implied by the calls appearing in `program`.
    pub fn detect(program: &str) -> Self {
        ApiUsage {
            operation: OPERATION_NAMES.iter().any(|n| calls(program, n)),
            qa: QA_NAMES.iter().any(|n| calls(program, n)),
        }
    }

    pub fn uses(self, family: ApiFamily) -> bool {
        match family {
            ApiFamily::Operation => self.operation,
            ApiFamily::Qa => self.qa,
            ApiFamily::Custom => false,
        }
    }
}

fn calls(program: &str, name: &str) -> bool {
    program.match_indices(name).any(|(i, _)| {
        let before = program[..i].chars().next_back();
        let after = program[i + name.len()..].trim_start().chars().next();
        !before.is_some_and(|c| c.is_alphanumeric() || c == '_') && after == Some('(')
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exemplar {
    pub question: String,
    pub table_snippet: String,
    pub program: String,
    pub uses_api: ApiUsage,
}

impl Exemplar {
    pub fn is_consistent(&self) -> bool {
        !self.program.trim().is_empty() && ApiUsage::detect(&self.program) == self.uses_api
    }
}

/// A named, ordered collection of exemplars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExemplarSet {
    pub name: String,
    pub exemplars: Vec<Exemplar>,
}

const HITAB: &str = include_str!("../../assets/exemplars/hitab.txt");
const AITQA: &str = include_str!("../../assets/exemplars/aitqa.txt");
const WIKITQ: &str = include_str!("../../assets/exemplars/wikitq.txt");
const SPIDER: &str = include_str!("../../assets/exemplars/spider.txt");
const SQL: &str = include_str!("../../assets/exemplars/sql.txt");

impl ExemplarSet {
    pub fn builtin(dataset: DatasetKind, dialect: Dialect) -> Self {
        let (name, text) = match (dialect, dataset) {
            (Dialect::Sql, _) => ("sql", SQL),
            (Dialect::Host, DatasetKind::Hitab) => ("hitab", HITAB),
            (Dialect::Host, DatasetKind::Aitqa) => ("aitqa", AITQA),
            (Dialect::Host, DatasetKind::Wikitq) => ("wikitq", WIKITQ),
            (Dialect::Host, DatasetKind::Spider) => ("spider", SPIDER),
        };
        ExemplarSet {
            name: name.to_string(),
            exemplars: parse_exemplars(text).expect("built-in exemplar assets are well-formed"),
        }
    }

    pub fn len(&self) -> usize {
        self.exemplars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exemplars.is_empty()
    }

    pub fn without_family(mut self, family: ApiFamily) -> Self {
        self.exemplars.retain(|e| !e.uses_api.uses(family));
        self
    }

    /// Per-category quotas for `n` shots: one fifth QA (rounded), the rest
    /// split between plain and operation with plain taking the odd one.
    pub fn quotas(n: usize) -> (usize, usize, usize) {
        let qa = (n + 2) / 5;
        let plain = (n - qa).div_ceil(2);
        (plain, n - qa - plain, qa)
    }

    /// Picks `n` exemplars by category quota in file order, filling any
    /// shortfall from the remaining exemplars. Output keeps file order.
    pub fn select(&self, n: usize) -> Result<Vec<&Exemplar>, PromptError> {
        if n > self.len() {
            return Err(PromptError::ExemplarShortage {
                set: self.name.clone(),
                needed: n,
                available: self.len(),
            });
        }
        let (plain, op, qa) = Self::quotas(n);
        let mut taken = vec![false; self.len()];
        for (cat, quota) in [(Category::Plain, plain), (Category::Operation, op), (Category::Qa, qa)] {
            let mut left = quota;
            for (i, e) in self.exemplars.iter().enumerate() {
                if left == 0 {
                    break;
                }
                if e.uses_api.category() == cat {
                    taken[i] = true;
                    left -= 1;
                }
            }
        }
        let mut short = n - taken.iter().filter(|t| **t).count();
        for t in taken.iter_mut() {
            if short == 0 {
                break;
            }
            if !*t {
                *t = true;
                short -= 1;
            }
        }
        Ok(self
            .exemplars
            .iter()
            .zip(taken)
            .filter_map(|(e, t)| t.then_some(e))
            .collect())
    }
}

/// Parses exemplar records; every record must be internally consistent.
pub fn parse_exemplars(text: &str) -> Result<Vec<Exemplar>, PromptError> {
    let mut out = Vec::new();
    for (i, chunk) in text.split("=== exemplar").skip(1).enumerate() {
        let err = |m: &str| PromptError::Asset {
            record: i + 1,
            message: m.to_string(),
        };
        let (head, rest) = chunk.split_once("--- table\n").ok_or_else(|| err("missing `--- table`"))?;
        let (table, program) = rest.split_once("--- program\n").ok_or_else(|| err("missing `--- program`"))?;
        let mut question = None;
        let mut uses = None;
        for line in head.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if let Some(q) = line.strip_prefix("question:") {
                question = Some(q.trim().to_string());
            } else if let Some(u) = line.strip_prefix("uses_api:") {
                uses = Some(ApiUsage::parse(u).map_err(|m| err(&m))?);
            } else {
                return Err(err(&format!("unexpected line `{line}`")));
            }
        }
        let ex = Exemplar {
            question: question.filter(|q| !q.is_empty()).ok_or_else(|| err("missing question"))?,
            table_snippet: table.trim_end().to_string(),
            program: program.trim().to_string(),
            uses_api: uses.ok_or_else(|| err("missing uses_api"))?,
        };
        if !ex.is_consistent() {
            return Err(err("uses_api does not match the calls in the program"));
        }
        out.push(ex);
    }
    Ok(out)
}
