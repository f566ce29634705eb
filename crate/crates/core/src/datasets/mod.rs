// SPDX-License-Identifier: Apache-2.0

//! Loaders for the four benchmark layouts.
//!
//! | dataset | files under the root |
//! |---|---|
//! | wikitq | `data/<split>.tsv` (id, utterance, context, targetValue) and the CSV tables it references |
//! | hitab | `<split>_samples.jsonl` and `tables/hmt/<table_id>.json` |
//! | aitqa | `aitqa_questions.jsonl` and `aitqa_tables.jsonl` |
//! | spider | `<split>.json` and `database/<db_id>/<db_id>.sqlite` |
//!
//! Every loader returns examples in file order and validates each table on load.

mod aitqa;
mod hitab;
mod spider;
mod wikitq;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::table::{Cell, RawTable, TableError};

pub use aitqa::load_aitqa;
pub use hitab::load_hitab;
pub use spider::{load_spider, spider_gold};
pub use wikitq::{load_wikitq, unescape_wikitq};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("{}{}: {message}", file.display(), line.map(|l| format!(":{l}")).unwrap_or_default())]
    Format {
        file: PathBuf,
        line: Option<usize>,
        message: String,
    },
    #[error("database `{db_id}` not found at {}", path.display())]
    MissingDatabase { db_id: String, path: PathBuf },
}

impl DatasetError {
    pub(crate) fn format(file: &Path, line: Option<usize>, message: impl Into<String>) -> Self {
        DatasetError::Format {
            file: file.to_path_buf(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn table(file: &Path, line: Option<usize>, e: TableError) -> Self {
        DatasetError::format(file, line, e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Wikitq,
    Hitab,
    Aitqa,
    Spider,
}

impl DatasetKind {
    pub const ALL: [DatasetKind; 4] = [
        DatasetKind::Wikitq,
        DatasetKind::Hitab,
        DatasetKind::Aitqa,
        DatasetKind::Spider,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DatasetKind::Wikitq => "wikitq",
            DatasetKind::Hitab => "hitab",
            DatasetKind::Aitqa => "aitqa",
            DatasetKind::Spider => "spider",
        }
    }

    /// Shots used when none are configured: eight for AIT-QA, five elsewhere.
    pub fn default_shots(self) -> usize {
        match self {
            DatasetKind::Aitqa => 8,
            _ => 5,
        }
    }

    /// Split loaded when none is given.
    pub fn default_split(self) -> &'static str {
        match self {
            DatasetKind::Spider => "dev",
            _ => "test",
        }
    }
}

impl FromStr for DatasetKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DatasetKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown dataset `{s}` (expected wikitq, hitab, aitqa or spider)"))
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One question with its tables and acceptable answers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QAExample {
    pub id: String,
    pub question: String,
    pub tables: Vec<RawTable>,
    pub gold: Vec<String>,
    pub dataset: DatasetKind,
}

impl QAExample {
    pub fn is_valid(&self) -> bool {
        !self.question.trim().is_empty() && !self.tables.is_empty() && !self.gold.is_empty()
    }
}

/// Loads `split` of `kind` from `root`.
pub fn load(kind: DatasetKind, root: &Path, split: &str) -> Result<Vec<QAExample>, DatasetError> {
    match kind {
        DatasetKind::Wikitq => load_wikitq(root, split),
        DatasetKind::Hitab => load_hitab(root, split),
        DatasetKind::Aitqa => load_aitqa(root),
        DatasetKind::Spider => load_spider(root, split),
    }
}

/// Copies each merged region's anchor text into every blank cell of the region.
pub fn forward_fill(grid: &mut [Vec<String>], regions: &[MergedRegion]) {
    for r in regions {
        let Some(anchor) = grid.get(r.first_row).and_then(|row| row.get(r.first_column)).cloned() else {
            continue;
        };
        for row in grid.iter_mut().take(r.last_row + 1).skip(r.first_row) {
            for cell in row.iter_mut().take(r.last_column + 1).skip(r.first_column) {
                if cell.trim().is_empty() {
                    cell.clone_from(&anchor);
                }
            }
        }
    }
}

/// An inclusive rectangle of merged cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergedRegion {
    pub first_row: usize,
    pub last_row: usize,
    pub first_column: usize,
    pub last_column: usize,
}

pub(crate) fn raw_from_strings(
    name: &str,
    grid: Vec<Vec<String>>,
    depth: usize,
    width: usize,
) -> Result<RawTable, TableError> {
    let cells = grid
        .into_iter()
        .map(|r| r.into_iter().map(Cell::parse).collect())
        .collect();
    RawTable::new(name, cells, depth, width)
}

pub(crate) fn read_to_string(path: &Path) -> Result<String, DatasetError> {
    std::fs::read_to_string(path).map_err(|e| DatasetError::format(path, None, e.to_string()))
}

/// Renders a JSON scalar answer as text.
pub(crate) fn json_text(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::String(s) => s.clone(),
        serde_json::Value::Null => String::new(),
        other => other.to_string(),
    }
}

pub(crate) fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, DatasetError> {
    let text = read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| DatasetError::format(path, Some(i + 1), e.to_string())))
        .collect()
}
