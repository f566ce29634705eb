// SPDX-License-Identifier: Apache-2.0

use std::collections::HashMap;
use std::path::Path;

use serde::Deserialize;

use super::{json_text, raw_from_strings, DatasetError, DatasetKind, QAExample};
use crate::table::RawTable;

#[derive(Deserialize)]
struct Question {
    id: serde_json::Value,
    table_id: String,
    question: String,
    answers: Vec<serde_json::Value>,
}

#[derive(Deserialize)]
struct Table {
    id: String,
    column_header: Vec<Vec<String>>,
    row_header: Vec<Vec<String>>,
    data: Vec<Vec<serde_json::Value>>,
}

// Header paths become header bands; shorter paths are padded with blanks,
// which end the path during tree building.
fn to_raw(t: &Table, file: &Path, line: usize) -> Result<RawTable, DatasetError> {
    let err = |m: String| DatasetError::format(file, Some(line), m);
    if t.data.len() != t.row_header.len() {
        return Err(err(format!(
            "table {}: {} data rows but {} row headers",
            t.id,
            t.data.len(),
            t.row_header.len()
        )));
    }
    let depth = t.column_header.iter().map(Vec::len).max().unwrap_or(0);
    let width = t.row_header.iter().map(Vec::len).max().unwrap_or(0);
    let mut grid = Vec::with_capacity(depth + t.data.len());
    for level in 0..depth {
        let mut row = vec![String::new(); width];
        row.extend(t.column_header.iter().map(|p| p.get(level).cloned().unwrap_or_default()));
        grid.push(row);
    }
    for (path, data) in t.row_header.iter().zip(&t.data) {
        if data.len() != t.column_header.len() {
            return Err(err(format!(
                "table {}: row {:?} has {} cells, expected {}",
                t.id,
                path,
                data.len(),
                t.column_header.len()
            )));
        }
        let mut row: Vec<String> = (0..width).map(|l| path.get(l).cloned().unwrap_or_default()).collect();
        row.extend(data.iter().map(json_text));
        grid.push(row);
    }
    raw_from_strings(&t.id, grid, depth, width).map_err(|e| DatasetError::table(file, Some(line), e))
}

/// Loads `aitqa_questions.jsonl` against `aitqa_tables.jsonl`. The dataset is one test set.
pub fn load_aitqa(root: &Path) -> Result<Vec<QAExample>, DatasetError> {
    let tables_path = root.join("aitqa_tables.jsonl");
    let table_rows: Vec<Table> = super::read_jsonl(&tables_path)?;
    let mut tables = HashMap::new();
    for (i, t) in table_rows.iter().enumerate() {
        tables.insert(t.id.clone(), to_raw(t, &tables_path, i + 1)?);
    }
    let q_path = root.join("aitqa_questions.jsonl");
    let questions: Vec<Question> = super::read_jsonl(&q_path)?;
    let mut out = Vec::with_capacity(questions.len());
    for (i, q) in questions.into_iter().enumerate() {
        let table = tables.get(&q.table_id).cloned().ok_or_else(|| {
            DatasetError::format(&q_path, Some(i + 1), format!("unknown table `{}`", q.table_id))
        })?;
        let ex = QAExample {
            id: json_text(&q.id),
            question: q.question,
            tables: vec![table],
            gold: q.answers.iter().map(json_text).collect(),
            dataset: DatasetKind::Aitqa,
        };
        if !ex.is_valid() {
            return Err(DatasetError::format(&q_path, Some(i + 1), "empty question or answer"));
        }
        out.push(ex);
    }
    Ok(out)
}
