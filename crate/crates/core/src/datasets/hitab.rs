// SPDX-License-Identifier: Apache-2.0

use std::collections::HashMap;
use std::path::Path;

use serde::Deserialize;

use super::{forward_fill, json_text, raw_from_strings, DatasetError, DatasetKind, MergedRegion, QAExample};
use crate::table::RawTable;

#[derive(Deserialize)]
struct Sample {
    id: serde_json::Value,
    table_id: String,
    question: String,
    answer: Vec<serde_json::Value>,
}

#[derive(Deserialize)]
struct HmtTable {
    texts: Vec<Vec<serde_json::Value>>,
    top_header_rows_num: usize,
    left_header_columns_num: usize,
    #[serde(default)]
    merged_regions: Vec<MergedRegion>,
}

fn load_table(root: &Path, table_id: &str) -> Result<RawTable, DatasetError> {
    let path = root.join("tables").join("hmt").join(format!("{table_id}.json"));
    let text = super::read_to_string(&path)?;
    let hmt: HmtTable =
        serde_json::from_str(&text).map_err(|e| DatasetError::format(&path, None, e.to_string()))?;
    let mut grid: Vec<Vec<String>> = hmt
        .texts
        .iter()
        .map(|r| r.iter().map(json_text).collect())
        .collect();
    let (depth, width) = (hmt.top_header_rows_num, hmt.left_header_columns_num);
    // Only header bands are filled; merged body cells keep their blanks.
    let header_regions: Vec<MergedRegion> = hmt
        .merged_regions
        .iter()
        .copied()
        .filter(|r| r.last_row < depth || r.last_column < width)
        .collect();
    forward_fill(&mut grid, &header_regions);
    raw_from_strings(table_id, grid, depth, width).map_err(|e| DatasetError::table(&path, None, e))
}

/// Loads `<split>_samples.jsonl` with tables from `tables/hmt/`.
pub fn load_hitab(root: &Path, split: &str) -> Result<Vec<QAExample>, DatasetError> {
    let path = root.join(format!("{split}_samples.jsonl"));
    let samples: Vec<Sample> = super::read_jsonl(&path)?;
    let mut tables: HashMap<String, RawTable> = HashMap::new();
    let mut out = Vec::with_capacity(samples.len());
    for (i, s) in samples.into_iter().enumerate() {
        let table = match tables.get(&s.table_id) {
            Some(t) => t.clone(),
            None => {
                let t = load_table(root, &s.table_id)?;
                tables.insert(s.table_id.clone(), t.clone());
                t
            }
        };
        let ex = QAExample {
            id: json_text(&s.id),
            question: s.question,
            tables: vec![table],
            gold: s.answer.iter().map(json_text).collect(),
            dataset: DatasetKind::Hitab,
        };
        if !ex.is_valid() {
            return Err(DatasetError::format(&path, Some(i + 1), "empty question or answer"));
        }
        out.push(ex);
    }
    Ok(out)
}
