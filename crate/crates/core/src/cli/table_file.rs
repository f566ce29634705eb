// SPDX-License-Identifier: Apache-2.0

//! Single-table input files.
//!
//! * `.json`: `{"name"?, "rows" | "texts", "top_header_depth" | "top_header_rows_num",
//!   "left_header_width" | "left_header_columns_num", "merged_regions"?}`
//! * `.csv` / `.tsv`: a plain grid; header band sizes come from flags.

use std::path::Path;

use serde::Deserialize;

use super::CliError;
use crate::datasets::{forward_fill, MergedRegion};
use crate::table::{Cell, RawTable};

#[derive(Deserialize)]
struct JsonTable {
    #[serde(default)]
    name: Option<String>,
    #[serde(alias = "texts")]
    rows: Vec<Vec<serde_json::Value>>,
    #[serde(alias = "top_header_rows_num")]
    top_header_depth: usize,
    #[serde(alias = "left_header_columns_num", default)]
    left_header_width: usize,
    #[serde(default)]
    merged_regions: Vec<MergedRegion>,
}

fn text(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::String(s) => s.clone(),
        serde_json::Value::Null => String::new(),
        other => other.to_string(),
    }
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "table".into())
}

/// Loads one table file. A missing or malformed file is a format error.
pub fn load_table_file(path: &Path, header_rows: usize, left_cols: usize) -> Result<RawTable, CliError> {
    let fmt = |m: String| CliError::Format(format!("{}: {m}", path.display()));
    let data = std::fs::read_to_string(path).map_err(|e| fmt(e.to_string()))?;
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_lowercase();
    let (name, mut grid, depth, width, regions) = match ext.as_str() {
        "json" => {
            let t: JsonTable = serde_json::from_str(&data).map_err(|e| fmt(e.to_string()))?;
            let grid: Vec<Vec<String>> = t.rows.iter().map(|r| r.iter().map(text).collect()).collect();
            (
                t.name.unwrap_or_else(|| stem(path)),
                grid,
                t.top_header_depth,
                t.left_header_width,
                t.merged_regions,
            )
        }
        "csv" | "tsv" => {
            let delim = if ext == "tsv" { b'\t' } else { b',' };
            let mut reader = csv::ReaderBuilder::new()
                .has_headers(false)
                .delimiter(delim)
                .from_reader(data.as_bytes());
            let mut grid = Vec::new();
            for rec in reader.records() {
                let rec = rec.map_err(|e| fmt(e.to_string()))?;
                grid.push(rec.iter().map(str::to_string).collect::<Vec<_>>());
            }
            (stem(path), grid, header_rows, left_cols, Vec::new())
        }
        other => return Err(fmt(format!("unsupported table file extension `{other}`"))),
    };
    forward_fill(&mut grid, &regions);
    let cells = grid
        .into_iter()
        .map(|r| r.into_iter().map(Cell::parse).collect())
        .collect();
    RawTable::new(name, cells, depth, width).map_err(|e| fmt(e.to_string()))
}
