// SPDX-License-Identifier: Apache-2.0

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use super::{raw_from_strings, DatasetError, DatasetKind, QAExample};
use crate::table::RawTable;

/// Undoes the TSV escapes `\n`, `\p` (pipe) and `\\`.
pub fn unescape_wikitq(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('n') => out.push('\n'),
            Some('p') => out.push('|'),
            Some('\\') => out.push('\\'),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}

fn split_file(root: &Path, split: &str) -> PathBuf {
    let direct = root.join("data").join(format!("{split}.tsv"));
    if direct.exists() {
        return direct;
    }
    let alias = match split {
        "test" => "pristine-unseen-tables",
        "dev" => "random-split-1-dev",
        "train" => "training",
        other => other,
    };
    root.join("data").join(format!("{alias}.tsv"))
}

fn load_csv_table(root: &Path, context: &str) -> Result<RawTable, DatasetError> {
    let path = root.join(context);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(false)
        .from_path(&path)
        .map_err(|e| DatasetError::format(&path, None, e.to_string()))?;
    let mut grid = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| DatasetError::format(&path, Some(i + 1), e.to_string()))?;
        grid.push(rec.iter().map(|f| unescape_wikitq(f).replace('\n', " ")).collect::<Vec<_>>());
    }
    if grid.is_empty() {
        return Err(DatasetError::format(&path, None, "table file is empty"));
    }
    let name = context
        .trim_start_matches("csv/")
        .trim_end_matches(".csv")
        .replace(['/', '-'], "_");
    raw_from_strings(&name, grid, 1, 0).map_err(|e| DatasetError::table(&path, None, e))
}

/// Loads a WikiTQ split. `split` names `data/<split>.tsv`; `test`, `dev` and
/// `train` also resolve to the original file names.
pub fn load_wikitq(root: &Path, split: &str) -> Result<Vec<QAExample>, DatasetError> {
    let path = split_file(root, split);
    let text = super::read_to_string(&path)?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let header: Vec<&str> = match lines.next() {
        Some((_, l)) => l.split('\t').collect(),
        None => return Err(DatasetError::format(&path, None, "question file is empty")),
    };
    let col = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| DatasetError::format(&path, Some(1), format!("missing column `{name}`")))
    };
    let (c_id, c_q, c_ctx, c_gold) = (col("id")?, col("utterance")?, col("context")?, col("targetValue")?);

    let mut tables: HashMap<String, RawTable> = HashMap::new();
    let mut out = Vec::new();
    for (i, line) in lines {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != header.len() {
            return Err(DatasetError::format(
                &path,
                Some(i + 1),
                format!("expected {} fields, found {}", header.len(), fields.len()),
            ));
        }
        let context = fields[c_ctx];
        let table = match tables.get(context) {
            Some(t) => t.clone(),
            None => {
                let t = load_csv_table(root, context)?;
                tables.insert(context.to_string(), t.clone());
                t
            }
        };
        let gold: Vec<String> = fields[c_gold].split('|').map(unescape_wikitq).collect();
        let ex = QAExample {
            id: fields[c_id].to_string(),
            question: unescape_wikitq(fields[c_q]),
            tables: vec![table],
            gold,
            dataset: DatasetKind::Wikitq,
        };
        if !ex.is_valid() {
            return Err(DatasetError::format(&path, Some(i + 1), "empty question or answer"));
        }
        out.push(ex);
    }
    Ok(out)
}
