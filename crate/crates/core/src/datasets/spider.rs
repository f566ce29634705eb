// SPDX-License-Identifier: Apache-2.0

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rusqlite::types::ValueRef;
use rusqlite::{Connection, OpenFlags};
use serde::Deserialize;

use super::{raw_from_strings, DatasetError, DatasetKind, QAExample};
use crate::table::RawTable;
use crate::value::format_number;

#[derive(Deserialize)]
struct Entry {
    db_id: String,
    question: String,
    query: String,
}

fn text_of(v: ValueRef<'_>) -> String {
    match v {
        ValueRef::Null => String::new(),
        ValueRef::Integer(i) => i.to_string(),
        ValueRef::Real(f) => format_number(f),
        ValueRef::Text(t) => String::from_utf8_lossy(t).into_owned(),
        ValueRef::Blob(b) => hex::encode(b),
    }
}

fn db_path(root: &Path, db_id: &str) -> PathBuf {
    root.join("database").join(db_id).join(format!("{db_id}.sqlite"))
}

fn open(root: &Path, db_id: &str) -> Result<Connection, DatasetError> {
    let path = db_path(root, db_id);
    if !path.is_file() {
        return Err(DatasetError::MissingDatabase {
            db_id: db_id.to_string(),
            path,
        });
    }
    Connection::open_with_flags(&path, OpenFlags::SQLITE_OPEN_READ_ONLY)
        .map_err(|e| DatasetError::format(&path, None, e.to_string()))
}

fn load_tables(conn: &Connection, path: &Path) -> Result<Vec<RawTable>, DatasetError> {
    let sql_err = |e: rusqlite::Error| DatasetError::format(path, None, e.to_string());
    let names: Vec<String> = conn
        .prepare("SELECT name FROM sqlite_master WHERE type = 'table' AND name NOT LIKE 'sqlite_%' ORDER BY rowid")
        .and_then(|mut s| s.query_map([], |r| r.get(0))?.collect())
        .map_err(sql_err)?;
    let mut out = Vec::with_capacity(names.len());
    for name in names {
        let mut stmt = conn
            .prepare(&format!("SELECT * FROM \"{}\"", name.replace('"', "\"\"")))
            .map_err(sql_err)?;
        let header: Vec<String> = stmt.column_names().into_iter().map(String::from).collect();
        let width = header.len();
        let mut grid = vec![header];
        let mut rows = stmt.query([]).map_err(sql_err)?;
        while let Some(row) = rows.next().map_err(sql_err)? {
            grid.push(
                (0..width)
                    .map(|j| row.get_ref(j).map(text_of))
                    .collect::<rusqlite::Result<_>>()
                    .map_err(sql_err)?,
            );
        }
        out.push(raw_from_strings(&name, grid, 1, 0).map_err(|e| DatasetError::table(path, None, e))?);
    }
    Ok(out)
}

/// Executes `query` against the database and flattens the result row-major.
/// A query with no rows yields a single empty string.
pub fn spider_gold(conn: &Connection, query: &str) -> rusqlite::Result<Vec<String>> {
    let mut stmt = conn.prepare(query)?;
    let width = stmt.column_count();
    let mut rows = stmt.query([])?;
    let mut gold = Vec::new();
    while let Some(row) = rows.next()? {
        for j in 0..width {
            gold.push(text_of(row.get_ref(j)?));
        }
    }
    if gold.is_empty() {
        gold.push(String::new());
    }
    Ok(gold)
}

/// Loads `<split>.json` (`dev` also resolves `dev.json`, `train` resolves
/// `train_spider.json`) with every table of each example's database.
pub fn load_spider(root: &Path, split: &str) -> Result<Vec<QAExample>, DatasetError> {
    let mut path = root.join(format!("{split}.json"));
    if split == "train" && !path.exists() {
        path = root.join("train_spider.json");
    }
    let text = super::read_to_string(&path)?;
    let entries: Vec<Entry> =
        serde_json::from_str(&text).map_err(|e| DatasetError::format(&path, None, e.to_string()))?;

    let mut dbs: HashMap<String, (Connection, Vec<RawTable>)> = HashMap::new();
    let mut gold_cache: HashMap<(String, String), Vec<String>> = HashMap::new();
    let mut out = Vec::with_capacity(entries.len());
    for (i, e) in entries.into_iter().enumerate() {
        if !dbs.contains_key(&e.db_id) {
            let conn = open(root, &e.db_id)?;
            let tables = load_tables(&conn, &db_path(root, &e.db_id))?;
            dbs.insert(e.db_id.clone(), (conn, tables));
        }
        let (conn, tables) = &dbs[&e.db_id];
        let key = (e.db_id.clone(), e.query.clone());
        let gold = match gold_cache.get(&key) {
            Some(g) => g.clone(),
            None => {
                let g = spider_gold(conn, &e.query).map_err(|err| {
                    DatasetError::format(&path, None, format!("entry {i}: reference query failed: {err}"))
                })?;
                gold_cache.insert(key, g.clone());
                g
            }
        };
        let ex = QAExample {
            id: format!("{}_{split}_{i}", e.db_id),
            question: e.question,
            tables: tables.clone(),
            gold,
            dataset: DatasetKind::Spider,
        };
        if !ex.is_valid() {
            return Err(DatasetError::format(&path, None, format!("entry {i}: empty question or no tables")));
        }
        out.push(ex);
    }
    Ok(out)
}
