// SPDX-License-Identifier: Apache-2.0

//! SQL dialect over an in-memory SQLite database.
//!
//! Each table becomes one SQLite table with the same (quoted) name. Column
//! tuples are joined with the separator; non-positional row labels become
//! leading `index_<level>` columns. A column whose non-empty cells are all
//! numeric is stored as REAL, anything else as TEXT, and empty cells as NULL.

use std::collections::HashSet;
use std::time::Instant;

use rusqlite::hooks::{AuthAction, AuthContext, Authorization};
use rusqlite::types::ValueRef;
use rusqlite::{params_from_iter, Connection, ErrorCode};

use super::{ExecStatus, ExecutionLimits, ExecutionResult};
use crate::table::{positional_label, Cell, CellValue, IndexTuple, MultiIndexTable, TableSet};
use crate::value::{format_number, Value};

/// Where an SQL column's values come from.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnSource {
    RowLevel(usize),
    Column(usize),
}

/// One column of the SQL view of a table.
#[derive(Debug, Clone, PartialEq)]
pub struct SqlColumn {
    pub name: String,
    pub sql_type: &'static str,
    pub source: ColumnSource,
}

pub(crate) enum SqlFailure {
    Interrupted,
    Denied(String),
    Query(String),
}

/// Column layout used when `table` is loaded into SQLite.
pub fn sql_columns(table: &MultiIndexTable, separator: &str) -> Vec<SqlColumn> {
    let mut seen = HashSet::new();
    let mut unique = |base: String| {
        let mut name = base.clone();
        let mut n = 1;
        while !seen.insert(name.to_lowercase()) {
            name = format!("{base}_{n}");
            n += 1;
        }
        name
    };
    let mut out = Vec::new();
    if !table.has_positional_rows() {
        for level in 0..table.row_depth() {
            out.push(SqlColumn {
                name: unique(format!("index_{level}")),
                sql_type: "TEXT",
                source: ColumnSource::RowLevel(level),
            });
        }
    }
    for (j, tuple) in table.col_index().iter().enumerate() {
        let numeric = table
            .values()
            .iter()
            .map(|r| &r[j].value)
            .all(|v| !matches!(v, CellValue::Text(_)));
        out.push(SqlColumn {
            name: unique(tuple.labels().join(separator)),
            sql_type: if numeric { "REAL" } else { "TEXT" },
            source: ColumnSource::Column(j),
        });
    }
    out
}

fn quote(ident: &str) -> String {
    format!("\"{}\"", ident.replace('"', "\"\""))
}

fn load(conn: &Connection, table: &MultiIndexTable, separator: &str) -> rusqlite::Result<()> {
    let cols = sql_columns(table, separator);
    if cols.is_empty() {
        return Ok(());
    }
    let defs: Vec<String> = cols
        .iter()
        .map(|c| format!("{} {}", quote(&c.name), c.sql_type))
        .collect();
    conn.execute(
        &format!("CREATE TABLE {} ({})", quote(&table.name), defs.join(", ")),
        [],
    )?;
    let slots = vec!["?"; cols.len()].join(", ");
    let mut insert = conn.prepare(&format!("INSERT INTO {} VALUES ({slots})", quote(&table.name)))?;
    for (i, row) in table.values().iter().enumerate() {
        let params = cols.iter().map(|c| match c.source {
            ColumnSource::RowLevel(level) => {
                rusqlite::types::Value::Text(table.row_index()[i].get(level).unwrap_or("").to_string())
            }
            ColumnSource::Column(j) => match &row[j].value {
                CellValue::Number(n) if c.sql_type == "REAL" => rusqlite::types::Value::Real(*n),
                CellValue::Empty => rusqlite::types::Value::Null,
                _ => rusqlite::types::Value::Text(row[j].text().to_string()),
            },
        });
        insert.execute(params_from_iter(params))?;
    }
    Ok(())
}

fn cell_of(v: ValueRef<'_>) -> Cell {
    match v {
        ValueRef::Null => Cell::empty(),
        ValueRef::Integer(i) => Cell::parse(i.to_string()),
        ValueRef::Real(f) => Cell::parse(format_number(f)),
        ValueRef::Text(t) => Cell::parse(String::from_utf8_lossy(t).into_owned()),
        ValueRef::Blob(b) => Cell::parse(hex::encode(b)),
    }
}

fn scalar_of(cell: Cell) -> Value {
    match cell.value {
        CellValue::Empty => Value::Null,
        CellValue::Number(n) => Value::Number(n),
        CellValue::Text(_) => Value::Text(cell.raw),
    }
}

fn authorize(ctx: AuthContext<'_>) -> Authorization {
    match ctx.action {
        AuthAction::Attach { .. } | AuthAction::Detach { .. } => Authorization::Deny,
        AuthAction::Function { function_name } if function_name.eq_ignore_ascii_case("load_extension") => {
            Authorization::Deny
        }
        _ => Authorization::Allow,
    }
}

fn classify(e: rusqlite::Error) -> SqlFailure {
    match e.sqlite_error_code() {
        Some(ErrorCode::OperationInterrupted) => SqlFailure::Interrupted,
        Some(ErrorCode::AuthorizationForStatementDenied) => {
            SqlFailure::Denied(format!("statement touches storage outside the sandbox: {e}"))
        }
        _ if e.to_string().starts_with("not authorized to use function") => {
            SqlFailure::Denied(format!("extension loading is not permitted: {e}"))
        }
        _ => SqlFailure::Query(e.to_string()),
    }
}

/// Runs one read-only query and converts the result to a [`Value`].
pub(crate) fn query_tables(
    query: &str,
    tables: &TableSet,
    separator: &str,
    deadline: Instant,
) -> Result<Value, SqlFailure> {
    let conn = Connection::open_in_memory().map_err(|e| SqlFailure::Query(e.to_string()))?;
    for t in tables.iter() {
        load(&conn, t, separator).map_err(|e| SqlFailure::Query(format!("loading {}: {e}", t.name)))?;
    }
    conn.authorizer(Some(authorize));
    conn.progress_handler(1000, Some(move || Instant::now() >= deadline));

    let mut stmt = conn.prepare(query.trim().trim_end_matches(';')).map_err(classify)?;
    if !stmt.readonly() {
        return Err(SqlFailure::Query("only read-only queries are allowed".into()));
    }
    let names: Vec<String> = stmt.column_names().into_iter().map(String::from).collect();
    let width = names.len();
    let mut rows = stmt.query([]).map_err(classify)?;
    let mut grid: Vec<Vec<Cell>> = Vec::new();
    while let Some(row) = rows.next().map_err(classify)? {
        let cells = (0..width)
            .map(|j| row.get_ref(j).map(cell_of))
            .collect::<rusqlite::Result<Vec<_>>>()
            .map_err(classify)?;
        grid.push(cells);
    }
    if grid.is_empty() || width == 0 {
        return Ok(Value::Null);
    }
    if grid.len() == 1 && width == 1 {
        return Ok(scalar_of(grid.remove(0).remove(0)));
    }
    let row_index = (0..grid.len())
        .map(|i| IndexTuple::single(positional_label("row", i)))
        .collect();
    let col_index = names.into_iter().map(IndexTuple::single).collect();
    MultiIndexTable::new("result", row_index, col_index, grid)
        .map(Value::Table)
        .map_err(|e| SqlFailure::Query(e.to_string()))
}

/// Runs an SQL-dialect program.
pub fn execute_sql(
    query: &str,
    tables: &TableSet,
    limits: &ExecutionLimits,
    separator: &str,
) -> ExecutionResult {
    if query.trim().is_empty() {
        return ExecutionResult::failure(ExecStatus::RuntimeError, "empty query");
    }
    let deadline = Instant::now() + limits.wall_timeout;
    match query_tables(query, tables, separator, deadline) {
        Ok(v) => ExecutionResult::ok(v),
        Err(SqlFailure::Interrupted) => {
            ExecutionResult::failure(ExecStatus::Timeout, "wall-clock timeout exceeded")
        }
        Err(SqlFailure::Denied(msg)) => ExecutionResult::failure(ExecStatus::SandboxViolation, msg),
        Err(SqlFailure::Query(msg)) => ExecutionResult::failure(ExecStatus::RuntimeError, msg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_table, DEFAULT_SEPARATOR};
    use crate::table::RawTable;
    use std::time::Duration;

    fn singers() -> TableSet {
        let raw = RawTable::from_strings(
            "singer",
            &[
                vec!["name", "country", "age"],
                vec!["Joe", "France", "52"],
                vec!["Ana", "Spain", "41"],
                vec!["Tim", "France", ""],
            ],
            1,
            0,
        )
        .unwrap();
        TableSet::new(vec![parse_table(&raw).unwrap()]).unwrap()
    }

    fn run(q: &str) -> ExecutionResult {
        execute_sql(q, &singers(), &ExecutionLimits::default(), DEFAULT_SEPARATOR)
    }

    #[test]
    fn scalar_and_table_results() {
        assert_eq!(run("SELECT COUNT(*) FROM singer").value, Some(Value::Number(3.0)));
        assert_eq!(run("SELECT AVG(age) FROM singer;").value, Some(Value::Number(46.5)));
        let r = run("SELECT name FROM singer WHERE country = 'France' ORDER BY name");
        match r.value {
            Some(Value::Table(t)) => {
                assert_eq!(t.n_rows(), 2);
                assert_eq!(t.values()[0][0].raw, "Joe");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn failure_classes() {
        assert_eq!(run("SELECT name FROM singer WHERE age > 100").status, ExecStatus::EmptyResult);
        assert_eq!(run("SELECT nope FROM singer").status, ExecStatus::RuntimeError);
        assert_eq!(run("DELETE FROM singer").status, ExecStatus::RuntimeError);
        assert_eq!(
            run("ATTACH DATABASE '/tmp/x.db' AS x").status,
            ExecStatus::SandboxViolation
        );
    }

    #[test]
    fn runaway_query_times_out() {
        let limits = ExecutionLimits::new(Duration::from_millis(200), 1 << 20);
        let q = "WITH RECURSIVE c(x) AS (SELECT 1 UNION ALL SELECT x + 1 FROM c) SELECT MAX(x) FROM c";
        let start = Instant::now();
        let r = execute_sql(q, &singers(), &limits, DEFAULT_SEPARATOR);
        assert_eq!(r.status, ExecStatus::Timeout);
        assert!(start.elapsed() < Duration::from_secs(2));
    }

    #[test]
    fn column_layout() {
        let cols = sql_columns(&singers().tables()[0], DEFAULT_SEPARATOR);
        let names: Vec<_> = cols.iter().map(|c| (c.name.as_str(), c.sql_type)).collect();
        assert_eq!(names, vec![("name", "TEXT"), ("country", "TEXT"), ("age", "REAL")]);
    }
}
