// SPDX-License-Identifier: Apache-2.0

//! Host dialect: Rhai scripts over table frames.
//!
//! Bindings visible to a program:
//!
//! * every table under [`binding_name`] of its name, plus `df` when there is
//!   exactly one table, and `table(name)` for lookup by exact name;
//! * `ALL`, the wildcard selector;
//! * frame methods (`loc`, `item`, `values`, `sum`, `filter`, `index_by`, ...);
//! * `sql(query)`, which runs a query over the same tables and returns a frame;
//! * every registered assistant API.
//!
//! The answer is the value of `ans` when the program assigns it, otherwise the
//! value of the final expression.

use std::any::TypeId;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

use rhai::module_resolvers::DummyModuleResolver;
use rhai::{Array, Dynamic, Engine, EvalAltResult, ImmutableString, Position, Scope};

use super::sql::{query_tables, SqlFailure};
use super::{label_of, ExecStatus, ExecutionLimits, ExecutionResult};
use crate::apis::ApiRegistry;
use crate::table::{select, AxisSpec, CellValue, MultiIndexTable, TableSet};
use crate::value::Value;

/// Function names that would reach outside the sandbox, with their capability class.
///
/// Calling any of these fails with `sandbox_violation`. Module imports and
/// dynamic `eval` are rejected the same way.
pub const FORBIDDEN_CAPABILITIES: &[(&str, &str)] = &[
    ("open", "filesystem"),
    ("read_file", "filesystem"),
    ("write_file", "filesystem"),
    ("remove_file", "filesystem"),
    ("list_dir", "filesystem"),
    ("http_get", "network"),
    ("http_post", "network"),
    ("fetch", "network"),
    ("urlopen", "network"),
    ("socket", "network"),
    ("connect", "network"),
    ("system", "process"),
    ("exec", "process"),
    ("spawn", "process"),
    ("subprocess", "process"),
    ("exit", "process"),
    ("getenv", "environment"),
    ("set_env", "environment"),
    ("__import__", "import"),
    ("require", "import"),
];

const MAX_DENIED_ARITY: usize = 3;

#[derive(Debug, Clone)]
struct SandboxViolation(String);

#[derive(Debug, Clone)]
struct Timeout;

/// A read-only table handle inside a script.
#[derive(Debug, Clone)]
pub(crate) struct Frame(Arc<MultiIndexTable>);

type RhaiResult<T> = Result<T, Box<EvalAltResult>>;

fn runtime(msg: impl Into<String>) -> Box<EvalAltResult> {
    Box::new(EvalAltResult::ErrorRuntime(
        Dynamic::from(msg.into()),
        Position::NONE,
    ))
}

fn violation(msg: impl Into<String>) -> Box<EvalAltResult> {
    Box::new(EvalAltResult::ErrorRuntime(
        Dynamic::from(SandboxViolation(msg.into())),
        Position::NONE,
    ))
}

/// Identifier under which a table is bound: non-alphanumerics become `_`
/// and a leading digit gets a `t_` prefix.
pub fn binding_name(table_name: &str) -> String {
    let mut s: String = table_name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect();
    if s.is_empty() || s.starts_with(|c: char| c.is_ascii_digit()) {
        s.insert_str(0, "t_");
    }
    s
}

pub(crate) fn to_value(d: &Dynamic) -> RhaiResult<Value> {
    if d.is_unit() {
        return Ok(Value::Null);
    }
    if let Some(b) = d.clone().try_cast::<bool>() {
        return Ok(Value::Bool(b));
    }
    if let Some(i) = d.clone().try_cast::<i64>() {
        return Ok(Value::Number(i as f64));
    }
    if let Some(f) = d.clone().try_cast::<f64>() {
        return Ok(Value::Number(f));
    }
    if let Some(c) = d.clone().try_cast::<char>() {
        return Ok(Value::Text(c.to_string()));
    }
    if let Some(s) = d.clone().try_cast::<ImmutableString>() {
        return Ok(Value::Text(s.to_string()));
    }
    if let Some(a) = d.clone().try_cast::<Array>() {
        return a.iter().map(to_value).collect::<RhaiResult<_>>().map(Value::List);
    }
    if let Some(f) = d.clone().try_cast::<Frame>() {
        return Ok(Value::Table((*f.0).clone()));
    }
    Err(runtime(format!("unsupported value of type {}", d.type_name())))
}

pub(crate) fn from_value(v: Value) -> Dynamic {
    match v {
        Value::Null => Dynamic::UNIT,
        Value::Bool(b) => Dynamic::from(b),
        Value::Number(n) => Dynamic::from(n),
        Value::Text(s) => Dynamic::from(s),
        Value::List(items) => Dynamic::from_array(items.into_iter().map(from_value).collect()),
        Value::Table(t) => Dynamic::from(Frame(Arc::new(t))),
    }
}

fn cell_dynamic(v: &CellValue) -> Dynamic {
    match v {
        CellValue::Number(n) => Dynamic::from(*n),
        CellValue::Text(s) => Dynamic::from(s.clone()),
        CellValue::Empty => Dynamic::UNIT,
    }
}

fn label(d: &Dynamic) -> RhaiResult<String> {
    match to_value(d)? {
        v @ (Value::Text(_) | Value::Number(_)) => Ok(label_of(&v)),
        other => Err(runtime(format!("expected a label, got {}", other.type_name()))),
    }
}

fn axis_spec(d: &Dynamic) -> RhaiResult<AxisSpec> {
    if d.is_unit() {
        return Ok(AxisSpec::All);
    }
    if let Some(items) = d.clone().try_cast::<Array>() {
        if items.is_empty() {
            return Ok(AxisSpec::AnyOf(Vec::new()));
        }
        if items.iter().all(|x| x.is_array()) {
            let prefixes = items
                .iter()
                .map(|x| {
                    x.clone()
                        .cast::<Array>()
                        .iter()
                        .map(label)
                        .collect::<RhaiResult<Vec<_>>>()
                })
                .collect::<RhaiResult<Vec<_>>>()?;
            return Ok(AxisSpec::AnyOf(prefixes));
        }
        return items
            .iter()
            .map(label)
            .collect::<RhaiResult<Vec<_>>>()
            .map(AxisSpec::Prefix);
    }
    Ok(AxisSpec::Prefix(vec![label(d)?]))
}

fn tuple_array(t: &crate::table::IndexTuple) -> Dynamic {
    Dynamic::from_array(t.labels().iter().map(|l| Dynamic::from(l.clone())).collect())
}

impl Frame {
    fn table(&self) -> &MultiIndexTable {
        &self.0
    }

    fn derive(&self, t: MultiIndexTable) -> Frame {
        Frame(Arc::new(t))
    }

    fn loc(&mut self, rows: Dynamic, cols: Dynamic) -> RhaiResult<Frame> {
        let t = select(self.table(), &axis_spec(&rows)?, &axis_spec(&cols)?)
            .map_err(|e| runtime(e.to_string()))?;
        Ok(self.derive(t))
    }

    fn numbers(&self) -> Vec<f64> {
        self.table()
            .values()
            .iter()
            .flatten()
            .filter_map(|c| c.as_number())
            .collect()
    }

    fn first_col(&self, spec: &Dynamic) -> RhaiResult<usize> {
        let spec = axis_spec(spec)?;
        self.table()
            .col_index()
            .iter()
            .position(|t| spec.matches(t))
            .ok_or_else(|| runtime(format!("no column matches {spec:?}")))
    }

    fn rows_where(&self, keep: impl Fn(usize) -> bool) -> Frame {
        let rows: Vec<usize> = (0..self.table().n_rows()).filter(|&i| keep(i)).collect();
        let cols: Vec<usize> = (0..self.table().n_cols()).collect();
        self.derive(crate::table::take(self.table(), &rows, &cols).expect("sub-table"))
    }
}

fn compare_cell(cell: &CellValue, op: &str, target: &Value) -> RhaiResult<bool> {
    let num = match (cell, target) {
        (CellValue::Number(a), Value::Number(b)) => Some((*a, *b)),
        _ => None,
    };
    let text = match cell {
        CellValue::Number(n) => crate::value::format_number(*n),
        CellValue::Text(s) => s.clone(),
        CellValue::Empty => String::new(),
    }
    .to_lowercase();
    let target_text = label_of(target).to_lowercase();
    Ok(match (op, num) {
        ("==", Some((a, b))) => a == b,
        ("!=", Some((a, b))) => a != b,
        (">", Some((a, b))) => a > b,
        (">=", Some((a, b))) => a >= b,
        ("<", Some((a, b))) => a < b,
        ("<=", Some((a, b))) => a <= b,
        ("==", None) => text.trim() == target_text.trim(),
        ("!=", None) => text.trim() != target_text.trim(),
        (">" | ">=" | "<" | "<=", None) => false,
        ("contains", _) => text.contains(target_text.trim()),
        (other, _) => return Err(runtime(format!("unknown comparison `{other}`"))),
    })
}

fn register_frame(engine: &mut Engine) {
    engine
        .register_type_with_name::<Frame>("Frame")
        .register_fn("loc", Frame::loc)
        .register_fn("loc", |f: &mut Frame, rows: Dynamic| f.loc(rows, Dynamic::UNIT))
        .register_fn("col", |f: &mut Frame, cols: Dynamic| f.loc(Dynamic::UNIT, cols))
        .register_fn("item", |f: &mut Frame| -> RhaiResult<Dynamic> {
            let t = f.table();
            if t.n_rows() == 1 && t.n_cols() == 1 {
                Ok(cell_dynamic(&t.values()[0][0].value))
            } else {
                Err(runtime(format!(
                    "item() needs a 1x1 table, got {}x{}",
                    t.n_rows(),
                    t.n_cols()
                )))
            }
        })
        .register_fn("values", |f: &mut Frame| -> Array {
            f.table()
                .values()
                .iter()
                .flatten()
                .map(|c| cell_dynamic(&c.value))
                .collect()
        })
        .register_fn("column", |f: &mut Frame, spec: Dynamic| -> RhaiResult<Array> {
            let j = f.first_col(&spec)?;
            Ok(f.table()
                .values()
                .iter()
                .map(|r| cell_dynamic(&r[j].value))
                .collect())
        })
        .register_fn("row_labels", |f: &mut Frame| -> Array {
            f.table().row_index().iter().map(tuple_array).collect()
        })
        .register_fn("col_labels", |f: &mut Frame| -> Array {
            f.table().col_index().iter().map(tuple_array).collect()
        })
        .register_fn("labels", |f: &mut Frame, axis: &str, level: i64| -> RhaiResult<Array> {
            let axis: crate::apis::Axis = axis.parse().map_err(|e: crate::apis::ApiError| runtime(e.to_string()))?;
            let index = match axis {
                crate::apis::Axis::Row => f.table().row_index(),
                crate::apis::Axis::Column => f.table().col_index(),
            };
            let mut seen: Vec<String> = Vec::new();
            for t in index {
                let l = t
                    .get(level.max(0) as usize)
                    .ok_or_else(|| runtime(format!("level {level} out of range")))?;
                if !seen.iter().any(|s| s == l) {
                    seen.push(l.to_string());
                }
            }
            Ok(seen.into_iter().map(Dynamic::from).collect())
        })
        .register_fn("nrows", |f: &mut Frame| f.table().n_rows() as i64)
        .register_fn("ncols", |f: &mut Frame| f.table().n_cols() as i64)
        .register_fn("len", |f: &mut Frame| f.table().n_rows() as i64)
        .register_fn("count", |f: &mut Frame| f.table().n_rows() as i64)
        .register_fn("head", |f: &mut Frame, k: i64| {
            f.derive(crate::table::head_rows(f.table(), k.max(1) as usize))
        })
        .register_fn("sum", |f: &mut Frame| -> f64 { f.numbers().iter().sum() })
        .register_fn("mean", |f: &mut Frame| -> RhaiResult<f64> {
            let n = f.numbers();
            if n.is_empty() {
                return Err(runtime("mean() of a table without numbers"));
            }
            Ok(n.iter().sum::<f64>() / n.len() as f64)
        })
        .register_fn("max", |f: &mut Frame| -> RhaiResult<f64> {
            f.numbers()
                .into_iter()
                .reduce(f64::max)
                .ok_or_else(|| runtime("max() of a table without numbers"))
        })
        .register_fn("min", |f: &mut Frame| -> RhaiResult<f64> {
            f.numbers()
                .into_iter()
                .reduce(f64::min)
                .ok_or_else(|| runtime("min() of a table without numbers"))
        })
        .register_fn("filter", |f: &mut Frame, col: Dynamic, value: Dynamic| -> RhaiResult<Frame> {
            filter(f, col, "==", value)
        })
        .register_fn("filter", |f: &mut Frame, col: Dynamic, op: &str, value: Dynamic| -> RhaiResult<Frame> {
            filter(f, col, op, value)
        })
        .register_fn("sort_by", |f: &mut Frame, col: Dynamic, descending: bool| -> RhaiResult<Frame> {
            let j = f.first_col(&col)?;
            let t = f.table();
            let mut order: Vec<usize> = (0..t.n_rows()).collect();
            order.sort_by(|&a, &b| {
                let (x, y) = (&t.values()[a][j], &t.values()[b][j]);
                let o = match (x.as_number(), y.as_number()) {
                    (Some(p), Some(q)) => p.total_cmp(&q),
                    _ => x.text().cmp(y.text()),
                };
                if descending { o.reverse() } else { o }
            });
            let cols: Vec<usize> = (0..t.n_cols()).collect();
            Ok(f.derive(crate::table::take(t, &order, &cols).expect("permutation")))
        })
        .register_fn("index_by", |f: &mut Frame, col: Dynamic| -> RhaiResult<Frame> {
            let j = f.first_col(&col)?;
            let t = f.table();
            let rows = t
                .values()
                .iter()
                .map(|r| crate::table::IndexTuple::single(r[j].text()))
                .collect();
            MultiIndexTable::new(t.name.clone(), rows, t.col_index().to_vec(), t.values().to_vec())
                .map(|m| f.derive(m))
                .map_err(|e| runtime(e.to_string()))
        })
        .register_fn("to_string", |f: &mut Frame| {
            format!("<table {} {}x{}>", f.table().name, f.table().n_rows(), f.table().n_cols())
        });
}

fn filter(f: &mut Frame, col: Dynamic, op: &str, value: Dynamic) -> RhaiResult<Frame> {
    let j = f.first_col(&col)?;
    let target = to_value(&value)?;
    let t = f.table();
    let mut keep = Vec::with_capacity(t.n_rows());
    for row in t.values() {
        keep.push(compare_cell(&row[j].value, op, &target)?);
    }
    Ok(f.rows_where(|i| keep[i]))
}

fn register_apis(engine: &mut Engine, apis: &ApiRegistry) {
    for spec in apis.specs() {
        let spec = spec.clone();
        let types = vec![TypeId::of::<Dynamic>(); spec.arity];
        engine.register_raw_fn(spec.name.clone(), types, move |_ctx, args| {
            let values = args
                .iter()
                .map(|a| to_value(a))
                .collect::<RhaiResult<Vec<_>>>()?;
            spec.call(&values)
                .map(from_value)
                .map_err(|e| runtime(format!("{}: {e}", spec.name)))
        });
    }
}

fn register_denials(engine: &mut Engine) {
    for &(name, category) in FORBIDDEN_CAPABILITIES {
        for arity in 0..=MAX_DENIED_ARITY {
            engine.register_raw_fn(
                name,
                vec![TypeId::of::<Dynamic>(); arity],
                move |_ctx, _args| -> RhaiResult<Dynamic> {
                    Err(violation(format!("{category} access via `{name}` is not permitted")))
                },
            );
        }
    }
}

fn build_engine(
    tables: &Arc<TableSet>,
    apis: &ApiRegistry,
    limits: &ExecutionLimits,
    separator: &str,
    deadline: Instant,
) -> Engine {
    let mut engine = Engine::new();
    engine.set_module_resolver(DummyModuleResolver::new());
    engine.disable_symbol("eval");
    engine.on_print(|_| {});
    engine.on_debug(|_, _, _| {});
    let cap = limits.memory_cap.max(1);
    engine.set_max_string_size(cap);
    engine.set_max_array_size((cap / 64).max(1));
    engine.set_max_map_size((cap / 64).max(1));
    engine.on_progress(move |ops| {
        if ops % 128 == 0 && Instant::now() >= deadline {
            Some(Dynamic::from(Timeout))
        } else {
            None
        }
    });
    register_frame(&mut engine);
    register_denials(&mut engine);
    register_apis(&mut engine, apis);

    let lookup = Arc::clone(tables);
    engine.register_fn("table", move |name: &str| -> RhaiResult<Frame> {
        lookup
            .get(name)
            .map(|t| Frame(Arc::new(t.clone())))
            .ok_or_else(|| runtime(format!("no table named `{name}`")))
    });
    let sql_tables = Arc::clone(tables);
    let sep = separator.to_string();
    engine.register_fn("sql", move |query: &str| -> RhaiResult<Dynamic> {
        match query_tables(query, &sql_tables, &sep, deadline) {
            Ok(v) => Ok(from_value(v)),
            Err(SqlFailure::Interrupted) => Err(Box::new(EvalAltResult::ErrorTerminated(
                Dynamic::from(Timeout),
                Position::NONE,
            ))),
            Err(SqlFailure::Denied(msg)) => Err(violation(msg)),
            Err(SqlFailure::Query(msg)) => Err(runtime(format!("sql: {msg}"))),
        }
    });
    engine
}

// Python-style imports parse as ordinary statements in Rhai, so they are
// rejected up front.
fn host_import(program: &str) -> Option<&str> {
    program.lines().map(str::trim).find(|line| {
        let mut words = line.split_whitespace();
        match (words.next(), words.next()) {
            (Some("import"), Some(w)) => !w.starts_with('"'),
            (Some("from"), Some(_)) => line.split_whitespace().any(|w| w == "import"),
            _ => false,
        }
    })
}

fn classify(err: &EvalAltResult) -> (ExecStatus, String) {
    match err {
        EvalAltResult::ErrorInFunctionCall(_, _, inner, _) | EvalAltResult::ErrorInModule(_, inner, _) => {
            classify(inner)
        }
        EvalAltResult::ErrorTerminated(..) | EvalAltResult::ErrorTooManyOperations(..) => {
            (ExecStatus::Timeout, "wall-clock timeout exceeded".into())
        }
        EvalAltResult::ErrorDataTooLarge(what, _) => (
            ExecStatus::SandboxViolation,
            format!("memory cap exceeded: {what}"),
        ),
        EvalAltResult::ErrorModuleNotFound(name, _) => (
            ExecStatus::SandboxViolation,
            format!("import of module `{name}` is not permitted"),
        ),
        EvalAltResult::ErrorFunctionNotFound(sig, _) => {
            let name = sig.split([' ', '(']).next().unwrap_or("");
            match FORBIDDEN_CAPABILITIES.iter().find(|(n, _)| *n == name) {
                Some((n, cat)) => (
                    ExecStatus::SandboxViolation,
                    format!("{cat} access via `{n}` is not permitted"),
                ),
                None => (ExecStatus::RuntimeError, err.to_string()),
            }
        }
        EvalAltResult::ErrorRuntime(v, _) => match v.clone().try_cast::<SandboxViolation>() {
            Some(SandboxViolation(msg)) => (ExecStatus::SandboxViolation, msg),
            None => (ExecStatus::RuntimeError, err.to_string()),
        },
        _ => (ExecStatus::RuntimeError, err.to_string()),
    }
}

/// Runs a host-dialect program.
pub fn execute_host(
    program: &str,
    tables: &TableSet,
    apis: &ApiRegistry,
    limits: &ExecutionLimits,
    separator: &str,
) -> ExecutionResult {
    if program.trim().is_empty() {
        return ExecutionResult::failure(ExecStatus::RuntimeError, "empty program");
    }
    if let Some(line) = host_import(program) {
        return ExecutionResult::failure(
            ExecStatus::SandboxViolation,
            format!("module imports are not permitted: `{line}`"),
        );
    }
    let outcome = catch_unwind(AssertUnwindSafe(|| run(program, tables, apis, limits, separator)));
    match outcome {
        Ok(r) => r,
        Err(_) => ExecutionResult::failure(ExecStatus::RuntimeError, "interpreter panicked"),
    }
}

fn run(
    program: &str,
    tables: &TableSet,
    apis: &ApiRegistry,
    limits: &ExecutionLimits,
    separator: &str,
) -> ExecutionResult {
    let deadline = Instant::now() + limits.wall_timeout;
    let shared = Arc::new(tables.clone());
    let engine = build_engine(&shared, apis, limits, separator, deadline);

    let ast = match engine.compile(program) {
        Ok(ast) => ast,
        Err(e) => {
            let msg = e.to_string();
            let denied = std::iter::once("eval")
                .chain(FORBIDDEN_CAPABILITIES.iter().map(|(n, _)| *n))
                .any(|n| msg.contains(&format!("'{n}'")));
            let status = if denied {
                ExecStatus::SandboxViolation
            } else {
                ExecStatus::RuntimeError
            };
            return ExecutionResult::failure(status, format!("syntax error: {msg}"));
        }
    };

    let mut scope = Scope::new();
    scope.push_constant("ALL", Dynamic::UNIT);
    for t in tables.iter() {
        scope.push_constant(binding_name(&t.name), Frame(Arc::new(t.clone())));
    }
    if tables.len() == 1 && scope.get("df").is_none() {
        let only = tables.tables()[0].clone();
        scope.push_constant("df", Frame(Arc::new(only)));
    }
    scope.push_dynamic("ans", Dynamic::UNIT);

    let last = match engine.eval_ast_with_scope::<Dynamic>(&mut scope, &ast) {
        Ok(v) => v,
        Err(e) => {
            let (status, detail) = classify(&e);
            return ExecutionResult::failure(status, detail);
        }
    };
    let ans = scope.get_value::<Dynamic>("ans").unwrap_or(Dynamic::UNIT);
    let answer = if ans.is_unit() { last } else { ans };
    match to_value(&answer) {
        Ok(v) => ExecutionResult::ok(v),
        Err(e) => ExecutionResult::failure(ExecStatus::RuntimeError, e.to_string()),
    }
}
