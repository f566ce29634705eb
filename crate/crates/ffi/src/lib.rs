// SPDX-License-Identifier: Apache-2.0

//! C interface to table parsing, sandboxed execution and answer matching.
//!
//! Every function returns a [`TqStatus`]. On failure a message is kept per
//! thread and can be read with [`tq_last_error`]. Handles are opaque and
//! must be released with their `_free` function. Strings returned through
//! out-parameters are owned by the caller and released with [`tq_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::time::Duration;

use tabqa::apis::{register_operation_apis, ApiRegistry};
use tabqa::cli::load_table_file;
use tabqa::eval::{answers_match, normalize_answer};
use tabqa::executor::{Dialect, ExecStatus, ExecutionLimits, ExecutionResult, Executor, DEFAULT_MEMORY_CAP};
use tabqa::parser::parse_table;
use tabqa::prompt::serialize_table;
use tabqa::table::{MultiIndexTable, RawTable, TableSet};

/// Result code of every `tq_*` call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TqStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Format = 4,
    Io = 5,
    Panic = 6,
}

/// Program language accepted by [`tq_execute`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TqDialect {
    Host = 0,
    Sql = 1,
}

/// Classification of one program execution.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TqExecStatus {
    Ok = 0,
    RuntimeError = 1,
    Timeout = 2,
    SandboxViolation = 3,
    EmptyResult = 4,
}

impl From<ExecStatus> for TqExecStatus {
    fn from(s: ExecStatus) -> Self {
        match s {
            ExecStatus::Ok => TqExecStatus::Ok,
            ExecStatus::RuntimeError => TqExecStatus::RuntimeError,
            ExecStatus::Timeout => TqExecStatus::Timeout,
            ExecStatus::SandboxViolation => TqExecStatus::SandboxViolation,
            ExecStatus::EmptyResult => TqExecStatus::EmptyResult,
        }
    }
}

/// A parsed multi-index table.
pub struct TqTable(MultiIndexTable);

/// An ordered set of uniquely named tables.
pub struct TqTableSet(TableSet);

/// Outcome of [`tq_execute`].
pub struct TqResult(ExecutionResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Fail(TqStatus, String);

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> TqStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TqStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            TqStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(TqStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(TqStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail(TqStatus::NullArgument, "output pointer is null".into()));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail(TqStatus::NullArgument, "output pointer is null".into()));
    }
    *out = CString::new(s.replace('\0', " ")).expect("interior NULs removed").into_raw();
    Ok(())
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref()
        .ok_or_else(|| Fail(TqStatus::NullArgument, format!("{what} is null")))
}

fn format_err(e: impl std::fmt::Display) -> Fail {
    Fail(TqStatus::Format, e.to_string())
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next `tq_*` call on the same thread.
#[no_mangle]
pub extern "C" fn tq_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn tq_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn tq_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads and parses a table file (`.json`, `.csv` or `.tsv`). Header band
/// sizes apply to CSV and TSV only.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn tq_table_load(
    path: *const c_char,
    header_rows: usize,
    left_cols: usize,
    out: *mut *mut TqTable,
) -> TqStatus {
    guard(|| {
        let path = text(path, "path")?;
        if !Path::new(path).exists() {
            return Err(Fail(TqStatus::Io, format!("{path}: no such file")));
        }
        let raw = load_table_file(Path::new(path), header_rows, left_cols).map_err(format_err)?;
        put(out, TqTable(parse_table(&raw).map_err(format_err)?))
    })
}

/// Parses a tab-separated grid (rows split on newlines) with the given
/// header band sizes.
///
/// # Safety
/// `name` and `tsv` must be NUL-terminated strings and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn tq_table_from_tsv(
    name: *const c_char,
    tsv: *const c_char,
    top_header_depth: usize,
    left_header_width: usize,
    out: *mut *mut TqTable,
) -> TqStatus {
    guard(|| {
        let name = text(name, "name")?;
        let tsv = text(tsv, "tsv")?;
        let grid: Vec<Vec<&str>> = tsv
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.split('\t').collect())
            .collect();
        let raw = RawTable::from_strings(name, &grid, top_header_depth, left_header_width).map_err(format_err)?;
        put(out, TqTable(parse_table(&raw).map_err(format_err)?))
    })
}

/// # Safety
/// `t` must be null or a live table handle.
#[no_mangle]
pub unsafe extern "C" fn tq_table_free(t: *mut TqTable) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Row count, column count, row index depth and column index depth.
///
/// # Safety
/// `t` must be a live table handle; the out pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn tq_table_shape(
    t: *const TqTable,
    n_rows: *mut usize,
    n_cols: *mut usize,
    row_depth: *mut usize,
    col_depth: *mut usize,
) -> TqStatus {
    guard(|| {
        let m = &get(t, "table")?.0;
        for (p, v) in [
            (n_rows, m.n_rows()),
            (n_cols, m.n_cols()),
            (row_depth, m.row_depth()),
            (col_depth, m.col_depth()),
        ] {
            if !p.is_null() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Prompt rendering of the table with the first `preview_rows` rows.
///
/// # Safety
/// `t` must be a live table handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn tq_table_serialize(t: *const TqTable, preview_rows: usize, out: *mut *mut c_char) -> TqStatus {
    guard(|| {
        let m = &get(t, "table")?.0;
        if preview_rows == 0 {
            return Err(Fail(TqStatus::InvalidArgument, "preview_rows must be positive".into()));
        }
        put_string(out, serialize_table(m, preview_rows))
    })
}

/// # Safety
/// `out` must be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn tq_tableset_new(out: *mut *mut TqTableSet) -> TqStatus {
    guard(|| put(out, TqTableSet(TableSet::default())))
}

/// Adds a copy of `t`. Names must be unique within the set.
///
/// # Safety
/// `set` and `t` must be live handles.
#[no_mangle]
pub unsafe extern "C" fn tq_tableset_add(set: *mut TqTableSet, t: *const TqTable) -> TqStatus {
    guard(|| {
        let table = get(t, "table")?.0.clone();
        let set = set
            .as_mut()
            .ok_or_else(|| Fail(TqStatus::NullArgument, "table set is null".into()))?;
        set.0
            .push(table)
            .map_err(|e| Fail(TqStatus::InvalidArgument, e.to_string()))
    })
}

/// # Safety
/// `set` must be null or a live table set handle.
#[no_mangle]
pub unsafe extern "C" fn tq_tableset_free(set: *mut TqTableSet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

/// Runs one program against the tables. The operation APIs are available
/// to host programs. A `timeout_ms` of zero uses the default budget.
///
/// # Safety
/// `set` must be a live table set, `program` a NUL-terminated string and
/// `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn tq_execute(
    set: *const TqTableSet,
    dialect: TqDialect,
    program: *const c_char,
    timeout_ms: u64,
    out: *mut *mut TqResult,
) -> TqStatus {
    guard(|| {
        let tables = &get(set, "table set")?.0;
        let program = text(program, "program")?;
        let limits = if timeout_ms == 0 {
            ExecutionLimits::default()
        } else {
            ExecutionLimits::new(Duration::from_millis(timeout_ms), DEFAULT_MEMORY_CAP)
        };
        let mut apis = ApiRegistry::empty();
        register_operation_apis(&mut apis);
        let dialect = match dialect {
            TqDialect::Host => Dialect::Host,
            TqDialect::Sql => Dialect::Sql,
        };
        put(out, TqResult(Executor::new(apis, limits).execute(dialect, program, tables)))
    })
}

/// # Safety
/// `r` must be a live result handle.
#[no_mangle]
pub unsafe extern "C" fn tq_result_status(r: *const TqResult, out: *mut TqExecStatus) -> TqStatus {
    guard(|| {
        let r = &get(r, "result")?.0;
        if out.is_null() {
            return Err(Fail(TqStatus::NullArgument, "output pointer is null".into()));
        }
        *out = r.status.into();
        Ok(())
    })
}

/// Normalized answer text. Fails with `InvalidArgument` when the program
/// produced no answer.
///
/// # Safety
/// `r` must be a live result handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn tq_result_answer(r: *const TqResult, out: *mut *mut c_char) -> TqStatus {
    guard(|| {
        let r = &get(r, "result")?.0;
        let v = r
            .value
            .as_ref()
            .ok_or_else(|| Fail(TqStatus::InvalidArgument, "execution produced no answer".into()))?;
        put_string(out, normalize_answer(v).to_string())
    })
}

/// Error detail of a failed execution, or an empty string.
///
/// # Safety
/// `r` must be a live result handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn tq_result_error(r: *const TqResult, out: *mut *mut c_char) -> TqStatus {
    guard(|| {
        let r = &get(r, "result")?.0;
        put_string(out, r.error_detail.clone().unwrap_or_default())
    })
}

/// True when the result's answer matches one of the `n_gold` gold strings
/// (or, for list answers, the gold list as a multiset). A result without an
/// answer never matches.
///
/// # Safety
/// `r` must be a live result handle, `gold` an array of `n_gold`
/// NUL-terminated strings and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn tq_result_matches(
    r: *const TqResult,
    gold: *const *const c_char,
    n_gold: usize,
    out: *mut bool,
) -> TqStatus {
    guard(|| {
        let r = &get(r, "result")?.0;
        if out.is_null() || (gold.is_null() && n_gold > 0) {
            return Err(Fail(TqStatus::NullArgument, "null pointer argument".into()));
        }
        let golds = (0..n_gold)
            .map(|i| text(*gold.add(i), "gold answer").map(str::to_string))
            .collect::<Result<Vec<_>, _>>()?;
        *out = r
            .value
            .as_ref()
            .is_some_and(|v| answers_match(&normalize_answer(v), &golds));
        Ok(())
    })
}

/// # Safety
/// `r` must be null or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn tq_result_free(r: *mut TqResult) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}
