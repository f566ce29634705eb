// SPDX-License-Identifier: Apache-2.0

//! Sandboxed execution of candidate programs.
//!
//! Two dialects are supported. The host dialect is an embedded scripting
//! language (Rhai) with every table bound by name, the registered assistant
//! APIs bound as functions, and no access to files, network, processes, the
//! environment or dynamic code loading. The SQL dialect loads the tables into
//! an in-memory SQLite database and runs one query.
//!
//! Every failure is classified into exactly one [`ExecStatus`].

mod host;
mod sql;

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::apis::{ApiError, ApiFamily, ApiRegistry, ApiSpec};
use crate::parser::DEFAULT_SEPARATOR;
use crate::table::TableSet;
use crate::value::{Value, format_number};

pub use host::{binding_name, execute_host, FORBIDDEN_CAPABILITIES};
pub use sql::{execute_sql, sql_columns, ColumnSource, SqlColumn};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);
pub const DEFAULT_MEMORY_CAP: usize = 512 * 1024 * 1024;

/// Resource limits for one execution. Network and filesystem access are never granted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionLimits {
    pub wall_timeout: Duration,
    pub memory_cap: usize,
    allow_network: bool,
    allow_filesystem: bool,
}

impl Default for ExecutionLimits {
    fn default() -> Self {
        ExecutionLimits::new(DEFAULT_TIMEOUT, DEFAULT_MEMORY_CAP)
    }
}

impl ExecutionLimits {
    /// A zero timeout is bumped to one millisecond.
    pub fn new(wall_timeout: Duration, memory_cap: usize) -> Self {
        ExecutionLimits {
            wall_timeout: wall_timeout.max(Duration::from_millis(1)),
            memory_cap,
            allow_network: false,
            allow_filesystem: false,
        }
    }

    pub fn allow_network(&self) -> bool {
        self.allow_network
    }

    pub fn allow_filesystem(&self) -> bool {
        self.allow_filesystem
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecStatus {
    Ok,
    RuntimeError,
    Timeout,
    SandboxViolation,
    EmptyResult,
}

impl ExecStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            ExecStatus::Ok => "ok",
            ExecStatus::RuntimeError => "runtime_error",
            ExecStatus::Timeout => "timeout",
            ExecStatus::SandboxViolation => "sandbox_violation",
            ExecStatus::EmptyResult => "empty_result",
        }
    }
}

/// Outcome of one execution. `value` is present iff `status` is `Ok`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionResult {
    pub status: ExecStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_detail: Option<String>,
}

impl ExecutionResult {
    pub fn ok(value: Value) -> Self {
        if value.is_empty_answer() {
            return ExecutionResult::failure(ExecStatus::EmptyResult, "program produced no answer");
        }
        ExecutionResult {
            status: ExecStatus::Ok,
            value: Some(value),
            error_detail: None,
        }
    }

    pub fn failure(status: ExecStatus, detail: impl Into<String>) -> Self {
        debug_assert!(status != ExecStatus::Ok);
        ExecutionResult {
            status,
            value: None,
            error_detail: Some(detail.into()),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == ExecStatus::Ok
    }
}

/// Program language of a candidate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dialect {
    #[default]
    Host,
    Sql,
}

impl std::str::FromStr for Dialect {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "host" => Ok(Dialect::Host),
            "sql" => Ok(Dialect::Sql),
            other => Err(format!("unknown dialect `{other}` (expected host or sql)")),
        }
    }
}

impl std::fmt::Display for Dialect {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Dialect::Host => "host",
            Dialect::Sql => "sql",
        })
    }
}

/// An execution environment: the API registry plus limits.
#[derive(Debug, Clone)]
pub struct Executor {
    apis: ApiRegistry,
    limits: ExecutionLimits,
    separator: String,
}

impl Executor {
    pub fn new(apis: ApiRegistry, limits: ExecutionLimits) -> Self {
        Executor {
            apis,
            limits,
            separator: DEFAULT_SEPARATOR.to_string(),
        }
    }

    /// Separator used to flatten column tuples into SQL column names.
    pub fn with_separator(mut self, separator: impl Into<String>) -> Self {
        self.separator = separator.into();
        self
    }

    pub fn register_api(
        &mut self,
        name: impl Into<String>,
        arity: usize,
        doc: impl Into<String>,
        func: impl Fn(&[Value]) -> Result<Value, ApiError> + Send + Sync + 'static,
    ) -> Result<(), ApiError> {
        self.apis.register(name, arity, ApiFamily::Custom, doc, func)
    }

    pub fn list_apis(&self) -> Vec<&str> {
        self.apis.list()
    }

    pub fn api_specs(&self) -> &[ApiSpec] {
        self.apis.specs()
    }

    pub fn limits(&self) -> &ExecutionLimits {
        &self.limits
    }

    pub fn execute(&self, dialect: Dialect, program: &str, tables: &TableSet) -> ExecutionResult {
        match dialect {
            Dialect::Host => execute_host(program, tables, &self.apis, &self.limits, &self.separator),
            Dialect::Sql => execute_sql(program, tables, &self.limits, &self.separator),
        }
    }
}

pub(crate) fn label_of(v: &Value) -> String {
    match v {
        Value::Text(s) => s.clone(),
        Value::Number(n) => format_number(*n),
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ok_with_empty_value_is_empty_result() {
        assert_eq!(ExecutionResult::ok(Value::Null).status, ExecStatus::EmptyResult);
        assert_eq!(ExecutionResult::ok(Value::List(vec![])).status, ExecStatus::EmptyResult);
        let r = ExecutionResult::ok(Value::Number(1.0));
        assert!(r.is_ok() && r.value.is_some());
    }

    #[test]
    fn limits_never_grant_io() {
        let l = ExecutionLimits::default();
        assert_eq!(l.wall_timeout, Duration::from_secs(10));
        assert_eq!(l.memory_cap, 512 * 1024 * 1024);
        assert!(!l.allow_network() && !l.allow_filesystem());
        assert!(ExecutionLimits::new(Duration::ZERO, 1).wall_timeout > Duration::ZERO);
    }
}
