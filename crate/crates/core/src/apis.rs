// SPDX-License-Identifier: Apache-2.0

//! Helper functions callable from generated programs.
//!
//! Two families ship by default: the comparison operations
//! (`compare_larger`, `compare_smaller`) and the question-answering helpers
//! (`qa`, `qa_mask`) that ask the completion model one yes/no question per
//! distinct header label. New functions are added through [`ApiRegistry`].

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{Gateway, GatewayError};
use crate::table::{IndexTuple, MultiIndexTable};
use crate::value::Value;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ApiError {
    #[error("values has {values} entries but indices has {indices}")]
    LengthMismatch { values: usize, indices: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("non-numeric value: {0}")]
    NonNumeric(String),
    #[error("level {level} out of range for index depth {depth}")]
    LevelOutOfRange { level: usize, depth: usize },
    #[error("bad argument: {0}")]
    BadArgument(String),
    #[error("{name} takes {expected} arguments, got {got}")]
    Arity {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("API `{0}` is already registered")]
    Duplicate(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// Which ablation switch controls an API.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApiFamily {
    Operation,
    Qa,
    Custom,
}

pub type ApiFn = Arc<dyn Fn(&[Value]) -> Result<Value, ApiError> + Send + Sync>;

#[derive(Clone)]
pub struct ApiSpec {
    pub name: String,
    pub arity: usize,
    pub family: ApiFamily,
    /// One-line usage note shown to the model.
    pub doc: String,
    pub func: ApiFn,
}

impl fmt::Debug for ApiSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ApiSpec")
            .field("name", &self.name)
            .field("arity", &self.arity)
            .field("family", &self.family)
            .finish_non_exhaustive()
    }
}

impl ApiSpec {
    pub fn call(&self, args: &[Value]) -> Result<Value, ApiError> {
        if args.len() != self.arity {
            return Err(ApiError::Arity {
                name: self.name.clone(),
                expected: self.arity,
                got: args.len(),
            });
        }
        (self.func)(args)
    }
}

/// Name-to-function map, kept in registration order.
#[derive(Debug, Clone, Default)]
pub struct ApiRegistry {
    apis: Vec<ApiSpec>,
}

impl ApiRegistry {
    pub fn empty() -> Self {
        ApiRegistry::default()
    }

    /// Operation and QA families.
    pub fn standard(gateway: Gateway) -> Self {
        let mut reg = ApiRegistry::empty();
        register_operation_apis(&mut reg);
        register_qa_apis(&mut reg, Arc::new(gateway));
        reg
    }

    pub fn register(
        &mut self,
        name: impl Into<String>,
        arity: usize,
        family: ApiFamily,
        doc: impl Into<String>,
        func: impl Fn(&[Value]) -> Result<Value, ApiError> + Send + Sync + 'static,
    ) -> Result<(), ApiError> {
        let name = name.into();
        if self.get(&name).is_some() {
            return Err(ApiError::Duplicate(name));
        }
        self.apis.push(ApiSpec {
            name,
            arity,
            family,
            doc: doc.into(),
            func: Arc::new(func),
        });
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&ApiSpec> {
        self.apis.iter().find(|a| a.name == name)
    }

    pub fn list(&self) -> Vec<&str> {
        self.apis.iter().map(|a| a.name.as_str()).collect()
    }

    pub fn specs(&self) -> &[ApiSpec] {
        &self.apis
    }

    /// Drops every API of `family`.
    pub fn without_family(mut self, family: ApiFamily) -> Self {
        self.apis.retain(|a| a.family != family);
        self
    }

    pub fn has_family(&self, family: ApiFamily) -> bool {
        self.apis.iter().any(|a| a.family == family)
    }
}

fn check_lengths(values: &[f64], indices_len: usize) -> Result<(), ApiError> {
    if values.len() != indices_len {
        return Err(ApiError::LengthMismatch {
            values: values.len(),
            indices: indices_len,
        });
    }
    if values.is_empty() {
        return Err(ApiError::EmptyInput);
    }
    Ok(())
}

/// Label of the largest value; ties go to the first occurrence.
pub fn compare_larger<'a, L>(values: &[f64], indices: &'a [L]) -> Result<&'a L, ApiError> {
    check_lengths(values, indices.len())?;
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    Ok(&indices[best])
}

/// Label of the smallest value; ties go to the first occurrence.
pub fn compare_smaller<'a, L>(values: &[f64], indices: &'a [L]) -> Result<&'a L, ApiError> {
    check_lengths(values, indices.len())?;
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v < values[best] {
            best = i;
        }
    }
    Ok(&indices[best])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Row,
    Column,
}

impl std::str::FromStr for Axis {
    type Err = ApiError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "row" | "rows" | "index" | "left" | "0" => Ok(Axis::Row),
            "column" | "columns" | "col" | "cols" | "top" | "1" => Ok(Axis::Column),
            other => Err(ApiError::BadArgument(format!("unknown axis `{other}`"))),
        }
    }
}

/// Something that answers yes/no questions.
pub trait YesNo: Send + Sync {
    fn yes_no(&self, question: &str) -> Result<bool, GatewayError>;
}

impl YesNo for Gateway {
    fn yes_no(&self, question: &str) -> Result<bool, GatewayError> {
        Gateway::yes_no(self, question)
    }
}

impl<F> YesNo for F
where
    F: Fn(&str) -> Result<bool, GatewayError> + Send + Sync,
{
    fn yes_no(&self, question: &str) -> Result<bool, GatewayError> {
        self(question)
    }
}

/// Placeholder slot in QA templates.
pub const QA_SLOT: &str = "{}";

/// Fills the template's `{}` slot with `label`, or prefixes `"<label>: "` when there is none.
pub fn substitute_label(template: &str, label: &str) -> String {
    if template.contains(QA_SLOT) {
        template.replace(QA_SLOT, label)
    } else {
        format!("{label}: {template}")
    }
}

/// One boolean per entry of the chosen axis: whether its label at `level` answered yes.
///
/// Each distinct label is asked once. Errors from the oracle count as "no".
pub fn qa_mask(
    oracle: &dyn YesNo,
    template: &str,
    table: &MultiIndexTable,
    axis: Axis,
    level: usize,
) -> Result<Vec<bool>, ApiError> {
    let (index, depth) = match axis {
        Axis::Row => (table.row_index(), table.row_depth()),
        Axis::Column => (table.col_index(), table.col_depth()),
    };
    if level >= depth {
        return Err(ApiError::LevelOutOfRange { level, depth });
    }
    let mut answers: HashMap<&str, bool> = HashMap::new();
    let mut mask = Vec::with_capacity(index.len());
    for tuple in index {
        let label = tuple.get(level).expect("uniform depth");
        let answer = *answers.entry(label).or_insert_with(|| {
            let question = substitute_label(template, label);
            oracle.yes_no(&question).unwrap_or_else(|e| {
                tracing::warn!(%question, error = %e, "qa question failed; treating as no");
                false
            })
        });
        mask.push(answer);
    }
    Ok(mask)
}

/// Index tuples of the chosen axis whose label at `level` answered yes.
pub fn qa(
    oracle: &dyn YesNo,
    template: &str,
    table: &MultiIndexTable,
    axis: Axis,
    level: usize,
) -> Result<Vec<IndexTuple>, ApiError> {
    let mask = qa_mask(oracle, template, table, axis, level)?;
    let index = match axis {
        Axis::Row => table.row_index(),
        Axis::Column => table.col_index(),
    };
    Ok(index
        .iter()
        .zip(mask)
        .filter(|(_, keep)| *keep)
        .map(|(t, _)| t.clone())
        .collect())
}

/// Numeric list argument: a list of numbers or numeric cells, or a table's cells.
pub fn numbers_arg(v: &Value) -> Result<Vec<f64>, ApiError> {
    let items: Vec<Value> = match v {
        Value::List(items) => items.clone(),
        Value::Table(t) => t
            .values()
            .iter()
            .flatten()
            .map(|c| Value::from_cell(&c.value))
            .collect(),
        other => vec![other.clone()],
    };
    items
        .iter()
        .map(|x| x.as_number().ok_or_else(|| ApiError::NonNumeric(x.to_string())))
        .collect()
}

fn labels_arg(v: &Value) -> Result<Vec<Value>, ApiError> {
    match v {
        Value::List(items) => Ok(items.clone()),
        other => Err(ApiError::BadArgument(format!(
            "indices must be a list, got {}",
            other.type_name()
        ))),
    }
}

fn table_arg(v: &Value) -> Result<&MultiIndexTable, ApiError> {
    match v {
        Value::Table(t) => Ok(t),
        other => Err(ApiError::BadArgument(format!(
            "expected a table, got {}",
            other.type_name()
        ))),
    }
}

fn text_arg(v: &Value) -> Result<&str, ApiError> {
    v.as_text()
        .ok_or_else(|| ApiError::BadArgument(format!("expected text, got {}", v.type_name())))
}

fn level_arg(v: &Value) -> Result<usize, ApiError> {
    match v {
        Value::Number(n) if *n >= 0.0 && n.fract() == 0.0 => Ok(*n as usize),
        other => Err(ApiError::BadArgument(format!("level must be a non-negative integer, got {other}"))),
    }
}

pub fn tuple_value(t: &IndexTuple) -> Value {
    Value::List(t.labels().iter().map(|l| Value::Text(l.clone())).collect())
}

pub fn register_operation_apis(reg: &mut ApiRegistry) {
    reg.register(
        "compare_larger",
        2,
        ApiFamily::Operation,
        "compare_larger(values, indices) returns the entry of indices at the position of the largest value",
        |args| {
            let values = numbers_arg(&args[0])?;
            let indices = labels_arg(&args[1])?;
            compare_larger(&values, &indices).cloned()
        },
    )
    .expect("fresh registry");
    reg.register(
        "compare_smaller",
        2,
        ApiFamily::Operation,
        "compare_smaller(values, indices) returns the entry of indices at the position of the smallest value",
        |args| {
            let values = numbers_arg(&args[0])?;
            let indices = labels_arg(&args[1])?;
            compare_smaller(&values, &indices).cloned()
        },
    )
    .expect("fresh registry");
}

pub fn register_qa_apis(reg: &mut ApiRegistry, oracle: Arc<dyn YesNo>) {
    let o = Arc::clone(&oracle);
    reg.register(
        "qa",
        4,
        ApiFamily::Qa,
        "qa(question, table, axis, level) asks the question about every label at `level` of the \"row\" or \"column\" index and returns the index tuples answered yes",
        move |args| {
            let axis: Axis = text_arg(&args[2])?.parse()?;
            let tuples = qa(o.as_ref(), text_arg(&args[0])?, table_arg(&args[1])?, axis, level_arg(&args[3])?)?;
            Ok(Value::List(tuples.iter().map(tuple_value).collect()))
        },
    )
    .expect("fresh registry");
    reg.register(
        "qa_mask",
        4,
        ApiFamily::Qa,
        "qa_mask(question, table, axis, level) is like qa but returns one true/false per index entry",
        move |args| {
            let axis: Axis = text_arg(&args[2])?.parse()?;
            let mask = qa_mask(oracle.as_ref(), text_arg(&args[0])?, table_arg(&args[1])?, axis, level_arg(&args[3])?)?;
            Ok(Value::List(mask.into_iter().map(Value::Bool).collect()))
        },
    )
    .expect("fresh registry");
}
