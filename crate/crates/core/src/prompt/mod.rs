// SPDX-License-Identifier: Apache-2.0

//! Prompt assembly: instructions, solved exemplars, serialized tables, question.
//!
//! Layout of a serialized table (host dialect):
//!
//! ```text
//! table: <name>
//! columns (<count>, depth <d>):
//! (<label>, <label>, ...)        one line per column tuple
//! rows (<count>, depth <d>):
//! (<label>, ...)                 one line per row tuple
//! preview (first <k> of <n> rows):
//! (<row tuple>) | <cell> | ...   one line per previewed row
//! ```
//!
//! The SQL variant lists `"<column>" <TYPE>` pairs on one line instead of the
//! tuple lists. Cells longer than 40 characters are cut and end in `...`.

mod exemplar;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::apis::{ApiFamily, ApiRegistry};
use crate::datasets::DatasetKind;
use crate::executor::{sql_columns, ColumnSource, Dialect};
use crate::parser::DEFAULT_SEPARATOR;
use crate::table::{IndexTuple, MultiIndexTable, TableSet};

pub use exemplar::{parse_exemplars, ApiUsage, Category, Exemplar, ExemplarSet};

pub const DEFAULT_PREVIEW_ROWS: usize = 3;
pub const MAX_CELL_CHARS: usize = 40;
pub const QUESTION_MARKER: &str = "# Question:";
pub const PROGRAM_MARKER: &str = "# Program:";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PromptError {
    #[error("{needed} exemplars requested but set `{set}` has only {available}")]
    ExemplarShortage {
        set: String,
        needed: usize,
        available: usize,
    },
    #[error("preview row count must be at least 1")]
    ZeroPreview,
    #[error("bad exemplar asset at record {record}: {message}")]
    Asset { record: usize, message: String },
}

/// One-line documentation of an API shown in the instruction block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiDoc {
    pub name: String,
    pub family: ApiFamily,
    pub doc: String,
}

pub fn api_docs(registry: &ApiRegistry) -> Vec<ApiDoc> {
    registry
        .specs()
        .iter()
        .map(|s| ApiDoc {
            name: s.name.clone(),
            family: s.family,
            doc: s.doc.clone(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptConfig {
    pub n_shots: usize,
    pub k_preview_rows: usize,
    pub dialect: Dialect,
    pub include_api_instructions: bool,
    pub exemplar_set: ExemplarSet,
    pub api_docs: Vec<ApiDoc>,
    pub separator: String,
}

impl PromptConfig {
    /// Built-in exemplars for `dataset` and `dialect`, with the dataset's default shot count.
    pub fn for_dataset(dataset: DatasetKind, dialect: Dialect) -> Self {
        PromptConfig {
            n_shots: dataset.default_shots(),
            k_preview_rows: DEFAULT_PREVIEW_ROWS,
            dialect,
            include_api_instructions: dialect == Dialect::Host,
            exemplar_set: ExemplarSet::builtin(dataset, dialect),
            api_docs: Vec::new(),
            separator: DEFAULT_SEPARATOR.to_string(),
        }
    }

    pub fn with_apis(mut self, registry: &ApiRegistry) -> Self {
        self.api_docs = api_docs(registry);
        self
    }

    /// Drops exemplars and API docs of an ablated family.
    pub fn without_family(mut self, family: ApiFamily) -> Self {
        self.api_docs.retain(|d| d.family != family);
        self.exemplar_set = self.exemplar_set.without_family(family);
        self
    }

    pub fn validate(&self) -> Result<(), PromptError> {
        if self.k_preview_rows == 0 {
            return Err(PromptError::ZeroPreview);
        }
        if self.n_shots > self.exemplar_set.len() {
            return Err(PromptError::ExemplarShortage {
                set: self.exemplar_set.name.clone(),
                needed: self.n_shots,
                available: self.exemplar_set.len(),
            });
        }
        Ok(())
    }
}

/// Cuts `text` to [`MAX_CELL_CHARS`] characters, marking the cut with `...`.
pub fn truncate_cell(text: &str) -> String {
    let flat = text.replace(['\n', '\r'], " ");
    if flat.chars().count() <= MAX_CELL_CHARS {
        return flat;
    }
    let mut out: String = flat.chars().take(MAX_CELL_CHARS - 3).collect();
    out.push_str("...");
    out
}

fn push_tuples(out: &mut String, heading: &str, index: &[IndexTuple]) {
    let depth = index.first().map_or(0, IndexTuple::depth);
    out.push_str(&format!("{heading} ({}, depth {depth}):\n", index.len()));
    for t in index {
        out.push_str(&t.to_string());
        out.push('\n');
    }
}

/// Line-oriented rendering of a table: both index tuple lists, then the first `k` rows.
pub fn serialize_table(m: &MultiIndexTable, k: usize) -> String {
    let mut out = format!("table: {}\n", m.name);
    push_tuples(&mut out, "columns", m.col_index());
    push_tuples(&mut out, "rows", m.row_index());
    let shown = k.min(m.n_rows());
    out.push_str(&format!("preview (first {shown} of {} rows):\n", m.n_rows()));
    for (t, row) in m.row_index().iter().zip(m.values()).take(shown) {
        out.push_str(&t.to_string());
        for c in row {
            out.push_str(" | ");
            out.push_str(&truncate_cell(c.text()));
        }
        out.push('\n');
    }
    out
}

/// Schema-style rendering for the SQL dialect, using the column names the
/// executor loads the table under.
pub fn serialize_sql_table(m: &MultiIndexTable, k: usize, separator: &str) -> String {
    let cols = sql_columns(m, separator);
    let defs: Vec<String> = cols
        .iter()
        .map(|c| format!("\"{}\" {}", c.name, c.sql_type))
        .collect();
    let mut out = format!("table: {}\ncolumns: {}\n", m.name, defs.join(", "));
    let shown = k.min(m.n_rows());
    out.push_str(&format!("preview (first {shown} of {} rows):\n", m.n_rows()));
    for i in 0..shown {
        let cells: Vec<String> = cols
            .iter()
            .map(|c| match c.source {
                ColumnSource::RowLevel(l) => truncate_cell(m.row_index()[i].get(l).unwrap_or("")),
                ColumnSource::Column(j) => truncate_cell(m.values()[i][j].text()),
            })
            .collect();
        out.push_str(&cells.join(" | "));
        out.push('\n');
    }
    out
}

const HOST_INSTRUCTIONS: &str = "\
Answer the question by writing a Rhai program over the tables below.
Each table is bound by its name; with a single table it is also bound as `df`.
Select with df.loc(rows, cols): each selector is ALL, a label, a label prefix
array like [\"Illness\", \"Cold\"], or an array of such prefixes.
Read values with .item() for one cell, .values() for all cells, or .column(c).
Aggregate with .sum(), .mean(), .max(), .min(), .count().
Filter rows with .filter(col, op, value) and order them with .sort_by(col, descending).
Use .index_by(col) to label rows by the values of one column.
List labels with .labels(\"row\" or \"column\", level), .row_labels() and .col_labels().
Assign the final answer to `ans`.
";

const SQL_INSTRUCTIONS: &str = "\
Answer the question by writing one SQLite SELECT query over the tables below.
Quote table and column names with double quotes.
Return only the columns needed for the answer.
";

fn instruction_block(cfg: &PromptConfig) -> String {
    let mut out = String::from(match cfg.dialect {
        Dialect::Host => HOST_INSTRUCTIONS,
        Dialect::Sql => SQL_INSTRUCTIONS,
    });
    if cfg.include_api_instructions && cfg.dialect == Dialect::Host && !cfg.api_docs.is_empty() {
        out.push_str("\nAssistant functions you may call:\n");
        for d in &cfg.api_docs {
            out.push_str(&format!("- {}\n", d.doc));
        }
        out.push_str("Use them only when they make the program simpler.\n");
    }
    out
}

fn table_block(tables: &TableSet, cfg: &PromptConfig) -> String {
    tables
        .iter()
        .map(|t| match cfg.dialect {
            Dialect::Host => serialize_table(t, cfg.k_preview_rows),
            Dialect::Sql => serialize_sql_table(t, cfg.k_preview_rows, &cfg.separator),
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Assembles the full prompt. The question is always the last section.
pub fn build_prompt(q: &str, tables: &TableSet, cfg: &PromptConfig) -> Result<String, PromptError> {
    cfg.validate()?;
    let mut out = instruction_block(cfg);
    for (i, ex) in cfg.exemplar_set.select(cfg.n_shots)?.iter().enumerate() {
        out.push_str(&format!("\n### Example {}\n", i + 1));
        out.push_str(ex.table_snippet.trim_end());
        out.push_str(&format!("\n{QUESTION_MARKER} {}\n{PROGRAM_MARKER}\n", ex.question));
        out.push_str(ex.program.trim_end());
        out.push('\n');
    }
    out.push_str("\n### Task\n");
    out.push_str(&table_block(tables, cfg));
    out.push_str(&format!("{QUESTION_MARKER} {}\n{PROGRAM_MARKER}\n", q.trim()));
    Ok(out)
}
