// SPDX-License-Identifier: Apache-2.0

//! Table types: raw grids, header trees and multi-index tables.
//!
//! Everything here is immutable after construction. Constructors check the
//! structural invariants so downstream code can index without bounds checks
//! failing.

mod cell;
mod ops;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cell::{parse_number, Cell, CellValue};
pub use ops::{head_rows, select, to_grid, AxisSpec};
pub(crate) use ops::take;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TableError {
    #[error("grid is not rectangular: row {row} has {found} cells, expected {expected}")]
    Ragged {
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("top header depth {depth} exceeds row count {rows}")]
    HeaderDepth { depth: usize, rows: usize },
    #[error("left header width {width} exceeds column count {cols}")]
    HeaderWidth { width: usize, cols: usize },
    #[error("{axis} index has {labels} entries but values have {values}")]
    IndexLength {
        axis: &'static str,
        labels: usize,
        values: usize,
    },
    #[error("{axis} index tuples have mixed depths")]
    MixedDepth { axis: &'static str },
    #[error("index tuple must contain at least one label")]
    EmptyTuple,
    #[error("selection matched no {axis} entries")]
    NoMatch { axis: &'static str },
    #[error("duplicate table name `{0}`")]
    DuplicateName(String),
    #[error("table name must be non-empty")]
    EmptyName,
}

/// A source table as a rectangular grid of cells plus header band sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawTable {
    pub name: String,
    pub grid: Vec<Vec<Cell>>,
    pub top_header_depth: usize,
    pub left_header_width: usize,
}

impl RawTable {
    pub fn new(
        name: impl Into<String>,
        grid: Vec<Vec<Cell>>,
        top_header_depth: usize,
        left_header_width: usize,
    ) -> Result<Self, TableError> {
        let table = RawTable {
            name: name.into(),
            grid,
            top_header_depth,
            left_header_width,
        };
        table.validate()?;
        Ok(table)
    }

    /// Builds a table from plain strings.
    pub fn from_strings<S: AsRef<str>>(
        name: impl Into<String>,
        rows: &[Vec<S>],
        top_header_depth: usize,
        left_header_width: usize,
    ) -> Result<Self, TableError> {
        let grid = rows
            .iter()
            .map(|r| r.iter().map(|s| Cell::parse(s.as_ref())).collect())
            .collect();
        RawTable::new(name, grid, top_header_depth, left_header_width)
    }

    // A grid may consist of header rows only (a database table with no rows),
    // so the bounds are inclusive.
    pub fn validate(&self) -> Result<(), TableError> {
        let cols = self.grid.first().map_or(0, Vec::len);
        for (i, row) in self.grid.iter().enumerate() {
            if row.len() != cols {
                return Err(TableError::Ragged {
                    row: i,
                    found: row.len(),
                    expected: cols,
                });
            }
        }
        if self.top_header_depth > self.grid.len() {
            return Err(TableError::HeaderDepth {
                depth: self.top_header_depth,
                rows: self.grid.len(),
            });
        }
        if self.left_header_width > cols {
            return Err(TableError::HeaderWidth {
                width: self.left_header_width,
                cols,
            });
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.grid.len()
    }

    pub fn n_cols(&self) -> usize {
        self.grid.first().map_or(0, Vec::len)
    }

    /// Number of cells in the grid.
    pub fn cell_count(&self) -> usize {
        self.n_rows() * self.n_cols()
    }
}

/// A node of a header tree. The root is an unlabeled sentinel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeaderTreeNode {
    pub label: String,
    pub children: Vec<HeaderTreeNode>,
    pub leaf_position: Option<usize>,
}

impl HeaderTreeNode {
    pub fn root(children: Vec<HeaderTreeNode>) -> Self {
        HeaderTreeNode {
            label: String::new(),
            children,
            leaf_position: None,
        }
    }

    pub fn leaf(label: impl Into<String>, position: usize) -> Self {
        HeaderTreeNode {
            label: label.into(),
            children: Vec::new(),
            leaf_position: Some(position),
        }
    }

    pub fn branch(label: impl Into<String>, children: Vec<HeaderTreeNode>) -> Self {
        HeaderTreeNode {
            label: label.into(),
            children,
            leaf_position: None,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn leaf_count(&self) -> usize {
        if self.is_leaf() {
            1
        } else {
            self.children.iter().map(HeaderTreeNode::leaf_count).sum()
        }
    }

    /// Number of labeled levels below this node (0 for a leaf).
    pub fn height(&self) -> usize {
        self.children
            .iter()
            .map(|c| 1 + c.height())
            .max()
            .unwrap_or(0)
    }

    /// Rewrites leaf positions as 0, 1, 2, ... in preorder.
    pub fn renumber_leaves(&mut self) {
        fn walk(node: &mut HeaderTreeNode, next: &mut usize) {
            if node.children.is_empty() {
                node.leaf_position = Some(*next);
                *next += 1;
            } else {
                node.leaf_position = None;
                for child in &mut node.children {
                    walk(child, next);
                }
            }
        }
        let mut next = 0;
        for child in &mut self.children {
            walk(child, &mut next);
        }
    }

    /// True when exactly the leaves carry positions, numbered 0.. in preorder.
    pub fn leaf_positions_consistent(&self) -> bool {
        fn walk(node: &HeaderTreeNode, next: &mut usize) -> bool {
            if node.children.is_empty() {
                let ok = node.leaf_position == Some(*next);
                *next += 1;
                ok
            } else {
                node.leaf_position.is_none() && node.children.iter().all(|c| walk(c, next))
            }
        }
        let mut next = 0;
        self.leaf_position.is_none() && self.children.iter().all(|c| walk(c, &mut next))
    }
}

/// The intermediate `(top tree, left tree, values)` representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiDimensionalTree {
    pub top: HeaderTreeNode,
    pub left: HeaderTreeNode,
    pub values: Vec<Vec<Cell>>,
}

impl BiDimensionalTree {
    pub fn n_rows(&self) -> usize {
        self.values.len()
    }

    pub fn n_cols(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    // Empty trees have no leaves but still count one "leaf" (the root itself),
    // so the zero-sized case is handled separately.
    pub fn is_consistent(&self) -> bool {
        let top_leaves = if self.top.children.is_empty() {
            0
        } else {
            self.top.leaf_count()
        };
        let left_leaves = if self.left.children.is_empty() {
            0
        } else {
            self.left.leaf_count()
        };
        left_leaves == self.values.len()
            && self.values.iter().all(|r| r.len() == top_leaves)
            && (top_leaves > 0 || self.values.is_empty() || self.n_cols() == 0)
    }
}

/// A root-to-leaf header path.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IndexTuple {
    labels: Vec<String>,
}

impl IndexTuple {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self, TableError> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(TableError::EmptyTuple);
        }
        Ok(IndexTuple { labels })
    }

    pub fn single(label: impl Into<String>) -> Self {
        IndexTuple {
            labels: vec![label.into()],
        }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn depth(&self) -> usize {
        self.labels.len()
    }

    pub fn starts_with<S: AsRef<str>>(&self, prefix: &[S]) -> bool {
        prefix.len() <= self.labels.len()
            && prefix
                .iter()
                .zip(&self.labels)
                .all(|(p, l)| p.as_ref() == l)
    }

    pub fn get(&self, level: usize) -> Option<&str> {
        self.labels.get(level).map(String::as_str)
    }
}

impl fmt::Display for IndexTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.labels.join(", "))
    }
}

/// The unified table representation: tuple-labeled rows and columns over a value grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiIndexTable {
    pub name: String,
    row_index: Vec<IndexTuple>,
    col_index: Vec<IndexTuple>,
    values: Vec<Vec<Cell>>,
}

impl MultiIndexTable {
    pub fn new(
        name: impl Into<String>,
        row_index: Vec<IndexTuple>,
        col_index: Vec<IndexTuple>,
        values: Vec<Vec<Cell>>,
    ) -> Result<Self, TableError> {
        if row_index.len() != values.len() {
            return Err(TableError::IndexLength {
                axis: "row",
                labels: row_index.len(),
                values: values.len(),
            });
        }
        for row in &values {
            if row.len() != col_index.len() {
                return Err(TableError::IndexLength {
                    axis: "column",
                    labels: col_index.len(),
                    values: row.len(),
                });
            }
        }
        if !uniform_depth(&row_index) {
            return Err(TableError::MixedDepth { axis: "row" });
        }
        if !uniform_depth(&col_index) {
            return Err(TableError::MixedDepth { axis: "column" });
        }
        Ok(MultiIndexTable {
            name: name.into(),
            row_index,
            col_index,
            values,
        })
    }

    pub fn row_index(&self) -> &[IndexTuple] {
        &self.row_index
    }

    pub fn col_index(&self) -> &[IndexTuple] {
        &self.col_index
    }

    pub fn values(&self) -> &[Vec<Cell>] {
        &self.values
    }

    pub fn n_rows(&self) -> usize {
        self.row_index.len()
    }

    pub fn n_cols(&self) -> usize {
        self.col_index.len()
    }

    pub fn row_depth(&self) -> usize {
        self.row_index.first().map_or(0, IndexTuple::depth)
    }

    pub fn col_depth(&self) -> usize {
        self.col_index.first().map_or(0, IndexTuple::depth)
    }

    pub fn cell(&self, row: usize, col: usize) -> Option<&Cell> {
        self.values.get(row).and_then(|r| r.get(col))
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// True when the row index is the synthesized positional one (`row_0`, `row_1`, ...).
    pub fn has_positional_rows(&self) -> bool {
        self.row_depth() == 1
            && self
                .row_index
                .iter()
                .enumerate()
                .all(|(i, t)| t.labels[0] == positional_label("row", i))
    }
}

pub(crate) fn positional_label(axis: &str, offset: usize) -> String {
    format!("{axis}_{offset}")
}

fn uniform_depth(index: &[IndexTuple]) -> bool {
    index.windows(2).all(|w| w[0].depth() == w[1].depth())
}

/// An ordered collection of uniquely named tables.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TableSet {
    tables: Vec<MultiIndexTable>,
}

impl TableSet {
    pub fn new(tables: Vec<MultiIndexTable>) -> Result<Self, TableError> {
        let mut set = TableSet::default();
        for t in tables {
            set.push(t)?;
        }
        Ok(set)
    }

    pub fn push(&mut self, table: MultiIndexTable) -> Result<(), TableError> {
        if table.name.is_empty() {
            return Err(TableError::EmptyName);
        }
        if self.get(&table.name).is_some() {
            return Err(TableError::DuplicateName(table.name));
        }
        self.tables.push(table);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&MultiIndexTable> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn tables(&self) -> &[MultiIndexTable] {
        &self.tables
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &MultiIndexTable> {
        self.tables.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ragged_grid_rejected() {
        let err = RawTable::from_strings("t", &[vec!["a", "b"], vec!["c"]], 1, 0).unwrap_err();
        assert!(matches!(err, TableError::Ragged { row: 1, .. }));
    }

    #[test]
    fn header_bounds_checked() {
        assert!(RawTable::from_strings("t", &[vec!["a"]], 2, 0).is_err());
        assert!(RawTable::from_strings("t", &[vec!["a"]], 1, 2).is_err());
        assert!(RawTable::from_strings("t", &[vec!["a"]], 1, 0).is_ok());
    }

    #[test]
    fn mixed_depth_index_rejected() {
        let rows = vec![IndexTuple::single("a"), IndexTuple::new(["b", "c"]).unwrap()];
        let cols = vec![IndexTuple::single("x")];
        let values = vec![vec![Cell::parse("1")], vec![Cell::parse("2")]];
        assert_eq!(
            MultiIndexTable::new("t", rows, cols, values).unwrap_err(),
            TableError::MixedDepth { axis: "row" }
        );
    }

    #[test]
    fn table_set_rejects_duplicates() {
        let t = MultiIndexTable::new("a", vec![], vec![], vec![]).unwrap();
        let err = TableSet::new(vec![t.clone(), t]).unwrap_err();
        assert_eq!(err, TableError::DuplicateName("a".into()));
    }

    #[test]
    fn tuple_display_and_prefix() {
        let t = IndexTuple::new(["Illness", "Cold", "total"]).unwrap();
        assert_eq!(t.to_string(), "(Illness, Cold, total)");
        assert!(t.starts_with(&["Illness", "Cold"]));
        assert!(!t.starts_with(&["Cold"]));
        assert!(IndexTuple::new(Vec::<String>::new()).is_err());
    }

    #[test]
    fn renumbering_gives_preorder_positions() {
        let mut root = HeaderTreeNode::root(vec![
            HeaderTreeNode::branch("a", vec![HeaderTreeNode::leaf("x", 9), HeaderTreeNode::leaf("y", 9)]),
            HeaderTreeNode::leaf("b", 9),
        ]);
        assert!(!root.leaf_positions_consistent());
        root.renumber_leaves();
        assert!(root.leaf_positions_consistent());
        assert_eq!(root.leaf_count(), 3);
        assert_eq!(root.height(), 2);
    }
}
