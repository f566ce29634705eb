// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use super::{Cell, IndexTuple, MultiIndexTable, RawTable, TableError};

/// Selection along one axis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisSpec {
    /// Every entry.
    All,
    /// Entries whose tuple begins with these labels.
    Prefix(Vec<String>),
    /// Entries matching any of the given prefixes, kept in table order.
    AnyOf(Vec<Vec<String>>),
}

impl AxisSpec {
    pub fn prefix<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Self {
        AxisSpec::Prefix(labels.into_iter().map(Into::into).collect())
    }

    pub fn matches(&self, tuple: &IndexTuple) -> bool {
        match self {
            AxisSpec::All => true,
            AxisSpec::Prefix(p) => tuple.starts_with(p),
            AxisSpec::AnyOf(ps) => ps.iter().any(|p| tuple.starts_with(p)),
        }
    }
}

fn positions(index: &[IndexTuple], spec: &AxisSpec) -> Vec<usize> {
    index
        .iter()
        .enumerate()
        .filter(|(_, t)| spec.matches(t))
        .map(|(i, _)| i)
        .collect()
}

/// Label-based selection with prefix matching on both axes.
///
/// Order is preserved and duplicate tuples are all returned.
pub fn select(
    table: &MultiIndexTable,
    rows: &AxisSpec,
    cols: &AxisSpec,
) -> Result<MultiIndexTable, TableError> {
    let row_pos = positions(table.row_index(), rows);
    if row_pos.is_empty() && !matches!(rows, AxisSpec::All) {
        return Err(TableError::NoMatch { axis: "row" });
    }
    let col_pos = positions(table.col_index(), cols);
    if col_pos.is_empty() && !matches!(cols, AxisSpec::All) {
        return Err(TableError::NoMatch { axis: "column" });
    }
    take(table, &row_pos, &col_pos)
}

pub(crate) fn take(
    table: &MultiIndexTable,
    row_pos: &[usize],
    col_pos: &[usize],
) -> Result<MultiIndexTable, TableError> {
    let row_index = row_pos.iter().map(|&i| table.row_index()[i].clone()).collect();
    let col_index = col_pos.iter().map(|&j| table.col_index()[j].clone()).collect();
    let values = row_pos
        .iter()
        .map(|&i| col_pos.iter().map(|&j| table.values()[i][j].clone()).collect())
        .collect();
    MultiIndexTable::new(table.name.clone(), row_index, col_index, values)
}

/// First `k` rows (all of them when `k` exceeds the row count).
pub fn head_rows(table: &MultiIndexTable, k: usize) -> MultiIndexTable {
    let rows: Vec<usize> = (0..table.n_rows().min(k)).collect();
    let cols: Vec<usize> = (0..table.n_cols()).collect();
    take(table, &rows, &cols).expect("sub-table of a valid table is valid")
}

/// Reconstructs a grid: column tuples become header rows, row tuples become
/// left header columns, and the corner block is left blank.
pub fn to_grid(table: &MultiIndexTable) -> RawTable {
    let top = table.col_depth().max(1);
    let left = table.row_depth().max(1);
    let mut grid = Vec::with_capacity(top + table.n_rows());
    for level in 0..top {
        let mut row = vec![Cell::empty(); left];
        row.extend(
            table
                .col_index()
                .iter()
                .map(|t| Cell::parse(t.get(level).unwrap_or(""))),
        );
        grid.push(row);
    }
    for (tuple, values) in table.row_index().iter().zip(table.values()) {
        let mut row: Vec<Cell> = (0..left)
            .map(|level| Cell::parse(tuple.get(level).unwrap_or("")))
            .collect();
        row.extend(values.iter().cloned());
        grid.push(row);
    }
    RawTable::new(table.name.clone(), grid, top, left).expect("reconstructed grid is rectangular")
}
