// SPDX-License-Identifier: Apache-2.0

//! Multi-index parsing.
//!
//! A raw grid is first split into a top header band, a left header band and
//! the value body. Each band becomes a header tree: a non-blank cell at level
//! `d` opens a node under the node covering its column at level `d - 1`.
//! Repeated text and blank cells to the right of a node extend that node's
//! span (both conventions for merged cells occur in source data). A blank
//! cell that starts a single-column span ends the path early, making the
//! parent a leaf. Root-to-leaf paths, read in preorder, become the index
//! tuples.

use thiserror::Error;

use crate::table::{
    positional_label, BiDimensionalTree, Cell, HeaderTreeNode, IndexTuple, MultiIndexTable,
    RawTable, TableError, TableSet,
};

/// Joiner used when header paths are collapsed into one label.
pub const DEFAULT_SEPARATOR: &str = " | ";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("{axis} header cell at level {level}, offset {offset} has no covering parent span")]
    Structure {
        axis: &'static str,
        level: usize,
        offset: usize,
    },
    #[error(transparent)]
    Table(#[from] TableError),
}

#[derive(Clone, Copy)]
enum Axis {
    Top,
    Left,
}

impl Axis {
    fn name(self) -> &'static str {
        match self {
            Axis::Top => "top",
            Axis::Left => "left",
        }
    }

    fn synth_prefix(self) -> &'static str {
        match self {
            Axis::Top => "col",
            Axis::Left => "row",
        }
    }
}

/// Header band laid out as `levels x positions`, already trimmed.
struct Band {
    levels: Vec<Vec<String>>,
    positions: usize,
    axis: Axis,
}

impl Band {
    fn top(raw: &RawTable) -> Self {
        let left = raw.left_header_width;
        let levels = raw.grid[..raw.top_header_depth]
            .iter()
            .map(|row| row[left..].iter().map(|c| c.text().to_string()).collect())
            .collect();
        Band {
            levels,
            positions: raw.n_cols() - left,
            axis: Axis::Top,
        }
    }

    fn left(raw: &RawTable) -> Self {
        let body = &raw.grid[raw.top_header_depth..];
        let levels = (0..raw.left_header_width)
            .map(|c| body.iter().map(|row| row[c].text().to_string()).collect())
            .collect();
        Band {
            levels,
            positions: body.len(),
            axis: Axis::Left,
        }
    }

    fn text(&self, level: usize, pos: usize) -> &str {
        &self.levels[level][pos]
    }

    fn synth(&self, pos: usize) -> String {
        positional_label(self.axis.synth_prefix(), pos)
    }

    fn into_tree(self) -> Result<HeaderTreeNode, ParseError> {
        let children = if self.levels.is_empty() {
            (0..self.positions)
                .map(|p| HeaderTreeNode::leaf(self.synth(p), p))
                .collect()
        } else {
            self.build_level(0, 0, self.positions)?
        };
        let mut root = HeaderTreeNode::root(children);
        root.renumber_leaves();
        Ok(root)
    }

    fn build_level(
        &self,
        level: usize,
        lo: usize,
        hi: usize,
    ) -> Result<Vec<HeaderTreeNode>, ParseError> {
        let last = level + 1 == self.levels.len();
        // (label, start, end) spans at this level within lo..hi
        let mut spans: Vec<(String, usize, usize)> = Vec::new();
        for pos in lo..hi {
            let text = self.text(level, pos);
            if text.is_empty() {
                if let (Some(cur), false) = (spans.last_mut(), last) {
                    cur.2 = pos + 1;
                    continue;
                }
                if spans.is_empty() && level > 0 && hi - lo == 1 {
                    if let Some(deeper) = (level + 1..self.levels.len())
                        .find(|&d| !self.text(d, pos).is_empty())
                    {
                        return Err(ParseError::Structure {
                            axis: self.axis.name(),
                            level: deeper,
                            offset: pos,
                        });
                    }
                    return Ok(Vec::new());
                }
                spans.push((self.synth(pos), pos, pos + 1));
            } else {
                if let Some(cur) = spans.last_mut() {
                    if !last && cur.0 == text && cur.2 == pos {
                        cur.2 = pos + 1;
                        continue;
                    }
                }
                spans.push((text.to_string(), pos, pos + 1));
            }
        }
        let mut nodes = Vec::with_capacity(spans.len());
        for (label, start, end) in spans {
            let children = if last {
                Vec::new()
            } else {
                self.build_level(level + 1, start, end)?
            };
            if children.is_empty() {
                debug_assert_eq!(end - start, 1);
                nodes.push(HeaderTreeNode::leaf(label, start));
            } else {
                nodes.push(HeaderTreeNode::branch(label, children));
            }
        }
        Ok(nodes)
    }
}

/// Splits a raw table into top tree, left tree and value body.
pub fn build_bidim_tree(raw: &RawTable) -> Result<BiDimensionalTree, ParseError> {
    raw.validate()?;
    let top = Band::top(raw).into_tree()?;
    let left = Band::left(raw).into_tree()?;
    let values = raw.grid[raw.top_header_depth..]
        .iter()
        .map(|row| row[raw.left_header_width..].to_vec())
        .collect();
    Ok(BiDimensionalTree { top, left, values })
}

/// Root-to-leaf label paths in preorder, padded to a uniform depth by
/// repeating each path's leaf label. The root sentinel is never included.
pub fn enumerate_paths(root: &HeaderTreeNode) -> Vec<IndexTuple> {
    let paths = raw_paths(root);
    let depth = paths.iter().map(Vec::len).max().unwrap_or(0);
    paths
        .into_iter()
        .map(|mut p| {
            let leaf = p.last().cloned().unwrap_or_default();
            p.resize(depth, leaf);
            IndexTuple::new(p).expect("non-root paths are non-empty")
        })
        .collect()
}

// Explicit-stack preorder walk; each frame carries the path to its node.
fn raw_paths(root: &HeaderTreeNode) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    let mut stack: Vec<(&HeaderTreeNode, Vec<String>)> = root
        .children
        .iter()
        .rev()
        .map(|c| (c, Vec::new()))
        .collect();
    while let Some((node, mut path)) = stack.pop() {
        path.push(node.label.clone());
        if node.is_leaf() {
            out.push(path);
        } else {
            for child in node.children.iter().rev() {
                stack.push((child, path.clone()));
            }
        }
    }
    out
}

pub fn parse_to_multiindex(
    tree: &BiDimensionalTree,
    name: impl Into<String>,
) -> Result<MultiIndexTable, ParseError> {
    let col_index = enumerate_paths(&tree.top);
    let row_index = enumerate_paths(&tree.left);
    Ok(MultiIndexTable::new(
        name,
        row_index,
        col_index,
        tree.values.clone(),
    )?)
}

/// `build_bidim_tree` followed by `parse_to_multiindex`, keeping the raw name.
pub fn parse_table(raw: &RawTable) -> Result<MultiIndexTable, ParseError> {
    parse_to_multiindex(&build_bidim_tree(raw)?, raw.name.clone())
}

/// Collapses the top header hierarchy into single labels joined by
/// `separator`. Left header columns stay in the body as ordinary cells and
/// rows get positional labels.
pub fn flatten_headers(raw: &RawTable, separator: &str) -> Result<MultiIndexTable, ParseError> {
    raw.validate()?;
    let top = Band::top(raw).into_tree()?;
    let left = raw.left_header_width;
    let mut col_index: Vec<IndexTuple> = (0..left)
        .map(|c| {
            let words: Vec<&str> = raw.grid[..raw.top_header_depth]
                .iter()
                .map(|row| row[c].text())
                .filter(|t| !t.is_empty())
                .collect();
            if words.is_empty() {
                IndexTuple::single(positional_label("index", c))
            } else {
                IndexTuple::single(words.join(separator))
            }
        })
        .collect();
    col_index.extend(
        raw_paths(&top)
            .into_iter()
            .map(|p| IndexTuple::single(p.join(separator))),
    );
    let values: Vec<Vec<Cell>> = raw.grid[raw.top_header_depth..].to_vec();
    let row_index = (0..values.len())
        .map(|i| IndexTuple::single(positional_label("row", i)))
        .collect();
    Ok(MultiIndexTable::new(
        raw.name.clone(),
        row_index,
        col_index,
        values,
    )?)
}

/// Parses every table independently, preserving order.
pub fn parse_tables(raws: &[RawTable]) -> Result<TableSet, ParseError> {
    let mut set = TableSet::default();
    for raw in raws {
        if set.get(&raw.name).is_some() {
            return Err(TableError::DuplicateName(raw.name.clone()).into());
        }
        set.push(parse_table(raw)?)?;
    }
    Ok(set)
}

/// Like [`parse_tables`] but with flattened top headers.
pub fn flatten_tables(raws: &[RawTable], separator: &str) -> Result<TableSet, ParseError> {
    let mut set = TableSet::default();
    for raw in raws {
        if set.get(&raw.name).is_some() {
            return Err(TableError::DuplicateName(raw.name.clone()).into());
        }
        set.push(flatten_headers(raw, separator)?)?;
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::{select, to_grid, AxisSpec};

    fn labels(t: &[IndexTuple]) -> Vec<Vec<&str>> {
        t.iter()
            .map(|x| x.labels().iter().map(String::as_str).collect())
            .collect()
    }

    #[test]
    fn merged_blanks_and_repeats_build_the_same_tree() {
        let repeated = RawTable::from_strings(
            "t",
            &[
                vec!["", "A", "A", "B"],
                vec!["", "x", "y", "z"],
                vec!["r", "1", "2", "3"],
            ],
            2,
            1,
        )
        .unwrap();
        let blanks = RawTable::from_strings(
            "t",
            &[
                vec!["", "A", "", "B"],
                vec!["", "x", "y", "z"],
                vec!["r", "1", "2", "3"],
            ],
            2,
            1,
        )
        .unwrap();
        let a = build_bidim_tree(&repeated).unwrap();
        let b = build_bidim_tree(&blanks).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            labels(&enumerate_paths(&a.top)),
            vec![vec!["A", "x"], vec!["A", "y"], vec!["B", "z"]]
        );
    }

    #[test]
    fn vertical_merge_makes_a_shallow_leaf_padded_in_tuples() {
        let raw = RawTable::from_strings(
            "t",
            &[
                vec!["", "Total", "A", "A"],
                vec!["", "", "x", "y"],
                vec!["r", "1", "2", "3"],
            ],
            2,
            1,
        )
        .unwrap();
        let b = build_bidim_tree(&raw).unwrap();
        assert_eq!(b.top.children[0].label, "Total");
        assert!(b.top.children[0].is_leaf());
        assert_eq!(
            labels(&enumerate_paths(&b.top)),
            vec![vec!["Total", "Total"], vec!["A", "x"], vec!["A", "y"]]
        );
    }

    #[test]
    fn deeper_label_under_blank_is_a_structure_error() {
        let raw = RawTable::from_strings(
            "t",
            &[
                vec!["", "A", "B"],
                vec!["", "x", ""],
                vec!["", "p", "q"],
                vec!["r", "1", "2"],
            ],
            3,
            1,
        )
        .unwrap();
        assert_eq!(
            build_bidim_tree(&raw).unwrap_err(),
            ParseError::Structure {
                axis: "top",
                level: 2,
                offset: 1
            }
        );
    }

    #[test]
    fn empty_header_cells_get_positional_labels() {
        let raw = RawTable::from_strings("t", &[vec!["a", "", "c"], vec!["1", "2", "3"]], 1, 0).unwrap();
        let m = parse_table(&raw).unwrap();
        assert_eq!(labels(m.col_index()), vec![vec!["a"], vec!["col_1"], vec!["c"]]);
        assert_eq!(labels(m.row_index()), vec![vec!["row_0"]]);
        assert!(m.has_positional_rows());
    }

    #[test]
    fn flat_table_gives_single_layer_trees() {
        let raw = RawTable::from_strings(
            "t",
            &[vec!["x", "y", "z"], vec!["1", "2", "3"], vec!["4", "5", "6"]],
            1,
            0,
        )
        .unwrap();
        let b = build_bidim_tree(&raw).unwrap();
        assert_eq!(b.top.height(), 1);
        assert_eq!(b.top.leaf_count(), 3);
        assert_eq!(b.left.leaf_count(), 2);
        let m = parse_to_multiindex(&b, "t").unwrap();
        assert_eq!(labels(m.row_index()), vec![vec!["row_0"], vec!["row_1"]]);
    }

    #[test]
    fn three_leaf_tree_paths() {
        let root = HeaderTreeNode::root(vec![HeaderTreeNode::branch(
            "a",
            vec![
                HeaderTreeNode::leaf("x", 0),
                HeaderTreeNode::leaf("y", 1),
                HeaderTreeNode::leaf("z", 2),
            ],
        )]);
        assert_eq!(
            labels(&enumerate_paths(&root)),
            vec![vec!["a", "x"], vec!["a", "y"], vec!["a", "z"]]
        );
    }

    #[test]
    fn sibling_swap_swaps_tuple_blocks() {
        let a = HeaderTreeNode::branch("a", vec![HeaderTreeNode::leaf("x", 0), HeaderTreeNode::leaf("y", 0)]);
        let b = HeaderTreeNode::branch("b", vec![HeaderTreeNode::leaf("z", 0)]);
        let p1 = enumerate_paths(&HeaderTreeNode::root(vec![a.clone(), b.clone()]));
        let p2 = enumerate_paths(&HeaderTreeNode::root(vec![b, a]));
        assert_eq!(p1[..2], p2[1..]);
        assert_eq!(p1[2..], p2[..1]);
    }

    #[test]
    fn flatten_depth_one_is_identity_on_labels() {
        let raw = RawTable::from_strings("t", &[vec!["Year", "Team"], vec!["2001", "X"]], 1, 0).unwrap();
        let flat = flatten_headers(&raw, "|").unwrap();
        let multi = parse_table(&raw).unwrap();
        assert_eq!(flat.col_index(), multi.col_index());
    }

    #[test]
    fn flatten_keeps_left_headers_as_cells() {
        let raw = RawTable::from_strings(
            "t",
            &[
                vec!["Sex", "Illness", "Illness"],
                vec!["", "Cold", "Fever"],
                vec!["Male", "1", "2"],
            ],
            2,
            1,
        )
        .unwrap();
        let flat = flatten_headers(&raw, "|").unwrap();
        assert_eq!(labels(flat.col_index()), vec![vec!["Sex"], vec!["Illness|Cold"], vec!["Illness|Fever"]]);
        assert_eq!(flat.cell(0, 0).unwrap().raw, "Male");
    }

    #[test]
    fn duplicate_names_rejected() {
        let raw = RawTable::from_strings("t", &[vec!["a"], vec!["1"]], 1, 0).unwrap();
        assert!(matches!(
            parse_tables(&[raw.clone(), raw]).unwrap_err(),
            ParseError::Table(TableError::DuplicateName(_))
        ));
        assert!(parse_tables(&[]).unwrap().is_empty());
    }

    #[test]
    fn header_only_grid_parses_to_empty_body() {
        let raw = RawTable::from_strings("t", &[vec!["a", "b"]], 1, 0).unwrap();
        let m = parse_table(&raw).unwrap();
        assert_eq!((m.n_rows(), m.n_cols()), (0, 2));
    }

    #[test]
    fn round_trip_small_hierarchy() {
        let rows = vec![
            vec!["", "", "A", "A", "B"],
            vec!["", "", "x", "y", "B"],
            vec!["g", "m", "1", "2", "3"],
            vec!["g", "n", "4", "5", "6"],
            vec!["h", "h", "7", "8", "9"],
        ];
        let raw = RawTable::from_strings("t", &rows, 2, 2).unwrap();
        let m = parse_table(&raw).unwrap();
        assert_eq!(to_grid(&m), raw);
        let one = select(&m, &AxisSpec::prefix(["g", "n"]), &AxisSpec::prefix(["A", "y"])).unwrap();
        assert_eq!(one.cell(0, 0).unwrap().raw, "5");
    }
}
