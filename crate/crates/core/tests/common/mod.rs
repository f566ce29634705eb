// SPDX-License-Identifier: Apache-2.0
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use rand::prelude::*;
use tabqa::table::{HeaderTreeNode, RawTable};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

const WORDS: &[&str] = &[
    "Illness", "Cold", "Fever", "total", "percent", "Male", "Female", "2019", "2020", "Prairies",
    "Atlantic", "count", "share", "north", "south", "east", "west", "A", "B", "C",
];

/// Header tree with leaves at depth at most `max_depth` and at most `max_leaves` leaves.
/// Sibling labels are distinct. Leaf positions are left at zero.
pub fn random_tree(rng: &mut impl Rng, max_depth: usize, max_leaves: usize) -> HeaderTreeNode {
    let mut budget = rng.gen_range(1..=max_leaves);
    let children = grow(rng, max_depth, &mut budget, true);
    HeaderTreeNode::root(children)
}

fn grow(rng: &mut impl Rng, depth_left: usize, budget: &mut usize, must: bool) -> Vec<HeaderTreeNode> {
    let mut out: Vec<HeaderTreeNode> = Vec::new();
    let want = rng.gen_range(1..=4);
    let mut used: Vec<String> = Vec::new();
    while out.len() < want && *budget > 0 {
        let label = loop {
            let w = WORDS[rng.gen_range(0..WORDS.len())].to_string();
            let w = if rng.gen_bool(0.3) { format!("{w} {}", rng.gen_range(0..9)) } else { w };
            if !used.contains(&w) {
                break w;
            }
        };
        used.push(label.clone());
        if depth_left > 1 && *budget > 1 && rng.gen_bool(0.6) {
            let kids = grow(rng, depth_left - 1, budget, false);
            if kids.is_empty() {
                *budget -= 1;
                out.push(HeaderTreeNode::leaf(label, 0));
            } else {
                out.push(HeaderTreeNode::branch(label, kids));
            }
        } else {
            *budget -= 1;
            out.push(HeaderTreeNode::leaf(label, 0));
        }
    }
    if must && out.is_empty() {
        out.push(HeaderTreeNode::leaf("only", 0));
    }
    out
}

/// Recursive DFS oracle: root-to-leaf label paths in preorder, each padded to
/// the tree height with its own leaf label.
pub fn dfs_paths(root: &HeaderTreeNode) -> Vec<Vec<String>> {
    fn walk(n: &HeaderTreeNode, path: &mut Vec<String>, out: &mut Vec<Vec<String>>) {
        path.push(n.label.clone());
        if n.children.is_empty() {
            out.push(path.clone());
        } else {
            for c in &n.children {
                walk(c, path, out);
            }
        }
        path.pop();
    }
    let mut out = Vec::new();
    for c in &root.children {
        walk(c, &mut Vec::new(), &mut out);
    }
    let h = out.iter().map(Vec::len).max().unwrap_or(0);
    for p in &mut out {
        let leaf = p.last().cloned().unwrap();
        p.resize(h, leaf);
    }
    out
}

/// Header band `levels x leaves` for a tree: every cell carries its full
/// ancestor label, shallow leaves repeat downwards.
pub fn render_band(root: &HeaderTreeNode) -> Vec<Vec<String>> {
    let paths = dfs_paths(root);
    let h = paths.first().map_or(0, Vec::len);
    (0..h).map(|lvl| paths.iter().map(|p| p[lvl].clone()).collect()).collect()
}

pub fn random_cell(rng: &mut impl Rng) -> String {
    match rng.gen_range(0..4) {
        0 => rng.gen_range(-500..5000).to_string(),
        1 => format!("{:.1}%", rng.gen_range(0.0..100.0)),
        2 => format!("{},{:03}", rng.gen_range(1..99), rng.gen_range(0..1000)),
        _ => WORDS[rng.gen_range(0..WORDS.len())].to_lowercase(),
    }
}

/// Raw grid with the two trees as header bands and random body cells.
pub fn grid_from_trees(rng: &mut impl Rng, top: &HeaderTreeNode, left: &HeaderTreeNode) -> Vec<Vec<String>> {
    let top_band = render_band(top);
    let left_band = render_band(left);
    let (depth, width) = (top_band.len(), left_band.len());
    let (n_cols, n_rows) = (top_band[0].len(), left_band[0].len());
    let mut grid = Vec::with_capacity(depth + n_rows);
    for row in &top_band {
        let mut r = vec![String::new(); width];
        r.extend(row.iter().cloned());
        grid.push(r);
    }
    for i in 0..n_rows {
        let mut r: Vec<String> = left_band.iter().map(|lvl| lvl[i].clone()).collect();
        r.extend((0..n_cols).map(|_| random_cell(rng)));
        grid.push(r);
    }
    grid
}

pub fn random_raw(rng: &mut impl Rng, name: &str) -> (RawTable, HeaderTreeNode, HeaderTreeNode) {
    let top = random_tree(rng, 3, 12);
    let left = random_tree(rng, 3, 12);
    let grid = grid_from_trees(rng, &top, &left);
    let raw = RawTable::from_strings(name, &grid, render_band(&top).len(), render_band(&left).len())
        .expect("rendered grid is valid");
    (raw, top, left)
}

/// Flat table: one header row of distinct labels and no left header.
pub fn random_flat(rng: &mut impl Rng, name: &str) -> RawTable {
    let n_cols = rng.gen_range(1..=10);
    let header: Vec<String> = (0..n_cols).map(|j| format!("{} {j}", WORDS[rng.gen_range(0..WORDS.len())])).collect();
    let mut grid = vec![header];
    for _ in 0..rng.gen_range(0..=8) {
        grid.push((0..n_cols).map(|_| random_cell(rng)).collect());
    }
    RawTable::from_strings(name, &grid, 1, 0).expect("flat grid is valid")
}

pub fn raw_texts(raw: &RawTable) -> Vec<Vec<String>> {
    raw.grid.iter().map(|r| r.iter().map(|c| c.raw.clone()).collect()).collect()
}
