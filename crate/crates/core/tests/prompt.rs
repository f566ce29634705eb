// SPDX-License-Identifier: Apache-2.0

mod common;

use rand::prelude::*;
use rand::rngs::StdRng;
use tabqa::apis::ApiRegistry;
use tabqa::datasets::DatasetKind;
use tabqa::executor::{Dialect, ExecutionLimits, Executor};
use tabqa::gateway::{Gateway, ScriptedModel};
use tabqa::parser::parse_table;
use tabqa::prompt::{
    build_prompt, serialize_table, truncate_cell, ExemplarSet, PromptConfig, MAX_CELL_CHARS, QUESTION_MARKER,
};
use tabqa::gateway::ScriptRule;
use tabqa::table::{Cell, IndexTuple, MultiIndexTable, TableSet};

fn gateway() -> Gateway {
    Gateway::new(std::sync::Arc::new(ScriptedModel::new(vec![])))
}

#[test]
fn serialized_line_count_follows_table_shape() {
    let mut rng = StdRng::seed_from_u64(11);
    for i in 0..30 {
        let (raw, _, _) = common::random_raw(&mut rng, &format!("t{i}"));
        let m = parse_table(&raw).unwrap();
        let k = rng.gen_range(1..6);
        let text = serialize_table(&m, k);
        let expected = 4 + m.n_cols() + m.n_rows() + k.min(m.n_rows());
        assert_eq!(text.lines().count(), expected, "table {i}");
        for t in m.col_index() {
            assert!(text.contains(&t.to_string()));
        }
    }
}

#[test]
fn every_table_appears_once_in_the_task_block() {
    let a = parse_table(&tabqa::table::RawTable::from_strings("singer", &[vec!["Name"], vec!["Joe"]], 1, 0).unwrap()).unwrap();
    let b = parse_table(
        &tabqa::table::RawTable::from_strings("concert", &[vec!["Year"], vec!["2014"]], 1, 0).unwrap(),
    )
    .unwrap();
    let tables = TableSet::new(vec![a, b]).unwrap();
    for dialect in [Dialect::Host, Dialect::Sql] {
        let cfg = PromptConfig::for_dataset(DatasetKind::Spider, dialect);
        let p = build_prompt("how many singers are there?", &tables, &cfg).unwrap();
        let task = &p[p.rfind("### Task").unwrap()..];
        assert_eq!(task.matches("table: singer").count(), 1);
        assert_eq!(task.matches("table: concert").count(), 1);
        assert!(p.trim_end().ends_with("# Program:"));
        assert_eq!(p.matches(QUESTION_MARKER).count(), cfg.n_shots + 1);
    }
}

#[test]
fn quotas_and_shortage() {
    assert_eq!(ExemplarSet::quotas(5), (2, 2, 1));
    assert_eq!(ExemplarSet::quotas(8), (3, 3, 2));
    let set = ExemplarSet::builtin(DatasetKind::Hitab, Dialect::Host);
    assert_eq!(set.select(5).unwrap().len(), 5);
    assert!(set.select(set.len() + 1).is_err());
}

#[test]
fn api_instructions_follow_the_registry() {
    let reg = ApiRegistry::standard(gateway());
    let cfg = PromptConfig::for_dataset(DatasetKind::Hitab, Dialect::Host).with_apis(&reg);
    let m = parse_table(&tabqa::cli::load_table_file(&common::fixtures().join("tables/illness.json"), 0, 0).unwrap()).unwrap();
    let tables = TableSet::new(vec![m]).unwrap();
    let p = build_prompt("q?", &tables, &cfg).unwrap();
    for name in ["compare_larger", "compare_smaller", "qa("] {
        assert!(p.contains(name), "{name}");
    }
    let no_qa = cfg.clone().without_family(tabqa::apis::ApiFamily::Qa);
    let p = build_prompt("q?", &tables, &no_qa).unwrap();
    assert!(!p.contains("qa("));
}

#[test]
fn long_cells_are_truncated() {
    let long = "x".repeat(100);
    assert!(truncate_cell(&long).chars().count() <= MAX_CELL_CHARS + 3);
    assert_eq!(truncate_cell("short"), "short");
}

fn tuple(line: &str) -> IndexTuple {
    let inner = line.trim().trim_start_matches('(').trim_end_matches(')');
    IndexTuple::new(inner.split(", ")).unwrap()
}

/// Rebuilds a table from a host-dialect snippet whose preview shows every row.
fn snippet_table(snippet: &str) -> Option<MultiIndexTable> {
    let lines: Vec<&str> = snippet.lines().collect();
    let name = lines[0].strip_prefix("table: ")?;
    let n_cols: usize = lines[1].strip_prefix("columns (")?.split(',').next()?.parse().ok()?;
    let cols: Vec<IndexTuple> = lines[2..2 + n_cols].iter().map(|l| tuple(l)).collect();
    let row_hdr = lines[2 + n_cols];
    let n_rows: usize = row_hdr.strip_prefix("rows (")?.split(',').next()?.parse().ok()?;
    let rows: Vec<IndexTuple> = lines[3 + n_cols..3 + n_cols + n_rows].iter().map(|l| tuple(l)).collect();
    let preview = &lines[4 + n_cols + n_rows..];
    if preview.len() != n_rows {
        return None;
    }
    let values = preview
        .iter()
        .map(|l| l.split(" | ").skip(1).map(Cell::parse).collect())
        .collect();
    Some(MultiIndexTable::new(name, rows, cols, values).unwrap())
}

#[test]
fn builtin_exemplars_parse_and_are_consistent() {
    for ds in DatasetKind::ALL {
        for dialect in [Dialect::Host, Dialect::Sql] {
            let set = ExemplarSet::builtin(ds, dialect);
            assert!(set.len() >= ds.default_shots(), "{ds} {dialect}");
            assert!(set.exemplars.iter().all(|e| e.is_consistent()));
        }
    }
}

#[test]
fn host_exemplar_programs_run_on_their_snippets() {
    let yes = ScriptedModel::new(vec![ScriptRule::new("Answer", vec![("yes", vec![-0.1])])]);
    let exec = Executor::new(
        ApiRegistry::standard(Gateway::new(std::sync::Arc::new(yes))),
        ExecutionLimits::default(),
    );
    let mut ran = 0;
    for ds in DatasetKind::ALL {
        for ex in &ExemplarSet::builtin(ds, Dialect::Host).exemplars {
            let Some(t) = snippet_table(&ex.table_snippet) else { continue };
            let tables = TableSet::new(vec![t]).unwrap();
            let r = exec.execute(Dialect::Host, &ex.program, &tables);
            assert!(r.is_ok() || ex.uses_api.qa, "{ds}: `{}` gave {:?}", ex.question, r.error_detail);
            ran += 1;
        }
    }
    assert!(ran >= 20, "only {ran} snippets were complete");
}
