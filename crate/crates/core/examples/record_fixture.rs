// SPDX-License-Identifier: Apache-2.0

//! Regenerates `fixtures/replay`: the spider database, the completion cache
//! and the expected predictions.
//!
//! ```text
//! cargo run -p tabqa --example record_fixture
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;
use tabqa::datasets::{load, DatasetKind};
use tabqa::eval::{Pipeline, Prediction, RunConfig};
use tabqa::executor::Dialect;
use tabqa::gateway::{CachedModel, Gateway, ScriptRule, ScriptedModel};

#[derive(Deserialize)]
struct Entry {
    dataset: DatasetKind,
    split: Option<String>,
    dialect: Option<Dialect>,
    root: PathBuf,
}

#[derive(Deserialize)]
struct Suite {
    runs: Vec<Entry>,
}

fn rule(question: &str, cands: &[(&str, &[f64])]) -> ScriptRule {
    ScriptRule::new(
        format!("# Question: {question}"),
        cands.iter().map(|(t, lp)| (t.to_string(), lp.to_vec())).collect(),
    )
}

fn yes(label: &str, q: &str) -> ScriptRule {
    ScriptRule::new(format!("Question: {label}{q}\n"), vec![(" yes", vec![-0.02])])
}

fn script() -> ScriptedModel {
    let fever_total = r#"ans = df.loc("Male", ["Illness", "Fever", "total"]).item();"#;
    let cold_vs_fever = "let cold = df.loc(\"Male\", [\"Illness\", \"Cold\", \"total\"]).item();\n\
        let fever = df.loc(\"Male\", [\"Illness\", \"Fever\", \"total\"]).item();\n\
        ans = compare_larger([cold, fever], [\"Cold\", \"Fever\"]);";
    let manitoba = "let places = qa(\"Manitoba?\", df, \"row\", 1);\n\
        let m = df.loc(places, ALL);\n\
        ans = m.loc(ALL, [\"share of immigrants\", \"2011\"]).sum() - m.loc(ALL, [\"share of immigrants\", \"2006\"]).sum();";
    let freight = "let freight = qa(\"Is {} a freight-related revenue?\", df, \"row\", 0);\n\
        ans = df.loc(freight, [\"Year Ended December 31\", \"2017\"]).sum();";
    let largest = r#"ans = compare_larger(df.col("Population").values(), df.col("City").values());"#;
    let big = r#"ans = df.filter("Population", ">", 100000).nrows();"#;
    let corra = "SELECT \"Population\" FROM \"204_csv_1\" WHERE \"City\" = 'Corra'";
    let join = "SELECT T2.Name FROM singer_in_concert AS T1 JOIN singer AS T2 \
        ON T1.Singer_ID = T2.Singer_ID WHERE T1.concert_ID = 2";
    let rules = vec![
        yes("Winnipeg", ": Manitoba?"),
        yes("Rest of Manitoba", ": Manitoba?"),
        yes("Is Cargo", " a freight-related revenue?"),
        yes("Is Mail", " a freight-related revenue?"),
        ScriptRule::new("Answer the question with yes or no.", vec![(" no", vec![-0.05])]),
        rule(
            "which illness had more male cases",
            &[
                (fever_total, &[-0.9, -1.4]),
                (cold_vs_fever, &[-0.5, -0.7, -0.4]),
                (r#"ans = df.loc("Male", ["Illness", "Flu"]).item();"#, &[-3.0]),
                ("let f = open(\"/etc/passwd\");\nans = f;", &[-2.6, -2.6]),
                (cold_vs_fever, &[-2.0, -2.0]),
            ],
        ),
        rule(
            "how much percentage point has Manitoba rose",
            &[
                (manitoba, &[-1.1, -0.8]),
                (
                    "let w = [\"Prairies\", \"Winnipeg\"];\n\
                     ans = df.loc(w, [\"share of immigrants\", \"2011\"]).item() - df.loc(w, [\"share of immigrants\", \"2006\"]).item();",
                    &[-1.3, -1.2],
                ),
                ("let x = 1;", &[-3.3]),
                (r#"ans = df.loc("Manitoba", ALL).sum();"#, &[-4.4]),
                (manitoba, &[-3.0, -3.0]),
            ],
        ),
        rule(
            "what percent of female cases had a fever?",
            &[
                (r#"ans = df.loc("Female", ["Illness", "Fever", "percent"]).item();"#, &[-1.1]),
                (r#"ans = df.loc("Female", ["Illness", "Cold", "percent"]).item();"#, &[-1.8]),
                (r#"ans = df.loc("Female", ["Illness", "Fever", "total"]).item();"#, &[-2.2]),
                (r#"ans = df.loc("Female" ["Illness"]);"#, &[-3.5]),
                (r#"ans = df.loc("Female", ["Illness", "Fever", "percent"]).item();"#, &[-5.0]),
            ],
        ),
        rule(
            "what were total operating revenues in 2018?",
            &[
                (r#"ans = df.loc("Total operating revenue", ["Year Ended December 31", "2018"]).item();"#, &[-0.8]),
                (r#"ans = df.loc("Total operating revenue", ["Year Ended December 31", "2017"]).item();"#, &[-1.5]),
                (r#"ans = df.loc("Total", "2018").item();"#, &[-2.9]),
                ("import os\nans = 1;", &[-4.1]),
                (r#"ans = df.loc("Total operating revenue", ALL).values();"#, &[-5.5]),
            ],
        ),
        rule(
            "what was the combined freight revenue in 2017?",
            &[
                (r#"ans = df.loc("Cargo", ["Year Ended December 31", "2017"]).item();"#, &[-2.2]),
                (freight, &[-0.9, -0.8]),
                (r#"ans = qa("freight?", df);"#, &[-3.0]),
                ("ans = sum(df);", &[-4.0]),
                (freight, &[-3.0, -3.0]),
            ],
        ),
        rule(
            "which city has the largest population?",
            &[
                (largest, &[-1.4]),
                (r#"ans = compare_smaller(df.col("Population").values(), df.col("City").values());"#, &[-2.0]),
                (r#"ans = df.col("Pop").values();"#, &[-2.6]),
                (r#"ans = df.index_by("City").loc(ALL, "Population").max();"#, &[-3.9]),
                (largest, &[-5.0]),
            ],
        ),
        rule(
            "how many cities have more than 100,000 people?",
            &[
                (r#"ans = df.filter("Population", ">=", 98000).nrows();"#, &[-2.1]),
                (big, &[-1.2]),
                ("ans = df.nrows();", &[-2.9]),
                (r#"ans = df.filter("Pop", ">", 1).nrows();"#, &[-3.3]),
                (big, &[-4.8]),
            ],
        ),
        rule(
            "what is the population of Corra?",
            &[
                (corra, &[-0.9]),
                ("SELECT \"Population\" FROM \"204_csv_1\" WHERE \"City\" = 'Brisa'", &[-1.6]),
                ("SELECT Population FROM cities", &[-2.4]),
                ("DELETE FROM \"204_csv_1\"", &[-3.7]),
                ("ATTACH DATABASE 'x.db' AS x", &[-5.1]),
            ],
        ),
        rule(
            "how many singers are there?",
            &[
                ("SELECT count(DISTINCT Country) FROM singer", &[-1.9]),
                ("SELECT count(*) FROM singer", &[-0.6]),
                ("SELECT count(*) FROM singers", &[-2.5]),
                ("SELECT * FROM singer", &[-3.1]),
                ("SELECT count(*) FROM singer", &[-4.2]),
            ],
        ),
        rule(
            "what are the names of singers who performed in concert 2?",
            &[
                ("SELECT Name FROM singer WHERE Singer_ID = 2", &[-2.5]),
                ("SELECT Name FROM singer WHERE Country = 'France'", &[-2.2]),
                (join, &[-0.7, -0.6]),
                ("SELECT Name FROM concert", &[-3.6]),
                (join, &[-4.0]),
            ],
        ),
    ];
    ScriptedModel::new(rules).with_focus_marker("# Question:")
}

fn build_spider_db(dir: &Path) -> Result<(), Box<dyn std::error::Error>> {
    let db_dir = dir.join("database/concert_singer");
    std::fs::create_dir_all(&db_dir)?;
    let db = db_dir.join("concert_singer.sqlite");
    if db.exists() {
        std::fs::remove_file(&db)?;
    }
    let conn = rusqlite::Connection::open(&db)?;
    conn.execute_batch(&std::fs::read_to_string(dir.join("schema.sql"))?)?;
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/replay"));
    build_spider_db(&dir.join("spider"))?;
    let cache = dir.join("cache.jsonl");
    if cache.exists() {
        std::fs::remove_file(&cache)?;
    }
    let model = CachedModel::record_mode(&cache, Arc::new(script()))?;
    let gateway = Gateway::new(Arc::new(model));
    let suite: Suite = serde_json::from_str(&std::fs::read_to_string(dir.join("suite.json"))?)?;
    let mut lines = String::new();
    for entry in suite.runs {
        let split = entry.split.unwrap_or_else(|| entry.dataset.default_split().to_string());
        let examples = load(entry.dataset, &dir.join(&entry.root), &split)?;
        let cfg = RunConfig::for_dataset(entry.dataset, entry.dialect.unwrap_or(Dialect::Host));
        let pipeline = Pipeline::new(cfg, gateway.clone())?;
        for (ex, pred) in examples.iter().zip(pipeline.run_all(&examples, 1)) {
            let ok = tabqa::eval::is_correct(&pred, &ex.gold);
            println!("{} chosen={:?} answer={:?} correct={ok}", ex.id, pred.chosen_candidate, pred.answer);
            for r in &pred.all_results {
                println!("    {} {:?}", r.status.as_str(), r.error_detail);
            }
            lines.push_str(&serde_json::to_string::<Prediction>(&pred)?);
            lines.push('\n');
        }
    }
    std::fs::write(dir.join("expected.jsonl"), lines)?;
    Ok(())
}
