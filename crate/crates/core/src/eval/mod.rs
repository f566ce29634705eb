// SPDX-License-Identifier: Apache-2.0

//! End-to-end runs: parse, prompt, sample, execute, select, score.

mod normalize;

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::apis::{ApiFamily, ApiRegistry};
use crate::datasets::{DatasetKind, QAExample};
use crate::executor::{Dialect, ExecStatus, ExecutionLimits, ExecutionResult, Executor};
use crate::gateway::{Candidate, Gateway, SamplingConfig};
use crate::parser::{flatten_tables, parse_tables, DEFAULT_SEPARATOR};
use crate::prompt::{build_prompt, PromptConfig, PROGRAM_MARKER, QUESTION_MARKER};
use crate::table::TableSet;

pub use normalize::{answers_match, normalize_answer, normalize_text, Canonical, NUMERIC_TOLERANCE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("no gold answer for example `{0}`")]
    MissingGold(String),
    #[error("invalid run config: {0}")]
    Config(String),
    #[error("results I/O error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ablations {
    pub no_multiindex: bool,
    pub no_qa_api: bool,
    pub no_operation_api: bool,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub prompt: PromptConfig,
    pub sampling: SamplingConfig,
    pub limits: ExecutionLimits,
    pub ablations: Ablations,
    pub error_fallback: bool,
}

impl RunConfig {
    /// Defaults for a dataset: its default shot count, five samples at temperature 0.7.
    pub fn for_dataset(dataset: DatasetKind, dialect: Dialect) -> Self {
        RunConfig {
            prompt: PromptConfig::for_dataset(dataset, dialect),
            sampling: SamplingConfig::default(),
            limits: ExecutionLimits::default(),
            ablations: Ablations::default(),
            error_fallback: false,
        }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        self.sampling.validate().map_err(|e| EvalError::Config(e.to_string()))?;
        self.effective_prompt(&ApiRegistry::empty())
            .validate()
            .map_err(|e| EvalError::Config(e.to_string()))
    }

    /// The registry a run exposes to programs, minus ablated families.
    pub fn registry(&self, gateway: &Gateway) -> ApiRegistry {
        let mut reg = ApiRegistry::standard(gateway.clone());
        if self.ablations.no_qa_api {
            reg = reg.without_family(ApiFamily::Qa);
        }
        if self.ablations.no_operation_api {
            reg = reg.without_family(ApiFamily::Operation);
        }
        reg
    }

    fn effective_prompt(&self, registry: &ApiRegistry) -> PromptConfig {
        let mut p = self.prompt.clone().with_apis(registry);
        if self.ablations.no_qa_api {
            p = p.without_family(ApiFamily::Qa);
        }
        if self.ablations.no_operation_api {
            p = p.without_family(ApiFamily::Operation);
        }
        p
    }
}

/// Outcome for one example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub example_id: String,
    pub answer: Option<Canonical>,
    pub chosen_candidate: Option<usize>,
    pub all_results: Vec<ExecutionResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Prediction {
    fn failed(id: &str, error: String) -> Self {
        Prediction {
            example_id: id.to_string(),
            answer: None,
            chosen_candidate: None,
            all_results: Vec::new(),
            error: Some(error),
        }
    }
}

/// Argmax of total log probability, ties to the lowest ordinal. With
/// `fallback`, the best candidate that executed successfully wins when there is one.
pub fn select_candidate(candidates: &[Candidate], results: &[ExecutionResult], fallback: bool) -> usize {
    assert!(
        !candidates.is_empty() && candidates.len() == results.len(),
        "select_candidate needs equally many candidates and results"
    );
    let score = |i: usize| {
        let s = candidates[i].total_logprob;
        if s.is_nan() {
            f64::NEG_INFINITY
        } else {
            s
        }
    };
    let argmax = |pool: &mut dyn Iterator<Item = usize>| {
        let mut best: Option<usize> = None;
        for i in pool {
            if best.is_none_or(|b| score(i) > score(b)) {
                best = Some(i);
            }
        }
        best
    };
    let global = argmax(&mut (0..candidates.len())).expect("non-empty");
    if !fallback {
        return global;
    }
    argmax(&mut (0..candidates.len()).filter(|&i| results[i].is_ok())).unwrap_or(global)
}

/// Keeps the program part of a completion: fences are dropped and text
/// from the next exemplar or question marker on is cut.
pub fn extract_program(completion: &str) -> String {
    let mut lines = Vec::new();
    for line in completion.lines() {
        let t = line.trim_start();
        if t.starts_with("###") || t.starts_with(QUESTION_MARKER) || t.starts_with(PROGRAM_MARKER) {
            break;
        }
        if t.starts_with("```") {
            continue;
        }
        lines.push(line);
    }
    lines.join("\n").trim().to_string()
}

/// Runs examples against one gateway.
pub struct Pipeline {
    cfg: RunConfig,
    gateway: Gateway,
    executor: Executor,
    prompt: PromptConfig,
}

impl Pipeline {
    pub fn new(cfg: RunConfig, gateway: Gateway) -> Result<Self, EvalError> {
        cfg.validate()?;
        let registry = cfg.registry(&gateway);
        let prompt = cfg.effective_prompt(&registry);
        prompt.validate().map_err(|e| EvalError::Config(e.to_string()))?;
        let executor = Executor::new(registry, cfg.limits.clone()).with_separator(prompt.separator.clone());
        Ok(Pipeline {
            cfg,
            gateway,
            executor,
            prompt,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn tables(&self, ex: &QAExample) -> Result<TableSet, String> {
        let parsed = if self.cfg.ablations.no_multiindex {
            flatten_tables(&ex.tables, DEFAULT_SEPARATOR)
        } else {
            parse_tables(&ex.tables)
        };
        parsed.map_err(|e| format!("table parsing failed: {e}"))
    }

    pub fn prompt(&self, ex: &QAExample) -> Result<String, String> {
        let tables = self.tables(ex)?;
        build_prompt(&ex.question, &tables, &self.prompt).map_err(|e| e.to_string())
    }

    pub fn run_example(&self, ex: &QAExample) -> Prediction {
        let tables = match self.tables(ex) {
            Ok(t) => t,
            Err(e) => return Prediction::failed(&ex.id, e),
        };
        let prompt = match build_prompt(&ex.question, &tables, &self.prompt) {
            Ok(p) => p,
            Err(e) => return Prediction::failed(&ex.id, e.to_string()),
        };
        let candidates = match self.gateway.complete(&prompt, &self.cfg.sampling) {
            Ok(c) => c,
            Err(e) => return Prediction::failed(&ex.id, format!("gateway: {e}")),
        };
        let results: Vec<ExecutionResult> = candidates
            .iter()
            .map(|c| self.executor.execute(self.prompt.dialect, &extract_program(&c.text), &tables))
            .collect();
        let chosen = select_candidate(&candidates, &results, self.cfg.error_fallback);
        let answer = results[chosen].value.as_ref().map(normalize_answer);
        Prediction {
            example_id: ex.id.clone(),
            answer,
            chosen_candidate: Some(chosen),
            all_results: results,
            error: None,
        }
    }

    /// Runs every example on `workers` threads; output order follows input order.
    pub fn run_all(&self, examples: &[QAExample], workers: usize) -> Vec<Prediction> {
        if workers <= 1 {
            return examples.iter().map(|e| self.run_example(e)).collect();
        }
        match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
            Ok(pool) => pool.install(|| examples.par_iter().map(|e| self.run_example(e)).collect()),
            Err(_) => examples.iter().map(|e| self.run_example(e)).collect(),
        }
    }
}

/// One-off run of a single example.
pub fn run_example(ex: &QAExample, cfg: &RunConfig, gateway: &Gateway) -> Prediction {
    match Pipeline::new(cfg.clone(), gateway.clone()) {
        Ok(p) => p.run_example(ex),
        Err(e) => Prediction::failed(&ex.id, e.to_string()),
    }
}

pub fn is_correct(pred: &Prediction, gold: &[String]) -> bool {
    pred.answer.as_ref().is_some_and(|a| answers_match(a, gold))
}

/// Fraction of predictions with an answer matching their gold. An empty
/// prediction list scores 0.
pub fn execution_accuracy(preds: &[Prediction], golds: &HashMap<String, Vec<String>>) -> Result<f64, EvalError> {
    let mut correct = 0usize;
    for p in preds {
        let gold = golds
            .get(&p.example_id)
            .ok_or_else(|| EvalError::MissingGold(p.example_id.clone()))?;
        if is_correct(p, gold) {
            correct += 1;
        }
    }
    if preds.is_empty() {
        return Ok(0.0);
    }
    Ok(correct as f64 / preds.len() as f64)
}

/// One line of the results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub example_id: String,
    pub dataset: DatasetKind,
    pub answer: Option<Canonical>,
    pub statuses: Vec<ExecStatus>,
    pub chosen: Option<usize>,
    pub correct: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetScore {
    pub total: usize,
    pub correct: usize,
    pub ea: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub total: usize,
    pub correct: usize,
    pub ea: f64,
    pub per_dataset: BTreeMap<String, DatasetScore>,
}

pub fn result_records(examples: &[QAExample], preds: &[Prediction]) -> Vec<ResultRecord> {
    examples
        .iter()
        .zip(preds)
        .map(|(ex, p)| ResultRecord {
            example_id: p.example_id.clone(),
            dataset: ex.dataset,
            answer: p.answer.clone(),
            statuses: p.all_results.iter().map(|r| r.status).collect(),
            chosen: p.chosen_candidate,
            correct: is_correct(p, &ex.gold),
            error: p.error.clone(),
        })
        .collect()
}

pub fn summarize(records: &[ResultRecord]) -> Summary {
    let mut per: BTreeMap<String, DatasetScore> = BTreeMap::new();
    for r in records {
        let s = per.entry(r.dataset.to_string()).or_insert(DatasetScore {
            total: 0,
            correct: 0,
            ea: 0.0,
        });
        s.total += 1;
        s.correct += usize::from(r.correct);
    }
    for s in per.values_mut() {
        s.ea = s.correct as f64 / s.total as f64;
    }
    let correct = records.iter().filter(|r| r.correct).count();
    Summary {
        total: records.len(),
        correct,
        ea: if records.is_empty() { 0.0 } else { correct as f64 / records.len() as f64 },
        per_dataset: per,
    }
}

pub fn write_results(path: &Path, records: &[ResultRecord]) -> Result<(), EvalError> {
    let io = |e: std::io::Error| EvalError::Io(format!("{}: {e}", path.display()));
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| EvalError::Io(e.to_string()))?;
        writeln!(f, "{line}").map_err(io)?;
    }
    f.flush().map_err(io)
}
