// SPDX-License-Identifier: Apache-2.0

//! Command-line interface.
//!
//! Exit codes: 0 success, 1 other failure, 2 usage, 3 malformed input,
//! 4 model gateway failure, 5 I/O failure.

mod config;
mod table_file;

use std::collections::HashSet;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use thiserror::Error;

use crate::datasets::{load, DatasetKind, QAExample};
use crate::eval::{result_records, summarize, write_results, Pipeline, Prediction, Summary};
use crate::executor::Dialect;
use crate::gateway::{read_records, CachedModel, CompletionModel, Gateway, LiveModel};
use crate::parser::{flatten_headers, parse_table, DEFAULT_SEPARATOR};
use crate::prompt::serialize_table;

pub use config::{resolve, FileConfig, Resolved, KNOWN_KEYS};
pub use table_file::load_table_file;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("gateway error: {0}")]
    Gateway(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Other(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Format(_) => 3,
            CliError::Gateway(_) => 4,
            CliError::Io(_) => 5,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "tabqa", version, about = "Question answering over hierarchical and relational tables")]
pub struct Cli {
    /// Flat key = value file; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a table file and print its multi-index.
    Parse(ParseArgs),
    /// Evaluate a dataset split and report execution accuracy.
    Eval(EvalArgs),
    /// Answer one question about one or more table files.
    Ask(AskArgs),
    /// Inspect a replay cache.
    Cache(CacheArgs),
}

#[derive(Debug, Args)]
pub struct TableFileArgs {
    /// Header rows of CSV/TSV input.
    #[arg(long, default_value_t = 1)]
    pub header_rows: usize,
    /// Left header columns of CSV/TSV input.
    #[arg(long, default_value_t = 0)]
    pub left_cols: usize,
}

#[derive(Debug, Args)]
pub struct ParseArgs {
    pub table_file: PathBuf,
    /// Collapse the top header into single joined labels.
    #[arg(long)]
    pub flatten: bool,
    #[arg(long, default_value = DEFAULT_SEPARATOR)]
    pub separator: String,
    /// Body rows shown in the preview.
    #[arg(long, default_value_t = 3)]
    pub preview: usize,
    #[command(flatten)]
    pub table: TableFileArgs,
}

/// Flags shared by `eval` and `ask`.
#[derive(Debug, Args, Default, Clone)]
pub struct RunArgs {
    #[arg(long)]
    pub dialect: Option<Dialect>,
    #[arg(long)]
    pub shots: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub max_tokens: Option<usize>,
    #[arg(long)]
    pub model: Option<String>,
    /// Wall-clock budget per program, in seconds.
    #[arg(long = "timeout")]
    pub timeout_secs: Option<f64>,
    #[arg(long = "memory-cap-mb")]
    pub memory_cap_mb: Option<usize>,
    #[arg(long)]
    pub preview_rows: Option<usize>,
    #[arg(long = "no-multi-index")]
    pub no_multi_index: bool,
    #[arg(long = "no-qa-api")]
    pub no_qa_api: bool,
    #[arg(long = "no-op-api")]
    pub no_op_api: bool,
    /// Prefer the best candidate that executed successfully.
    #[arg(long)]
    pub error_fallback: bool,
    /// Serve completions only from this cache.
    #[arg(long)]
    pub replay: Option<PathBuf>,
    /// Call the live model and append responses to this cache.
    #[arg(long)]
    pub record: Option<PathBuf>,
    #[arg(long)]
    pub data_root: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub dataset: Option<DatasetKind>,
    #[arg(long)]
    pub split: Option<String>,
    /// JSON manifest of several runs, each with dataset, split, dialect and root.
    #[arg(long, conflicts_with = "dataset")]
    pub suite: Option<PathBuf>,
    /// Results file, one JSON record per example.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Stop after this many examples.
    #[arg(long)]
    pub limit: Option<usize>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct AskArgs {
    pub question: String,
    #[arg(required = true)]
    pub table_files: Vec<PathBuf>,
    /// Dataset whose exemplars and defaults are used.
    #[arg(long, default_value = "hitab")]
    pub dataset: DatasetKind,
    #[command(flatten)]
    pub table: TableFileArgs,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct CacheArgs {
    #[command(subcommand)]
    pub action: CacheAction,
}

#[derive(Debug, Subcommand)]
pub enum CacheAction {
    /// Record and request counts.
    Stats { file: PathBuf },
    /// Check that every record is well-formed and keys are unique.
    Verify { file: PathBuf },
}

#[derive(Debug, Deserialize)]
struct SuiteEntry {
    dataset: DatasetKind,
    #[serde(default)]
    split: Option<String>,
    #[serde(default)]
    dialect: Option<Dialect>,
    root: PathBuf,
}

#[derive(Debug, Deserialize)]
struct Suite {
    runs: Vec<SuiteEntry>,
}

fn build_gateway(r: &Resolved) -> Result<Gateway, CliError> {
    let gw = |e: crate::gateway::GatewayError| CliError::Gateway(e.to_string());
    let model: Arc<dyn CompletionModel> = match (&r.replay, &r.record) {
        (Some(path), _) => Arc::new(CachedModel::replay_mode(path, true, None).map_err(gw)?),
        (None, Some(path)) => {
            let live: Arc<dyn CompletionModel> = Arc::new(LiveModel::from_env().map_err(gw)?);
            Arc::new(CachedModel::record_mode(path, live).map_err(gw)?)
        }
        (None, None) => Arc::new(LiveModel::from_env().map_err(gw)?),
    };
    Ok(Gateway::new(model).with_model_id(r.run.sampling.model_id.clone()))
}

fn file_config(path: &Option<PathBuf>) -> Result<FileConfig, CliError> {
    match path {
        Some(p) => FileConfig::load(p),
        None => Ok(FileConfig::default()),
    }
}

fn gateway_failures(preds: &[Prediction]) -> usize {
    preds
        .iter()
        .filter(|p| p.error.as_deref().is_some_and(|e| e.starts_with("gateway")))
        .count()
}

fn print_summary(out: &mut dyn Write, s: &Summary) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(e.to_string());
    for (name, d) in &s.per_dataset {
        writeln!(out, "EA {name}: {:.4} ({}/{})", d.ea, d.correct, d.total).map_err(io)?;
    }
    writeln!(out, "EA: {:.4} ({}/{})", s.ea, s.correct, s.total).map_err(io)
}

fn cmd_parse(args: &ParseArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let raw = load_table_file(&args.table_file, args.table.header_rows, args.table.left_cols)?;
    let m = if args.flatten {
        flatten_headers(&raw, &args.separator)
    } else {
        parse_table(&raw)
    }
    .map_err(|e| CliError::Format(e.to_string()))?;
    write!(out, "{}", serialize_table(&m, args.preview.max(1))).map_err(|e| CliError::Io(e.to_string()))?;
    writeln!(out, "column tuples: {}", m.n_cols()).map_err(|e| CliError::Io(e.to_string()))
}

fn eval_runs(args: &EvalArgs, file: &FileConfig) -> Result<Vec<(Resolved, PathBuf)>, CliError> {
    let Some(suite_path) = &args.suite else {
        let r = resolve(args.dataset, args.split.clone(), &args.run, file)?;
        let root = r.data_root.join(r.dataset.as_str());
        return Ok(vec![(r, root)]);
    };
    let text = std::fs::read_to_string(suite_path)
        .map_err(|e| CliError::Format(format!("{}: {e}", suite_path.display())))?;
    let suite: Suite =
        serde_json::from_str(&text).map_err(|e| CliError::Format(format!("{}: {e}", suite_path.display())))?;
    let base = suite_path.parent().unwrap_or(Path::new("."));
    suite
        .runs
        .into_iter()
        .map(|entry| {
            let mut run_args = args.run.clone();
            if entry.dialect.is_some() {
                run_args.dialect = entry.dialect;
            }
            let r = resolve(Some(entry.dataset), entry.split.clone(), &run_args, file)?;
            Ok((r, base.join(&entry.root)))
        })
        .collect()
}

fn cmd_eval(args: &EvalArgs, file: &FileConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let runs = eval_runs(args, file)?;
    let gateway = build_gateway(&runs[0].0)?;
    let mut examples_all: Vec<QAExample> = Vec::new();
    let mut preds_all: Vec<Prediction> = Vec::new();
    for (r, root) in &runs {
        let mut examples = load(r.dataset, root, &r.split).map_err(|e| CliError::Format(e.to_string()))?;
        if let Some(n) = args.limit {
            examples.truncate(n);
        }
        let pipeline =
            Pipeline::new(r.run.clone(), gateway.clone()).map_err(|e| CliError::Usage(e.to_string()))?;
        tracing::info!(dataset = %r.dataset, examples = examples.len(), "evaluating");
        preds_all.extend(pipeline.run_all(&examples, r.workers));
        examples_all.extend(examples);
    }
    let records = result_records(&examples_all, &preds_all);
    if let Some(path) = &args.out {
        write_results(path, &records).map_err(|e| CliError::Io(e.to_string()))?;
    }
    print_summary(out, &summarize(&records))?;
    match gateway_failures(&preds_all) {
        0 => Ok(()),
        n => Err(CliError::Gateway(format!("{n} examples failed at the model gateway"))),
    }
}

fn cmd_ask(args: &AskArgs, file: &FileConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let r = resolve(Some(args.dataset), None, &args.run, file)?;
    let tables = args
        .table_files
        .iter()
        .map(|p| load_table_file(p, args.table.header_rows, args.table.left_cols))
        .collect::<Result<Vec<_>, _>>()?;
    let ex = QAExample {
        id: "ask".into(),
        question: args.question.clone(),
        tables,
        gold: Vec::new(),
        dataset: r.dataset,
    };
    let gateway = build_gateway(&r)?;
    let pipeline = Pipeline::new(r.run.clone(), gateway).map_err(|e| CliError::Usage(e.to_string()))?;
    let pred = pipeline.run_example(&ex);
    let io = |e: std::io::Error| CliError::Io(e.to_string());
    match (&pred.answer, &pred.error) {
        (Some(a), _) => writeln!(out, "{a}").map_err(io),
        (None, Some(e)) if e.starts_with("gateway") => Err(CliError::Gateway(e.clone())),
        (None, Some(e)) => Err(CliError::Format(e.clone())),
        (None, None) => {
            let status = pred
                .chosen_candidate
                .map(|i| pred.all_results[i].status.as_str())
                .unwrap_or("no_candidate");
            writeln!(out, "no answer ({status})").map_err(io)
        }
    }
}

fn cmd_cache(args: &CacheArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(e.to_string());
    match &args.action {
        CacheAction::Stats { file } => {
            let records = read_records(file).map_err(|e| CliError::Format(e.to_string()))?;
            let prompts: HashSet<_> = records.iter().map(|r| &r.request.prompt_sha256).collect();
            writeln!(out, "records: {}", records.len()).map_err(io)?;
            writeln!(out, "distinct prompts: {}", prompts.len()).map_err(io)
        }
        CacheAction::Verify { file } => {
            let records = read_records(file).map_err(|e| CliError::Format(e.to_string()))?;
            let mut keys = HashSet::new();
            for (i, r) in records.iter().enumerate() {
                if !keys.insert(&r.key) {
                    return Err(CliError::Format(format!("record {}: duplicate key {}", i + 1, r.key)));
                }
                if r.candidates.is_empty() || !r.candidates.iter().all(|c| c.is_consistent()) {
                    return Err(CliError::Format(format!("record {}: inconsistent candidate", i + 1)));
                }
            }
            writeln!(out, "ok: {} records", records.len()).map_err(io)
        }
    }
}

/// Runs a parsed command, writing normal output to `out`.
pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Parse(a) => cmd_parse(a, out),
        Command::Eval(a) => cmd_eval(a, &file_config(&cli.config)?, out),
        Command::Ask(a) => cmd_ask(a, &file_config(&cli.config)?, out),
        Command::Cache(a) => cmd_cache(a, out),
    }
}

/// Parses `args` and runs; returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{rendered}");
            } else {
                let _ = write!(err, "{rendered}");
            }
            return if code == 0 { 0 } else { 2 };
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
