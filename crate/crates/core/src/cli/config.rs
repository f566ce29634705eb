// SPDX-License-Identifier: Apache-2.0

//! Flat `key = value` config files and flag/file/default resolution.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use super::{CliError, RunArgs};
use crate::datasets::DatasetKind;
use crate::eval::{Ablations, RunConfig};
use crate::executor::{Dialect, ExecutionLimits, DEFAULT_MEMORY_CAP, DEFAULT_TIMEOUT};
use crate::gateway::{SamplingConfig, DEFAULT_MAX_TOKENS, DEFAULT_MODEL_ID, DEFAULT_SAMPLES, DEFAULT_TEMPERATURE};

pub const KNOWN_KEYS: &[&str] = &[
    "dataset",
    "split",
    "dialect",
    "shots",
    "samples",
    "temperature",
    "max_tokens",
    "model",
    "timeout_secs",
    "memory_cap_mb",
    "preview_rows",
    "data_root",
    "workers",
    "no_multi_index",
    "no_qa_api",
    "no_op_api",
    "error_fallback",
    "replay",
    "record",
];

/// Parsed config file. Blank lines and `#` comments are ignored.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FileConfig {
    values: BTreeMap<String, String>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", i + 1)))?;
            let k = k.trim().to_string();
            if !KNOWN_KEYS.contains(&k.as_str()) {
                return Err(CliError::Usage(format!("config line {}: unknown key `{k}`", i + 1)));
            }
            values.insert(k, v.trim().to_string());
        }
        Ok(FileConfig { values })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        FileConfig::parse(&text)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.values
            .get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| CliError::Usage(format!("config key `{key}`: {e}")))
            })
            .transpose()
    }
}

fn pick<T: FromStr>(flag: Option<T>, file: &FileConfig, key: &str, default: T) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    Ok(match flag {
        Some(v) => v,
        None => file.get(key)?.unwrap_or(default),
    })
}

fn pick_flag(flag: bool, file: &FileConfig, key: &str) -> Result<bool, CliError> {
    Ok(flag || file.get::<bool>(key)?.unwrap_or(false))
}

/// Everything a run needs after resolution.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub dataset: DatasetKind,
    pub split: String,
    pub data_root: PathBuf,
    pub workers: usize,
    pub replay: Option<PathBuf>,
    pub record: Option<PathBuf>,
    pub run: RunConfig,
}

/// Resolves run settings: flag, then config file, then built-in default.
pub fn resolve(
    dataset_flag: Option<DatasetKind>,
    split_flag: Option<String>,
    args: &RunArgs,
    file: &FileConfig,
) -> Result<Resolved, CliError> {
    let dataset = match dataset_flag {
        Some(d) => d,
        None => file
            .get::<DatasetKind>("dataset")?
            .ok_or_else(|| CliError::Usage("--dataset is required".into()))?,
    };
    let dialect: Dialect = pick(args.dialect, file, "dialect", Dialect::Host)?;
    let split = pick(split_flag, file, "split", dataset.default_split().to_string())?;
    let mut run = RunConfig::for_dataset(dataset, dialect);
    run.prompt.n_shots = pick(args.shots, file, "shots", dataset.default_shots())?;
    run.prompt.k_preview_rows = pick(args.preview_rows, file, "preview_rows", run.prompt.k_preview_rows)?;
    run.sampling = SamplingConfig {
        temperature: pick(args.temperature, file, "temperature", DEFAULT_TEMPERATURE)?,
        n_samples: pick(args.samples, file, "samples", DEFAULT_SAMPLES)?,
        max_tokens: pick(args.max_tokens, file, "max_tokens", DEFAULT_MAX_TOKENS)?,
        model_id: pick(args.model.clone(), file, "model", DEFAULT_MODEL_ID.to_string())?,
    };
    let timeout = pick(args.timeout_secs, file, "timeout_secs", DEFAULT_TIMEOUT.as_secs_f64())?;
    if !(timeout > 0.0 && timeout.is_finite()) {
        return Err(CliError::Usage(format!("timeout must be positive, got {timeout}")));
    }
    let memory_mb: usize = pick(args.memory_cap_mb, file, "memory_cap_mb", DEFAULT_MEMORY_CAP >> 20)?;
    run.limits = ExecutionLimits::new(Duration::from_secs_f64(timeout), memory_mb << 20);
    run.ablations = Ablations {
        no_multiindex: pick_flag(args.no_multi_index, file, "no_multi_index")?,
        no_qa_api: pick_flag(args.no_qa_api, file, "no_qa_api")?,
        no_operation_api: pick_flag(args.no_op_api, file, "no_op_api")?,
    };
    run.error_fallback = pick_flag(args.error_fallback, file, "error_fallback")?;
    let replay = args.replay.clone().or(file.get::<PathBuf>("replay")?);
    let record = args.record.clone().or(file.get::<PathBuf>("record")?);
    if replay.is_some() && record.is_some() {
        return Err(CliError::Usage("--replay and --record are mutually exclusive".into()));
    }
    run.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(Resolved {
        dataset,
        split,
        data_root: pick(args.data_root.clone(), file, "data_root", PathBuf::from("data"))?,
        workers: pick(args.workers, file, "workers", 1)?.max(1),
        replay,
        record,
        run,
    })
}
