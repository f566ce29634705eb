// SPDX-License-Identifier: Apache-2.0

//! Record/replay cache for completion requests.
//!
//! The cache file is line-delimited JSON, one record per sample:
//!
//! ```text
//! {"key":"<sha256 hex>","request":{...},"candidates":[{"text":...,"token_logprobs":[...],"total_logprob":...}]}
//! ```
//!
//! The key is the SHA-256 of the compact JSON array
//! `[model_id, prompt, temperature, max_tokens, sample_ordinal]`. Records are
//! appended and never rewritten; a key already present is not appended again.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Candidate, CompletionModel, GatewayError, SamplingConfig};

const PROMPT_HEAD_CHARS: usize = 80;

pub fn request_key(
    model_id: &str,
    prompt: &str,
    temperature: f64,
    max_tokens: usize,
    ordinal: usize,
) -> String {
    let canonical = serde_json::to_vec(&(model_id, prompt, temperature, max_tokens, ordinal))
        .expect("tuple of primitives serializes");
    hex::encode(Sha256::digest(&canonical))
}

/// Human-readable summary of the request behind a record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestSummary {
    pub model_id: String,
    pub temperature: f64,
    pub max_tokens: usize,
    pub ordinal: usize,
    pub prompt_sha256: String,
    pub prompt_head: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub key: String,
    pub request: RequestSummary,
    pub candidates: Vec<Candidate>,
}

/// In-memory view of a cache file plus an append handle.
#[derive(Debug)]
pub struct ReplayCache {
    path: PathBuf,
    entries: RwLock<HashMap<String, Candidate>>,
    writer: Mutex<Option<File>>,
}

impl ReplayCache {
    /// Loads `path`; a missing file is an empty cache.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, GatewayError> {
        let path = path.as_ref().to_path_buf();
        let mut entries = HashMap::new();
        if path.exists() {
            for record in read_records(&path)? {
                if let Some(c) = record.candidates.into_iter().next() {
                    entries.entry(record.key).or_insert(c);
                }
            }
        }
        Ok(ReplayCache {
            path,
            entries: RwLock::new(entries),
            writer: Mutex::new(None),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, key: &str) -> Option<Candidate> {
        self.entries.read().expect("cache lock").get(key).cloned()
    }

    /// Appends a record unless its key is already cached. Returns whether it was written.
    pub fn insert(&self, record: CacheRecord) -> Result<bool, GatewayError> {
        let mut writer = self.writer.lock().expect("cache writer lock");
        {
            let entries = self.entries.read().expect("cache lock");
            if entries.contains_key(&record.key) {
                return Ok(false);
            }
        }
        if writer.is_none() {
            if let Some(dir) = self.path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(io_err)?;
            }
            let file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(&self.path)
                .map_err(io_err)?;
            *writer = Some(file);
        }
        let file = writer.as_mut().expect("writer opened above");
        let line = serde_json::to_string(&record).map_err(|e| GatewayError::CacheIo(e.to_string()))?;
        writeln!(file, "{line}").map_err(io_err)?;
        file.flush().map_err(io_err)?;
        if let Some(c) = record.candidates.into_iter().next() {
            self.entries
                .write()
                .expect("cache lock")
                .insert(record.key, c);
        }
        Ok(true)
    }
}

fn io_err(e: std::io::Error) -> GatewayError {
    GatewayError::CacheIo(e.to_string())
}

/// Reads every record of a cache file in file order.
pub fn read_records(path: &Path) -> Result<Vec<CacheRecord>, GatewayError> {
    let file = File::open(path).map_err(io_err)?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let record: CacheRecord = serde_json::from_str(&line)
            .map_err(|e| GatewayError::CacheIo(format!("{}:{}: {e}", path.display(), n + 1)))?;
        out.push(record);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheMode {
    /// Serve hits from the cache, forward misses to the inner model and persist them.
    Record,
    /// Serve from the cache. Misses fail when `strict`, otherwise they go to
    /// the inner model without being persisted.
    Replay { strict: bool },
}

/// A completion model fronted by a [`ReplayCache`].
pub struct CachedModel {
    cache: ReplayCache,
    inner: Option<Arc<dyn CompletionModel>>,
    mode: CacheMode,
}

impl CachedModel {
    pub fn record_mode(
        cache_path: impl AsRef<Path>,
        inner: Arc<dyn CompletionModel>,
    ) -> Result<Self, GatewayError> {
        Ok(CachedModel {
            cache: ReplayCache::open(cache_path)?,
            inner: Some(inner),
            mode: CacheMode::Record,
        })
    }

    pub fn replay_mode(
        cache_path: impl AsRef<Path>,
        strict: bool,
        fallback: Option<Arc<dyn CompletionModel>>,
    ) -> Result<Self, GatewayError> {
        let path = cache_path.as_ref();
        if !path.exists() {
            return Err(GatewayError::CacheIo(format!(
                "cache file {} does not exist",
                path.display()
            )));
        }
        Ok(CachedModel {
            cache: ReplayCache::open(path)?,
            inner: fallback,
            mode: CacheMode::Replay { strict },
        })
    }

    pub fn cache(&self) -> &ReplayCache {
        &self.cache
    }

    pub fn mode(&self) -> CacheMode {
        self.mode
    }
}

impl CompletionModel for CachedModel {
    fn complete(&self, prompt: &str, cfg: &SamplingConfig) -> Result<Vec<Candidate>, GatewayError> {
        let keys: Vec<String> = (0..cfg.n_samples)
            .map(|i| request_key(&cfg.model_id, prompt, cfg.temperature, cfg.max_tokens, i))
            .collect();
        let hits: Vec<Option<Candidate>> = keys.iter().map(|k| self.cache.get(k)).collect();
        if hits.iter().all(Option::is_some) {
            return Ok(hits.into_iter().flatten().collect());
        }
        let first_miss = hits
            .iter()
            .position(Option::is_none)
            .expect("at least one miss");
        let inner = match (&self.mode, &self.inner) {
            (CacheMode::Replay { strict: true }, _) | (_, None) => {
                return Err(GatewayError::CacheMiss {
                    key: keys[first_miss].clone(),
                })
            }
            (_, Some(inner)) => inner,
        };
        let fresh = inner.complete(prompt, cfg)?;
        if fresh.len() < cfg.n_samples {
            return Err(GatewayError::ShortResponse {
                expected: cfg.n_samples,
                got: fresh.len(),
            });
        }
        let prompt_sha256 = hex::encode(Sha256::digest(prompt.as_bytes()));
        let prompt_head: String = prompt.chars().take(PROMPT_HEAD_CHARS).collect();
        let mut out = Vec::with_capacity(cfg.n_samples);
        for (ordinal, (hit, new)) in hits.into_iter().zip(fresh).enumerate() {
            match hit {
                Some(c) => out.push(c),
                None => {
                    if self.mode == CacheMode::Record {
                        self.cache.insert(CacheRecord {
                            key: keys[ordinal].clone(),
                            request: RequestSummary {
                                model_id: cfg.model_id.clone(),
                                temperature: cfg.temperature,
                                max_tokens: cfg.max_tokens,
                                ordinal,
                                prompt_sha256: prompt_sha256.clone(),
                                prompt_head: prompt_head.clone(),
                            },
                            candidates: vec![new.clone()],
                        })?;
                    }
                    out.push(new);
                }
            }
        }
        Ok(out)
    }
}
