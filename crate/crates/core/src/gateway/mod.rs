// SPDX-License-Identifier: Apache-2.0

//! Completion-model access.
//!
//! Everything that samples from a language model goes through a
//! [`CompletionModel`]. Concrete models are the live HTTP client, the
//! record/replay cache wrapper and a scripted model for offline runs.

mod cache;
mod live;
mod scripted;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cache::{read_records, request_key, CacheMode, CacheRecord, CachedModel, ReplayCache, RequestSummary};
pub use live::{LiveModel, API_KEY_ENV, BASE_URL_ENV, DEFAULT_BASE_URL};
pub use scripted::{ScriptRule, ScriptedModel};

pub const DEFAULT_TEMPERATURE: f64 = 0.7;
pub const DEFAULT_SAMPLES: usize = 5;
pub const DEFAULT_MAX_TOKENS: usize = 512;
pub const DEFAULT_MODEL_ID: &str = "code-davinci-002";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GatewayError {
    #[error("prompt must be non-empty")]
    EmptyPrompt,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("no cached response for request {key}")]
    CacheMiss { key: String },
    #[error("cache I/O error: {0}")]
    CacheIo(String),
    #[error("model returned {got} candidates, expected {expected}")]
    ShortResponse { expected: usize, got: usize },
    #[error("invalid candidate: {0}")]
    InvalidCandidate(String),
    #[error("cannot read a yes/no answer from {0:?}")]
    UnparseableAnswer(String),
    #[error("invalid sampling config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub temperature: f64,
    pub n_samples: usize,
    pub max_tokens: usize,
    pub model_id: String,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            temperature: DEFAULT_TEMPERATURE,
            n_samples: DEFAULT_SAMPLES,
            max_tokens: DEFAULT_MAX_TOKENS,
            model_id: DEFAULT_MODEL_ID.to_string(),
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(GatewayError::InvalidConfig(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            )));
        }
        if self.n_samples == 0 {
            return Err(GatewayError::InvalidConfig("n_samples must be >= 1".into()));
        }
        Ok(())
    }
}

/// One sampled program with its per-token log probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub text: String,
    pub token_logprobs: Vec<f64>,
    pub total_logprob: f64,
}

impl Candidate {
    pub fn new(text: impl Into<String>, token_logprobs: Vec<f64>) -> Result<Self, GatewayError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(GatewayError::InvalidCandidate("empty program text".into()));
        }
        let total_logprob = sum_logprobs(&token_logprobs);
        Ok(Candidate {
            text,
            token_logprobs,
            total_logprob,
        })
    }

    pub fn score(&self, mode: ScoreMode) -> f64 {
        match mode {
            ScoreMode::Sum => self.total_logprob,
            ScoreMode::MeanPerToken if self.token_logprobs.is_empty() => self.total_logprob,
            ScoreMode::MeanPerToken => self.total_logprob / self.token_logprobs.len() as f64,
        }
    }

    /// Checks that the stored total equals the sum of the token log probabilities.
    pub fn is_consistent(&self) -> bool {
        sum_logprobs(&self.token_logprobs) == self.total_logprob && !self.text.trim().is_empty()
    }
}

/// Left-to-right sum; every producer and checker uses this one routine.
pub fn sum_logprobs(lp: &[f64]) -> f64 {
    lp.iter().fold(0.0, |acc, x| acc + x)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMode {
    /// Total log probability of the completion.
    #[default]
    Sum,
    /// Total divided by token count.
    MeanPerToken,
}

/// A source of sampled completions.
pub trait CompletionModel: Send + Sync {
    fn complete(&self, prompt: &str, cfg: &SamplingConfig) -> Result<Vec<Candidate>, GatewayError>;
}

/// Prompt used for the yes/no capability.
pub fn yes_no_prompt(question: &str) -> String {
    format!("Answer the question with yes or no.\nQuestion: {question}\nAnswer:")
}

/// Maps a short free-text reply to a boolean using its first alphabetic token.
pub fn parse_yes_no(reply: &str) -> Result<bool, GatewayError> {
    let token: String = reply
        .split(|c: char| !c.is_alphabetic())
        .find(|t| !t.is_empty())
        .unwrap_or("")
        .to_lowercase();
    match token.as_str() {
        "yes" | "true" => Ok(true),
        "no" | "false" => Ok(false),
        _ => Err(GatewayError::UnparseableAnswer(reply.to_string())),
    }
}

/// The completion model behind both gateway capabilities.
#[derive(Clone)]
pub struct Gateway {
    model: Arc<dyn CompletionModel>,
    yes_no_cfg: SamplingConfig,
}

impl Gateway {
    pub fn new(model: Arc<dyn CompletionModel>) -> Self {
        Gateway {
            model,
            yes_no_cfg: SamplingConfig {
                temperature: 0.0,
                n_samples: 1,
                max_tokens: 4,
                model_id: DEFAULT_MODEL_ID.to_string(),
            },
        }
    }

    /// Uses `model_id` for yes/no requests.
    pub fn with_model_id(mut self, model_id: impl Into<String>) -> Self {
        self.yes_no_cfg.model_id = model_id.into();
        self
    }

    pub fn complete(&self, prompt: &str, cfg: &SamplingConfig) -> Result<Vec<Candidate>, GatewayError> {
        if prompt.trim().is_empty() {
            return Err(GatewayError::EmptyPrompt);
        }
        cfg.validate()?;
        let candidates = self.model.complete(prompt, cfg)?;
        if candidates.len() < cfg.n_samples {
            return Err(GatewayError::ShortResponse {
                expected: cfg.n_samples,
                got: candidates.len(),
            });
        }
        Ok(candidates.into_iter().take(cfg.n_samples).collect())
    }

    pub fn yes_no(&self, question: &str) -> Result<bool, GatewayError> {
        if question.trim().is_empty() {
            return Err(GatewayError::EmptyPrompt);
        }
        let reply = self.complete(&yes_no_prompt(question), &self.yes_no_cfg)?;
        parse_yes_no(&reply[0].text)
    }
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("yes_no_cfg", &self.yes_no_cfg)
            .finish_non_exhaustive()
    }
}
