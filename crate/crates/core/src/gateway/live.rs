// SPDX-License-Identifier: Apache-2.0

//! Client for OpenAI-compatible `/completions` endpoints.
//!
//! Request body: `{model, prompt, temperature, max_tokens, n, logprobs: 1}`.
//! Each returned choice must carry `logprobs.token_logprobs`; a `null` entry
//! (some servers emit one for the first token) counts as 0.

use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{Candidate, CompletionModel, GatewayError, SamplingConfig};

pub const API_KEY_ENV: &str = "TABQA_API_KEY";
pub const BASE_URL_ENV: &str = "TABQA_BASE_URL";
pub const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";

pub struct LiveModel {
    base_url: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    #[serde(default)]
    index: usize,
    text: String,
    logprobs: Option<Logprobs>,
}

#[derive(Deserialize)]
struct Logprobs {
    token_logprobs: Vec<Option<f64>>,
}

impl LiveModel {
    pub fn new(base_url: impl Into<String>, api_key: Option<String>) -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| GatewayError::Transport(e.to_string()))?;
        Ok(LiveModel {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key,
            client,
        })
    }

    /// Reads the endpoint from `TABQA_BASE_URL` and credentials from `TABQA_API_KEY`.
    pub fn from_env() -> Result<Self, GatewayError> {
        let base = std::env::var(BASE_URL_ENV).unwrap_or_else(|_| DEFAULT_BASE_URL.to_string());
        let key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        LiveModel::new(base, key)
    }
}

impl CompletionModel for LiveModel {
    fn complete(&self, prompt: &str, cfg: &SamplingConfig) -> Result<Vec<Candidate>, GatewayError> {
        let body = json!({
            "model": cfg.model_id,
            "prompt": prompt,
            "temperature": cfg.temperature,
            "max_tokens": cfg.max_tokens,
            "n": cfg.n_samples,
            "logprobs": 1,
        });
        let mut req = self
            .client
            .post(format!("{}/completions", self.base_url))
            .json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req
            .send()
            .map_err(|e| GatewayError::Transport(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            let text = resp.text().unwrap_or_default();
            return Err(GatewayError::Transport(format!("HTTP {status}: {text}")));
        }
        let mut parsed: CompletionResponse = resp
            .json()
            .map_err(|e| GatewayError::Transport(format!("bad response body: {e}")))?;
        parsed.choices.sort_by_key(|c| c.index);
        parsed
            .choices
            .into_iter()
            .map(|c| {
                let lps = c
                    .logprobs
                    .ok_or_else(|| GatewayError::Transport("choice without logprobs".into()))?
                    .token_logprobs
                    .into_iter()
                    .map(|x| x.unwrap_or(0.0))
                    .collect();
                Candidate::new(c.text, lps)
            })
            .collect()
    }
}
