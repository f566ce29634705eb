// SPDX-License-Identifier: Apache-2.0

use super::{Candidate, CompletionModel, GatewayError, SamplingConfig};

/// Responses served when `trigger` occurs in the focused part of a prompt.
#[derive(Debug, Clone)]
pub struct ScriptRule {
    pub trigger: String,
    pub responses: Vec<(String, Vec<f64>)>,
}

impl ScriptRule {
    pub fn new<S: Into<String>>(trigger: impl Into<String>, responses: Vec<(S, Vec<f64>)>) -> Self {
        ScriptRule {
            trigger: trigger.into(),
            responses: responses.into_iter().map(|(t, lp)| (t.into(), lp)).collect(),
        }
    }
}

/// Deterministic stand-in for a language model.
///
/// The first rule whose trigger appears in the prompt (after the last focus
/// marker, when one is set) answers. When more samples are requested than a
/// rule lists, its responses repeat cyclically.
#[derive(Debug, Clone, Default)]
pub struct ScriptedModel {
    rules: Vec<ScriptRule>,
    focus_marker: Option<String>,
}

impl ScriptedModel {
    pub fn new(rules: Vec<ScriptRule>) -> Self {
        ScriptedModel {
            rules,
            focus_marker: None,
        }
    }

    /// Match triggers only against text after the last occurrence of `marker`.
    pub fn with_focus_marker(mut self, marker: impl Into<String>) -> Self {
        self.focus_marker = Some(marker.into());
        self
    }

    fn focus<'a>(&self, prompt: &'a str) -> &'a str {
        match &self.focus_marker {
            Some(m) => prompt.rfind(m.as_str()).map_or(prompt, |i| &prompt[i..]),
            None => prompt,
        }
    }
}

impl CompletionModel for ScriptedModel {
    fn complete(&self, prompt: &str, cfg: &SamplingConfig) -> Result<Vec<Candidate>, GatewayError> {
        let focus = self.focus(prompt);
        let rule = self
            .rules
            .iter()
            .find(|r| focus.contains(&r.trigger))
            .ok_or_else(|| GatewayError::Transport("scripted model has no rule for prompt".into()))?;
        if rule.responses.is_empty() {
            return Err(GatewayError::Transport(format!(
                "rule `{}` has no responses",
                rule.trigger
            )));
        }
        rule.responses
            .iter()
            .cycle()
            .take(cfg.n_samples)
            .map(|(text, lp)| Candidate::new(text.clone(), lp.clone()))
            .collect()
    }
}
