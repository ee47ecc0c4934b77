//! Completion backends: a scripted stub for offline runs and an HTTP client
//! for chat-completion endpoints.

use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use super::{DecodingParams, Stage};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("script exhausted: no entry left for stage {stage} column {column:?}")]
    ScriptExhausted { stage: Stage, column: Option<String> },
    #[error("invalid script: {0}")]
    Script(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("HTTP status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed completion response: {0}")]
    Malformed(String),
}

/// One prompt sent to a backend. `stage` and `column` let test doubles key
/// their answers; network backends only read `prompt` and `params`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRequest<'a> {
    pub prompt: &'a str,
    pub params: &'a DecodingParams,
    pub stage: Stage,
    pub column: Option<&'a str>,
}

pub trait CompletionBackend: Send + Sync {
    fn name(&self) -> &str;
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, BackendError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub stage: Stage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column: Option<String>,
    /// Only match prompts containing this text.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contains: Option<String>,
    pub response: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Script {
    pub name: String,
    pub entries: Vec<ScriptEntry>,
}

/// Replays canned responses. Each request consumes the first unused entry
/// whose stage, column and `contains` filter all match.
#[derive(Debug)]
pub struct ScriptedBackend {
    name: String,
    entries: Vec<ScriptEntry>,
    used: Mutex<Vec<bool>>,
}

impl ScriptedBackend {
    pub fn new(script: Script) -> Self {
        let used = Mutex::new(vec![false; script.entries.len()]);
        Self {
            name: script.name,
            entries: script.entries,
            used,
        }
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, BackendError> {
        let script: Script = serde_json::from_slice(bytes).map_err(|e| BackendError::Script(e.to_string()))?;
        Ok(Self::new(script))
    }

    pub fn from_path(path: &Path) -> Result<Self, BackendError> {
        let bytes = std::fs::read(path).map_err(|e| BackendError::Script(format!("{}: {e}", path.display())))?;
        Self::from_json(&bytes)
    }

    /// Entries not consumed so far.
    pub fn remaining(&self) -> usize {
        self.used.lock().expect("script lock").iter().filter(|u| !**u).count()
    }
}

impl CompletionBackend for ScriptedBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, BackendError> {
        let mut used = self.used.lock().expect("script lock");
        let hit = self.entries.iter().enumerate().find(|(i, e)| {
            !used[*i]
                && e.stage == request.stage
                && e.column.as_deref().is_none_or(|c| Some(c) == request.column)
                && e.contains.as_deref().is_none_or(|s| request.prompt.contains(s))
        });
        match hit {
            Some((i, e)) => {
                used[i] = true;
                Ok(e.response.clone())
            }
            None => Err(BackendError::ScriptExhausted {
                stage: request.stage,
                column: request.column.map(str::to_string),
            }),
        }
    }
}

pub const ENV_URL: &str = "DCFLOW_LLM_URL";
pub const ENV_MODEL: &str = "DCFLOW_LLM_MODEL";
pub const ENV_KEY: &str = "DCFLOW_LLM_KEY";

#[derive(Debug, Clone, PartialEq)]
pub struct HttpConfig {
    pub base_url: String,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
}

impl HttpConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model: model.into(),
            api_key: None,
            timeout: Duration::from_secs(60),
        }
    }

    pub fn from_env() -> Result<Self, BackendError> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Result<Self, BackendError> {
        let url = get(ENV_URL)
            .filter(|u| !u.trim().is_empty())
            .ok_or_else(|| BackendError::Config(format!("{ENV_URL} is not set")))?;
        let model = get(ENV_MODEL).unwrap_or_else(|| "default".to_string());
        let mut cfg = Self::new(url, model);
        cfg.api_key = get(ENV_KEY).filter(|k| !k.is_empty());
        Ok(cfg)
    }

    fn endpoint(&self) -> String {
        let base = self.base_url.trim_end_matches('/');
        if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        }
    }
}

/// Chat-completion client. Safe to share across threads; each request
/// carries its own timeout.
pub struct HttpBackend {
    config: HttpConfig,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        Ok(Self { config, client })
    }

    pub fn request_body(&self, prompt: &str, params: &DecodingParams) -> Value {
        json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": params.temperature,
            "top_k": params.top_k,
            "top_p": params.top_p,
            "max_tokens": params.max_output_tokens,
            "stop": params.stop,
        })
    }

    fn send_once(&self, body: &Value) -> Result<Value, BackendError> {
        let mut req = self.client.post(self.config.endpoint()).json(body);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            let body = resp.text().unwrap_or_default();
            return Err(BackendError::Status {
                status: status.as_u16(),
                body: body.chars().take(500).collect(),
            });
        }
        resp.json::<Value>().map_err(|e| BackendError::Malformed(e.to_string()))
    }
}

impl CompletionBackend for HttpBackend {
    fn name(&self) -> &str {
        &self.config.model
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, BackendError> {
        let body = self.request_body(request.prompt, request.params);
        let value = match self.send_once(&body) {
            Err(BackendError::Status { status, .. }) if status >= 500 => {
                tracing::warn!(status, "server error, retrying once");
                self.send_once(&body)?
            }
            other => other?,
        };
        value
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| BackendError::Malformed("no choices[0].message.content".into()))
    }
}
