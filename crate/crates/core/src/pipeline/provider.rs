//! Chat-completion providers: a transcript replayer for deterministic runs
//! and an OpenAI-compatible HTTP client.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use super::prompts::Stage;

pub const DEFAULT_REQUEST_TIMEOUT: Duration = Duration::from_secs(120);

#[derive(Error, Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProviderError {
    #[error("API error {status}: {body}")]
    ApiError { status: u16, body: String },
    #[error("request timed out")]
    Timeout,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("provider misconfigured: {0}")]
    Config(String),
}

/// What is being asked, so that replayed transcripts can be looked up.
#[derive(Clone, Debug)]
pub struct CompletionRequest<'a> {
    pub prompt: &'a str,
    pub instance: &'a str,
    pub strategy: &'a str,
    pub stage: Stage,
    /// 1-based attempt index; 0 for the plan stage.
    pub attempt: u32,
}

pub trait CompletionProvider: Send + Sync {
    fn name(&self) -> &str;
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ProviderError>;
}

/// Key of a recorded plan response. Plans are shared by every strategy that
/// asks this provider for one.
pub fn plan_key(instance: &str) -> String {
    format!("{instance}|plan")
}

pub fn replay_key(instance: &str, strategy: &str, attempt: u32) -> String {
    format!("{instance}|{strategy}|{attempt}")
}

/// Fallback key answering every attempt of one (instance, strategy) cell.
pub fn replay_any_key(instance: &str, strategy: &str) -> String {
    format!("{instance}|{strategy}|*")
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayBundle {
    pub name: String,
    pub responses: BTreeMap<String, String>,
}

#[derive(Clone, Debug)]
pub struct ReplayProvider {
    bundle: ReplayBundle,
}

impl ReplayProvider {
    pub fn new(name: impl Into<String>) -> Self {
        ReplayProvider {
            bundle: ReplayBundle {
                name: name.into(),
                responses: BTreeMap::new(),
            },
        }
    }

    pub fn from_bundle(bundle: ReplayBundle) -> Self {
        ReplayProvider { bundle }
    }

    pub fn load(path: &Path) -> Result<Self, ProviderError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ProviderError::Config(format!("cannot read {}: {e}", path.display())))?;
        let bundle = serde_json::from_str(&text)
            .map_err(|e| ProviderError::Config(format!("bad replay bundle {}: {e}", path.display())))?;
        Ok(ReplayProvider { bundle })
    }

    pub fn record(&mut self, key: impl Into<String>, response: impl Into<String>) -> &mut Self {
        self.bundle.responses.insert(key.into(), response.into());
        self
    }

    pub fn bundle(&self) -> &ReplayBundle {
        &self.bundle
    }
}

impl CompletionProvider for ReplayProvider {
    fn name(&self) -> &str {
        &self.bundle.name
    }

    fn complete(&self, r: &CompletionRequest<'_>) -> Result<String, ProviderError> {
        let keys = if r.stage == Stage::Plan {
            vec![plan_key(r.instance)]
        } else {
            vec![
                replay_key(r.instance, r.strategy, r.attempt),
                replay_any_key(r.instance, r.strategy),
            ]
        };
        keys.iter()
            .find_map(|k| self.bundle.responses.get(k))
            .cloned()
            .ok_or_else(|| ProviderError::ApiError {
                status: 404,
                body: format!("no recorded response for {}", keys[0]),
            })
    }
}

/// Connection settings of a live provider.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProviderSpec {
    pub name: String,
    /// Base URL; `/chat/completions` is appended.
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the bearer token.
    pub auth_env: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_timeout_secs")]
    pub request_timeout_secs: u64,
    #[serde(default)]
    pub requests_per_minute: Option<u32>,
}

fn default_timeout_secs() -> u64 {
    DEFAULT_REQUEST_TIMEOUT.as_secs()
}

/// Token bucket shared by every worker using one provider.
#[derive(Debug)]
pub struct TokenBucket {
    capacity: f64,
    per_sec: f64,
    state: Mutex<(f64, Instant)>,
}

impl TokenBucket {
    pub fn per_minute(n: u32) -> Self {
        let capacity = f64::from(n.max(1));
        TokenBucket {
            capacity,
            per_sec: capacity / 60.0,
            state: Mutex::new((capacity, Instant::now())),
        }
    }

    /// Takes a token if one is available, otherwise returns how long to wait.
    pub fn try_take(&self) -> Result<(), Duration> {
        let mut s = self.state.lock().unwrap_or_else(|p| p.into_inner());
        let now = Instant::now();
        s.0 = (s.0 + now.duration_since(s.1).as_secs_f64() * self.per_sec).min(self.capacity);
        s.1 = now;
        if s.0 >= 1.0 {
            s.0 -= 1.0;
            Ok(())
        } else {
            Err(Duration::from_secs_f64((1.0 - s.0) / self.per_sec))
        }
    }

    pub fn acquire(&self) {
        while let Err(wait) = self.try_take() {
            std::thread::sleep(wait);
        }
    }
}

pub struct OpenAiCompatibleProvider {
    spec: ProviderSpec,
    token: String,
    client: reqwest::blocking::Client,
    bucket: Option<TokenBucket>,
}

impl OpenAiCompatibleProvider {
    pub fn new(spec: ProviderSpec) -> Result<Self, ProviderError> {
        if spec.temperature != 0.0 {
            return Err(ProviderError::Config(format!(
                "{}: temperature must be 0, got {}",
                spec.name, spec.temperature
            )));
        }
        let token = std::env::var(&spec.auth_env)
            .map_err(|_| ProviderError::Config(format!("environment variable {} is not set", spec.auth_env)))?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(spec.request_timeout_secs))
            .build()
            .map_err(|e| ProviderError::Config(e.to_string()))?;
        let bucket = spec.requests_per_minute.map(TokenBucket::per_minute);
        Ok(OpenAiCompatibleProvider {
            spec,
            token,
            client,
            bucket,
        })
    }
}

impl CompletionProvider for OpenAiCompatibleProvider {
    fn name(&self) -> &str {
        &self.spec.name
    }

    fn complete(&self, r: &CompletionRequest<'_>) -> Result<String, ProviderError> {
        if let Some(b) = &self.bucket {
            b.acquire();
        }
        let url = format!("{}/chat/completions", self.spec.endpoint.trim_end_matches('/'));
        let body = json!({
            "model": self.spec.model,
            "temperature": 0,
            "messages": [{"role": "user", "content": r.prompt}],
        });
        let resp = self
            .client
            .post(url)
            .bearer_auth(&self.token)
            .json(&body)
            .send()
            .map_err(|e| {
                if e.is_timeout() {
                    ProviderError::Timeout
                } else {
                    ProviderError::Transport(e.to_string())
                }
            })?;
        let status = resp.status();
        let text = resp.text().map_err(|e| ProviderError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(ProviderError::ApiError {
                status: status.as_u16(),
                body: text,
            });
        }
        let v: Value = serde_json::from_str(&text).map_err(|e| ProviderError::ApiError {
            status: status.as_u16(),
            body: format!("unreadable response body: {e}"),
        })?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| ProviderError::ApiError {
                status: status.as_u16(),
                body: format!("response has no message content: {text}"),
            })
    }
}
