//! Completion driver for OpenAI-compatible chat-completion endpoints.
//!
//! Requests use greedy decoding by default. Every response is written to a
//! content-addressed cache before it is returned, so reruns with the same
//! model, prompt and parameters never hit the network again.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use chrono::{DateTime, FixedOffset, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{CompletionRecord, TaskRecord};

pub const DEFAULT_INSTRUCTION_PREFIX: &str =
    "Provide a complete, self-contained solution. Respond with a single code block.";
pub const DEFAULT_MAX_ATTEMPTS: u32 = 3;

#[derive(Debug, Error)]
pub enum InferError {
    #[error("endpoint error for task {task_id}: {message}")]
    Endpoint {
        task_id: String,
        status: Option<u16>,
        message: String,
    },
    #[error("authentication rejected (HTTP {status}) for task {task_id}")]
    Auth { task_id: String, status: u16 },
    #[error("environment variable `{0}` holding the API key is not set")]
    MissingSecret(String),
    #[error("cache error at {path}: {source}")]
    Cache { path: PathBuf, source: io::Error },
    #[error("invalid generation parameters: {0}")]
    InvalidParams(String),
}

impl InferError {
    pub fn task_id(&self) -> Option<&str> {
        match self {
            InferError::Endpoint { task_id, .. } | InferError::Auth { task_id, .. } => Some(task_id),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEndpoint {
    pub model_id: String,
    /// Base URL up to and including the API version, e.g. `http://localhost:11434/v1`.
    pub base_url: String,
    /// Name of the environment variable that holds a bearer token.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: f64,
    #[serde(default = "default_attempts")]
    pub max_attempts: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
}

fn default_in_flight() -> usize {
    4
}
fn default_timeout_secs() -> f64 {
    120.0
}
fn default_attempts() -> u32 {
    DEFAULT_MAX_ATTEMPTS
}
fn default_backoff_ms() -> u64 {
    500
}

impl ModelEndpoint {
    pub fn new(model_id: impl Into<String>, base_url: impl Into<String>) -> Self {
        ModelEndpoint {
            model_id: model_id.into(),
            base_url: base_url.into(),
            api_key_env: None,
            max_in_flight: default_in_flight(),
            timeout_secs: default_timeout_secs(),
            max_attempts: default_attempts(),
            backoff_ms: default_backoff_ms(),
        }
    }

    fn url(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrefixPosition {
    #[default]
    Append,
    Prepend,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationParams {
    pub temperature: f64,
    pub max_tokens: u32,
    pub instruction_prefix: String,
    pub prefix_position: PrefixPosition,
}

impl Default for GenerationParams {
    fn default() -> Self {
        GenerationParams {
            temperature: 0.0,
            max_tokens: 1024,
            instruction_prefix: DEFAULT_INSTRUCTION_PREFIX.to_string(),
            prefix_position: PrefixPosition::Append,
        }
    }
}

impl GenerationParams {
    pub fn validate(&self) -> Result<(), InferError> {
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(InferError::InvalidParams(format!("temperature {}", self.temperature)));
        }
        if self.max_tokens == 0 {
            return Err(InferError::InvalidParams("max_tokens must be positive".into()));
        }
        if self.temperature != 0.0 {
            log::warn!(
                "temperature {} overrides greedy decoding; outputs will not be reproducible",
                self.temperature
            );
        }
        Ok(())
    }

    pub fn render_prompt(&self, prompt: &str) -> String {
        let prefix = self.instruction_prefix.trim();
        if prefix.is_empty() {
            return prompt.to_string();
        }
        match self.prefix_position {
            PrefixPosition::Append => format!("{prompt}\n\n{prefix}"),
            PrefixPosition::Prepend => format!("{prefix}\n\n{prompt}"),
        }
    }
}

/// Hex SHA-256 over the model, the rendered prompt and the decoding
/// parameters. Fields are length-prefixed so no two inputs share a digest
/// input.
pub fn cache_key(model_id: &str, rendered_prompt: &str, params: &GenerationParams) -> String {
    let mut h = Sha256::new();
    for part in [
        model_id.as_bytes(),
        rendered_prompt.as_bytes(),
        &params.temperature.to_bits().to_le_bytes(),
        &params.max_tokens.to_le_bytes(),
    ] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part);
    }
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub model_id: String,
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub response: String,
    pub created_at: DateTime<FixedOffset>,
}

/// Directory of `<hex digest>.json` files.
#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

impl ResponseCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, InferError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|source| InferError::Cache {
            path: dir.clone(),
            source,
        })?;
        Ok(ResponseCache { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    /// A missing or unreadable entry is a miss.
    pub fn get(&self, key: &str) -> Option<CacheEntry> {
        let text = fs::read_to_string(self.path(key)).ok()?;
        match serde_json::from_str::<CacheEntry>(&text) {
            Ok(e) if e.key == key => Some(e),
            _ => {
                log::warn!("ignoring corrupt cache entry {key}");
                None
            }
        }
    }

    /// Writes to a private temporary file and renames it into place, so
    /// readers never see a partial entry and concurrent writers of the same
    /// key simply replace each other.
    pub fn put(&self, entry: &CacheEntry) -> Result<(), InferError> {
        let target = self.path(&entry.key);
        let tmp = self.dir.join(format!(
            ".{}.{}.{}.tmp",
            entry.key,
            std::process::id(),
            TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        let write = || -> io::Result<()> {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(serde_json::to_string_pretty(entry)?.as_bytes())?;
            f.sync_all()?;
            fs::rename(&tmp, &target)
        };
        write().map_err(|source| {
            let _ = fs::remove_file(&tmp);
            InferError::Cache { path: target, source }
        })
    }
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatReply,
}

#[derive(Deserialize)]
struct ChatReply {
    #[serde(default)]
    content: Option<String>,
}

/// Sends requests to one endpoint, through an optional cache.
pub struct Generator {
    endpoint: ModelEndpoint,
    params: GenerationParams,
    cache: Option<ResponseCache>,
    agent: ureq::Agent,
    token: Option<String>,
    network_calls: AtomicUsize,
}

impl Generator {
    pub fn new(
        endpoint: ModelEndpoint,
        params: GenerationParams,
        cache: Option<ResponseCache>,
    ) -> Result<Self, InferError> {
        params.validate()?;
        if endpoint.max_in_flight == 0 {
            return Err(InferError::InvalidParams("max_in_flight must be at least 1".into()));
        }
        let token = match &endpoint.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| InferError::MissingSecret(var.clone()))?),
            None => None,
        };
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs_f64(endpoint.timeout_secs.max(0.001)))
            .build();
        Ok(Generator {
            endpoint,
            params,
            cache,
            agent,
            token,
            network_calls: AtomicUsize::new(0),
        })
    }

    /// Number of HTTP requests sent so far, retries included.
    pub fn network_calls(&self) -> usize {
        self.network_calls.load(Ordering::SeqCst)
    }

    pub fn generate(&self, task: &TaskRecord) -> Result<CompletionRecord, InferError> {
        let prompt = self.params.render_prompt(&task.prompt);
        let key = cache_key(&self.endpoint.model_id, &prompt, &self.params);
        if let Some(hit) = self.cache.as_ref().and_then(|c| c.get(&key)) {
            return Ok(self.record(task, hit.response, hit.created_at));
        }
        let response = self.request_with_retries(&task.task_id, &prompt)?;
        let created_at = Utc::now().fixed_offset();
        if let Some(cache) = &self.cache {
            cache.put(&CacheEntry {
                key,
                model_id: self.endpoint.model_id.clone(),
                prompt,
                temperature: self.params.temperature,
                max_tokens: self.params.max_tokens,
                response: response.clone(),
                created_at,
            })?;
        }
        Ok(self.record(task, response, created_at))
    }

    fn record(&self, task: &TaskRecord, response: String, created_at: DateTime<FixedOffset>) -> CompletionRecord {
        CompletionRecord {
            task_id: task.task_id.clone(),
            model_id: self.endpoint.model_id.clone(),
            response,
            temperature: self.params.temperature,
            created_at,
        }
    }

    fn request_with_retries(&self, task_id: &str, prompt: &str) -> Result<String, InferError> {
        let attempts = self.endpoint.max_attempts.max(1);
        let mut last = None;
        for attempt in 0..attempts {
            if attempt > 0 {
                let backoff = self.endpoint.backoff_ms.saturating_mul(1 << (attempt - 1).min(16));
                thread::sleep(Duration::from_millis(backoff));
            }
            match self.request_once(task_id, prompt) {
                Ok(text) => return Ok(text),
                Err(e @ InferError::Auth { .. }) => return Err(e),
                Err(e @ InferError::Endpoint { status: Some(s), .. }) if !retryable(s) => return Err(e),
                Err(e) => {
                    log::warn!("attempt {} of {attempts}: {e}", attempt + 1);
                    last = Some(e);
                }
            }
        }
        Err(last.expect("at least one attempt"))
    }

    fn request_once(&self, task_id: &str, prompt: &str) -> Result<String, InferError> {
        let body = ChatRequest {
            model: &self.endpoint.model_id,
            messages: vec![ChatMessage {
                role: "user",
                content: prompt,
            }],
            temperature: self.params.temperature,
            max_tokens: self.params.max_tokens,
        };
        let mut req = self.agent.post(&self.endpoint.url());
        if let Some(token) = &self.token {
            req = req.set("Authorization", &format!("Bearer {token}"));
        }
        self.network_calls.fetch_add(1, Ordering::SeqCst);
        let endpoint_err = |status: Option<u16>, message: String| InferError::Endpoint {
            task_id: task_id.to_string(),
            status,
            message,
        };
        let resp = match req.send_json(&body) {
            Ok(r) => r,
            Err(ureq::Error::Status(s @ (401 | 403), _)) => {
                return Err(InferError::Auth {
                    task_id: task_id.to_string(),
                    status: s,
                })
            }
            Err(ureq::Error::Status(s, _)) => return Err(endpoint_err(Some(s), format!("HTTP {s}"))),
            Err(ureq::Error::Transport(t)) => return Err(endpoint_err(None, t.to_string())),
        };
        let parsed: ChatResponse = resp
            .into_json()
            .map_err(|e| endpoint_err(None, format!("unreadable response: {e}")))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| endpoint_err(None, "response has no message content".into()))
    }

    /// Runs every task with at most `max_in_flight` requests outstanding.
    /// Records come back sorted by task id; failures are collected, not fatal.
    pub fn generate_corpus(&self, tasks: &[TaskRecord]) -> CorpusRun {
        let next = AtomicUsize::new(0);
        let results = Mutex::new(Vec::with_capacity(tasks.len()));
        let workers = self.endpoint.max_in_flight.min(tasks.len()).max(1);
        thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(task) = tasks.get(i) else { break };
                    let r = self.generate(task);
                    results.lock().unwrap_or_else(|e| e.into_inner()).push((i, r));
                });
            }
        });
        let mut results = results.into_inner().unwrap_or_else(|e| e.into_inner());
        results.sort_by(|a, b| tasks[a.0].task_id.cmp(&tasks[b.0].task_id).then(a.0.cmp(&b.0)));
        let mut run = CorpusRun::default();
        for (i, r) in results {
            match r {
                Ok(rec) => run.records.push(rec),
                Err(e) => {
                    log::error!("{e}");
                    run.failures.push(GenerationFailure {
                        task_id: tasks[i].task_id.clone(),
                        error: e.to_string(),
                    });
                }
            }
        }
        run
    }
}

fn retryable(status: u16) -> bool {
    status == 408 || status == 429 || status >= 500
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GenerationFailure {
    pub task_id: String,
    pub error: String,
}

#[derive(Debug, Default)]
pub struct CorpusRun {
    pub records: Vec<CompletionRecord>,
    pub failures: Vec<GenerationFailure>,
}
