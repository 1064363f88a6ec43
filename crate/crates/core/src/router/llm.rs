//! LLM-backed router over a generic chat-completion HTTP contract, plus a
//! replay backend that serves recorded transcripts.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::Deserialize;
use serde_json::{json, Value};

use crate::corpus::QueryRecord;
use crate::error::RouterError;

use super::{parse_router_response, RouterPrompt, Router, RoutingDecision};

pub const ENV_BASE_URL: &str = "VIDROUTE_LLM_BASE_URL";
pub const ENV_MODEL: &str = "VIDROUTE_LLM_MODEL";
pub const ENV_API_KEY: &str = "VIDROUTE_LLM_API_KEY";

#[derive(Clone, Debug, PartialEq)]
pub struct LlmSettings {
    /// Base URL up to and including the API version, e.g. `https://host/v1`.
    pub base_url: Option<String>,
    pub model: String,
    pub timeout: Duration,
    pub max_retries: u32,
    pub initial_backoff: Duration,
    pub max_in_flight: usize,
}

impl Default for LlmSettings {
    fn default() -> Self {
        Self {
            base_url: None,
            model: "gpt-4.1".to_owned(),
            timeout: Duration::from_secs(30),
            max_retries: 3,
            initial_backoff: Duration::from_millis(250),
            max_in_flight: 8,
        }
    }
}

impl LlmSettings {
    /// Fills base URL and model from the environment where set.
    pub fn with_env(mut self) -> Self {
        if let Ok(url) = std::env::var(ENV_BASE_URL) {
            if !url.trim().is_empty() {
                self.base_url = Some(url);
            }
        }
        if let Ok(model) = std::env::var(ENV_MODEL) {
            if !model.trim().is_empty() {
                self.model = model;
            }
        }
        self
    }
}

/// Source of raw routing transcripts.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, query: &QueryRecord, prompt: &RouterPrompt) -> Result<String, RouterError>;
}

/// Append-only JSONL log of requests and responses. Never records credentials.
pub struct AuditLog {
    file: Mutex<File>,
}

impl AuditLog {
    pub fn open(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self { file: Mutex::new(file) })
    }

    pub fn record(&self, entry: &Value) {
        let line = entry.to_string();
        let mut f = self.file.lock().unwrap_or_else(|e| e.into_inner());
        if let Err(e) = writeln!(f, "{line}") {
            log::warn!("failed to write audit log entry: {e}");
        }
    }
}

pub struct HttpChatBackend {
    client: reqwest::blocking::Client,
    endpoint: String,
    settings: LlmSettings,
    api_key: Option<String>,
    audit: Option<AuditLog>,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    #[serde(default)]
    content: Value,
}

/// First text content of a chat-completion response: a plain string or the
/// first `text` part of a content array.
fn first_text_content(body: &str) -> Result<String, String> {
    let resp: ChatResponse = serde_json::from_str(body).map_err(|e| format!("unexpected response body: {e}"))?;
    let choice = resp.choices.into_iter().next().ok_or("response has no choices")?;
    match choice.message.content {
        Value::String(s) => Ok(s),
        Value::Array(parts) => parts
            .iter()
            .find_map(|p| p.get("text").and_then(Value::as_str).map(str::to_owned))
            .ok_or_else(|| "response content has no text part".to_owned()),
        _ => Err("response content is not text".to_owned()),
    }
}

impl HttpChatBackend {
    /// Builds a backend from settings; the API key comes from the
    /// environment only.
    pub fn new(settings: LlmSettings, audit: Option<AuditLog>) -> Result<Self, RouterError> {
        let base = settings
            .base_url
            .clone()
            .ok_or_else(|| RouterError::NotConfigured(format!("set {ENV_BASE_URL} to the endpoint base URL")))?;
        let api_key = std::env::var(ENV_API_KEY).ok().filter(|k| !k.is_empty());
        let client = reqwest::blocking::Client::builder()
            .timeout(settings.timeout)
            .build()
            .map_err(|e| RouterError::NotConfigured(e.to_string()))?;
        let endpoint = format!("{}/chat/completions", base.trim_end_matches('/'));
        Ok(Self { client, endpoint, settings, api_key, audit })
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn attempt(&self, body: &Value) -> Result<String, (bool, String)> {
        let mut req = self.client.post(&self.endpoint).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| (true, e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| (true, e.to_string()))?;
        if status.is_success() {
            first_text_content(&text).map_err(|e| (false, e))
        } else {
            let retryable = status.as_u16() == 429 || status.is_server_error();
            Err((retryable, format!("HTTP {status}: {}", truncate(&text, 200))))
        }
    }
}

fn truncate(s: &str, max: usize) -> &str {
    match s.char_indices().nth(max) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

impl ChatBackend for HttpChatBackend {
    fn complete(&self, query: &QueryRecord, prompt: &RouterPrompt) -> Result<String, RouterError> {
        let body = json!({
            "model": self.settings.model,
            "messages": [
                {"role": "system", "content": prompt.system},
                {"role": "user", "content": prompt.user},
            ],
            "temperature": 0,
        });
        let attempts = self.settings.max_retries + 1;
        let mut backoff = self.settings.initial_backoff;
        let mut last_error = String::new();
        for attempt in 1..=attempts {
            let result = self.attempt(&body);
            if let Some(audit) = &self.audit {
                let outcome = match &result {
                    Ok(content) => json!({"response": content}),
                    Err((_, e)) => json!({"error": e}),
                };
                audit.record(&json!({
                    "query_id": query.query_id,
                    "attempt": attempt,
                    "endpoint": self.endpoint,
                    "request": body,
                    "outcome": outcome,
                }));
            }
            match result {
                Ok(content) => return Ok(content),
                Err((retryable, e)) => {
                    last_error = e;
                    if !retryable || attempt == attempts {
                        return Err(RouterError::Backend { attempts: attempt, message: last_error });
                    }
                    std::thread::sleep(backoff);
                    backoff = backoff.saturating_mul(2);
                }
            }
        }
        Err(RouterError::Backend { attempts, message: last_error })
    }
}

#[derive(Deserialize)]
struct ReplayLine {
    query_id: String,
    raw_response: String,
}

/// Serves canned transcripts keyed by query id.
pub struct ReplayBackend {
    responses: HashMap<String, String>,
}

impl ReplayBackend {
    pub fn new(responses: impl IntoIterator<Item = (String, String)>) -> Self {
        Self { responses: responses.into_iter().collect() }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RouterError> {
        let path = path.as_ref();
        let err = |message: String| RouterError::Fixture { path: PathBuf::from(path), message };
        let file = File::open(path).map_err(|e| err(e.to_string()))?;
        let mut responses = HashMap::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| err(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: ReplayLine =
                serde_json::from_str(&line).map_err(|e| err(format!("line {}: {e}", i + 1)))?;
            responses.insert(entry.query_id, entry.raw_response);
        }
        Ok(Self { responses })
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl ChatBackend for ReplayBackend {
    fn complete(&self, query: &QueryRecord, _prompt: &RouterPrompt) -> Result<String, RouterError> {
        self.responses.get(&query.query_id).cloned().ok_or_else(|| RouterError::MissingReplay(query.query_id.clone()))
    }
}

/// Counting gate bounding concurrent backend calls.
struct InFlight {
    max: usize,
    active: Mutex<usize>,
    freed: Condvar,
}

impl InFlight {
    fn new(max: usize) -> Self {
        Self { max: max.max(1), active: Mutex::new(0), freed: Condvar::new() }
    }

    fn run<T>(&self, f: impl FnOnce() -> T) -> T {
        {
            let mut n = self.active.lock().unwrap_or_else(|e| e.into_inner());
            while *n >= self.max {
                n = self.freed.wait(n).unwrap_or_else(|e| e.into_inner());
            }
            *n += 1;
        }
        let out = f();
        *self.active.lock().unwrap_or_else(|e| e.into_inner()) -= 1;
        self.freed.notify_one();
        out
    }
}

pub struct LlmRouter<B> {
    backend: B,
    gate: InFlight,
    calls: AtomicUsize,
    label: &'static str,
}

impl<B: ChatBackend> LlmRouter<B> {
    pub fn new(backend: B, max_in_flight: usize) -> Self {
        Self { backend, gate: InFlight::new(max_in_flight), calls: AtomicUsize::new(0), label: "llm" }
    }

    /// Same router reported under a different backend label.
    pub fn labelled(mut self, label: &'static str) -> Self {
        self.label = label;
        self
    }
}

impl<B: ChatBackend> Router for LlmRouter<B> {
    fn route(&self, query: &QueryRecord) -> Result<RoutingDecision, RouterError> {
        let prompt = RouterPrompt::for_query(&query.text);
        self.calls.fetch_add(1, Ordering::Relaxed);
        let raw = self.gate.run(|| self.backend.complete(query, &prompt))?;
        Ok(parse_router_response(&raw, &query.text))
    }

    fn name(&self) -> &'static str {
        self.label
    }

    fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}
