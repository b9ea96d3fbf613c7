//! Chat-completion providers: an HTTP client, a replay provider for
//! recorded completions, and simple test doubles.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::Clock;
use crate::transport::{send_with_retry, HttpRequest, RetryPolicy, SendError, Transport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: Role::Assistant, content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
}

impl ChatRequest {
    pub fn new(messages: Vec<ChatMessage>) -> Self {
        Self { messages, temperature: 0.0 }
    }

    /// Every message body joined by blank lines.
    pub fn transcript(&self) -> String {
        self.messages.iter().map(|m| m.content.as_str()).collect::<Vec<_>>().join("\n\n")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LlmError {
    #[error("chat provider {model} unavailable: {reason}")]
    ProviderUnavailable { model: String, reason: String },
    #[error("malformed chat response: {0}")]
    MalformedResponse(String),
    #[error("no recorded completion matches request starting {preview:?}")]
    NoReplay { preview: String },
    #[error("replay fixtures: {0}")]
    Fixtures(String),
}

pub trait ChatProvider: Send + Sync {
    fn model_id(&self) -> &str;
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError>;
}

impl<P: ChatProvider + ?Sized> ChatProvider for Arc<P> {
    fn model_id(&self) -> &str {
        (**self).model_id()
    }
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        (**self).complete(request)
    }
}

/// `POST {base}/chat/completions` with `{model, messages, temperature}`;
/// the completion is `choices[0].message.content`.
pub struct HttpChatProvider {
    base_url: String,
    api_key: Option<String>,
    model: String,
    temperature: f64,
    transport: Arc<dyn Transport>,
    clock: Arc<dyn Clock>,
    retry: RetryPolicy,
}

impl HttpChatProvider {
    pub fn new(
        base_url: impl Into<String>,
        model: impl Into<String>,
        transport: Arc<dyn Transport>,
        clock: Arc<dyn Clock>,
    ) -> Self {
        Self {
            base_url: base_url.into(),
            api_key: None,
            model: model.into(),
            temperature: 0.0,
            transport,
            clock,
            retry: RetryPolicy::default(),
        }
    }

    pub fn with_api_key(mut self, key: Option<String>) -> Self {
        self.api_key = key;
        self
    }

    /// Overrides the temperature of every request.
    pub fn with_temperature(mut self, t: f64) -> Self {
        self.temperature = t;
        self
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChatMessage,
}

impl ChatProvider for HttpChatProvider {
    fn model_id(&self) -> &str {
        &self.model
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        let body = serde_json::json!({
            "model": self.model,
            "messages": request.messages,
            "temperature": self.temperature,
        });
        let url = format!("{}/chat/completions", self.base_url.trim_end_matches('/'));
        let mut req = HttpRequest::post_json(url, &body);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let unavailable = |reason: String| LlmError::ProviderUnavailable { model: self.model.clone(), reason };
        let resp =
            send_with_retry(self.transport.as_ref(), &req, self.retry, self.clock.as_ref()).map_err(|e| match e {
                SendError::Forbidden(t) => unavailable(t.to_string()),
                other => unavailable(other.to_string()),
            })?;
        if !resp.is_success() {
            return Err(unavailable(format!("HTTP {}", resp.status)));
        }
        let parsed: ChatResponse =
            serde_json::from_str(&resp.body).map_err(|e| LlmError::MalformedResponse(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| LlmError::MalformedResponse("no choices".into()))
    }
}

/// One recorded completion.
///
/// A record matches when its `messages` equal the request's, or, for
/// records without `messages`, when every string in `match` occurs in the
/// request transcript. The first matching record wins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub messages: Option<Vec<ChatMessage>>,
    #[serde(default, rename = "match", skip_serializing_if = "Vec::is_empty")]
    pub match_all: Vec<String>,
    pub completion: String,
}

/// Serves completions recorded in `*.jsonl` files.
#[derive(Debug)]
pub struct ReplayChatProvider {
    model: String,
    records: Vec<ReplayRecord>,
    log: Mutex<Vec<(ChatRequest, String)>>,
}

impl ReplayChatProvider {
    pub fn new(model: impl Into<String>, records: Vec<ReplayRecord>) -> Self {
        Self { model: model.into(), records, log: Mutex::new(Vec::new()) }
    }

    /// Loads every `*.jsonl` file under `dir`, in file-name order. Comment
    /// lines starting with `#` are skipped.
    pub fn from_dir(model: impl Into<String>, dir: &Path) -> Result<Self, LlmError> {
        let fixtures = |e: String| LlmError::Fixtures(format!("{}: {e}", dir.display()));
        let mut files: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|e| fixtures(e.to_string()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        files.sort();
        let mut records = Vec::new();
        for path in files {
            let f = fs::File::open(&path).map_err(|e| fixtures(e.to_string()))?;
            for (i, line) in BufReader::new(f).lines().enumerate() {
                let line = line.map_err(|e| fixtures(e.to_string()))?;
                let trimmed = line.trim();
                if trimmed.is_empty() || trimmed.starts_with('#') {
                    continue;
                }
                let rec: ReplayRecord = serde_json::from_str(trimmed)
                    .map_err(|e| LlmError::Fixtures(format!("{}:{}: {e}", path.display(), i + 1)))?;
                records.push(rec);
            }
        }
        Ok(Self::new(model, records))
    }

    /// Requests served so far with their completions, in call order.
    pub fn calls(&self) -> Vec<(ChatRequest, String)> {
        self.log.lock().unwrap().clone()
    }
}

impl ChatProvider for ReplayChatProvider {
    fn model_id(&self) -> &str {
        &self.model
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        let transcript = request.transcript();
        let hit = self.records.iter().find(|r| r.messages.as_ref() == Some(&request.messages)).or_else(|| {
            self.records.iter().find(|r| {
                r.messages.is_none()
                    && !r.match_all.is_empty()
                    && r.match_all.iter().all(|m| transcript.contains(m.as_str()))
            })
        });
        match hit {
            Some(r) => {
                self.log.lock().unwrap().push((request.clone(), r.completion.clone()));
                Ok(r.completion.clone())
            }
            None => Err(LlmError::NoReplay { preview: transcript.chars().take(120).collect() }),
        }
    }
}

/// Returns the last user message unchanged.
#[derive(Debug, Clone, Default)]
pub struct EchoChatProvider;

impl ChatProvider for EchoChatProvider {
    fn model_id(&self) -> &str {
        "echo"
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        Ok(request.messages.iter().rev().find(|m| m.role == Role::User).map(|m| m.content.clone()).unwrap_or_default())
    }
}

/// Hands out queued completions in order and records each request.
/// Once the queue is empty every call fails as unavailable.
#[derive(Debug, Default)]
pub struct ScriptedChatProvider {
    queue: Mutex<std::collections::VecDeque<Result<String, LlmError>>>,
    requests: Mutex<Vec<ChatRequest>>,
}

impl ScriptedChatProvider {
    pub fn new<I: IntoIterator<Item = Result<String, LlmError>>>(script: I) -> Self {
        Self { queue: Mutex::new(script.into_iter().collect()), requests: Mutex::default() }
    }

    pub fn replies<I: IntoIterator<Item = S>, S: Into<String>>(replies: I) -> Self {
        Self::new(replies.into_iter().map(|s| Ok(s.into())))
    }

    pub fn requests(&self) -> Vec<ChatRequest> {
        self.requests.lock().unwrap().clone()
    }
}

impl ChatProvider for ScriptedChatProvider {
    fn model_id(&self) -> &str {
        "scripted"
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        self.requests.lock().unwrap().push(request.clone());
        self.queue.lock().unwrap().pop_front().unwrap_or_else(|| {
            Err(LlmError::ProviderUnavailable { model: "scripted".into(), reason: "script exhausted".into() })
        })
    }
}
