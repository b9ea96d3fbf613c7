//! Minimal blocking HTTP layer shared by the Wikipedia client and the
//! embedding and chat providers.
//!
//! Everything above this module talks to a [`Transport`], so tests and
//! offline runs swap in [`OfflineTransport`] (every request is an error) or
//! [`RecordedTransport`] (replays stored request/response pairs).

use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::Clock;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    Get,
    Post,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpRequest {
    pub method: Method,
    pub url: String,
    pub headers: Vec<(String, String)>,
    pub body: Option<String>,
}

impl HttpRequest {
    pub fn get(url: impl Into<String>) -> Self {
        Self { method: Method::Get, url: url.into(), headers: Vec::new(), body: None }
    }

    pub fn post_json(url: impl Into<String>, body: &serde_json::Value) -> Self {
        Self {
            method: Method::Post,
            url: url.into(),
            headers: vec![("Content-Type".into(), "application/json".into())],
            body: Some(body.to_string()),
        }
    }

    pub fn header(mut self, name: impl Into<String>, value: impl Into<String>) -> Self {
        self.headers.push((name.into(), value.into()));
        self
    }

    /// Host component of the URL, used to key per-host politeness.
    pub fn host(&self) -> Option<String> {
        url::Url::parse(&self.url).ok()?.host_str().map(str::to_owned)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

impl HttpResponse {
    pub fn is_success(&self) -> bool {
        (200..300).contains(&self.status)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TransportError {
    #[error("network access is disabled (offline mode): {method:?} {url}")]
    Offline { method: Method, url: String },
    #[error("no recorded response for {method:?} {url}")]
    NoRecording { method: Method, url: String },
    #[error("request to {url} failed: {message}")]
    Io { url: String, message: String },
}

pub trait Transport: Send + Sync {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError>;
}

impl<T: Transport + ?Sized> Transport for std::sync::Arc<T> {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        (**self).send(request)
    }
}

impl<T: Transport + ?Sized> Transport for &T {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        (**self).send(request)
    }
}

/// Real network access through `ureq`.
pub struct UreqTransport {
    agent: ureq::Agent,
}

impl UreqTransport {
    pub fn new(timeout: Duration) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(timeout)
            .user_agent(concat!("kgground/", env!("CARGO_PKG_VERSION")))
            .build();
        Self { agent }
    }
}

impl Default for UreqTransport {
    fn default() -> Self {
        Self::new(Duration::from_secs(30))
    }
}

impl Transport for UreqTransport {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let mut call = match request.method {
            Method::Get => self.agent.get(&request.url),
            Method::Post => self.agent.post(&request.url),
        };
        for (name, value) in &request.headers {
            call = call.set(name, value);
        }
        let result = match &request.body {
            Some(body) => call.send_string(body),
            None => call.call(),
        };
        let io = |message: String| TransportError::Io { url: request.url.clone(), message };
        match result {
            Ok(resp) => {
                let status = resp.status();
                let body = resp.into_string().map_err(|e| io(e.to_string()))?;
                Ok(HttpResponse { status, body })
            }
            Err(ureq::Error::Status(status, resp)) => {
                Ok(HttpResponse { status, body: resp.into_string().unwrap_or_default() })
            }
            Err(e) => Err(io(e.to_string())),
        }
    }
}

/// Refuses every request. Counts attempts so tests can assert none happened.
#[derive(Debug, Default)]
pub struct OfflineTransport {
    attempts: AtomicUsize,
}

impl OfflineTransport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn attempts(&self) -> usize {
        self.attempts.load(Ordering::SeqCst)
    }
}

impl Transport for OfflineTransport {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        self.attempts.fetch_add(1, Ordering::SeqCst);
        Err(TransportError::Offline { method: request.method, url: request.url.clone() })
    }
}

/// One stored exchange, one per line in a `.jsonl` recording file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recording {
    pub method: Method,
    pub url: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_body: Option<serde_json::Value>,
    pub status: u16,
    pub response: serde_json::Value,
}

#[derive(Debug, Error)]
pub enum RecordingLoadError {
    #[error("cannot read recordings at {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: malformed recording: {message}")]
    Malformed { path: PathBuf, line: usize, message: String },
}

fn body_key(body: Option<&str>) -> Option<serde_json::Value> {
    body.map(|b| serde_json::from_str(b).unwrap_or_else(|_| serde_json::Value::String(b.into())))
}

/// Serves recorded responses, matched on method, URL and JSON-equal body.
#[derive(Debug, Default)]
pub struct RecordedTransport {
    recordings: Vec<Recording>,
    requests: AtomicUsize,
    misses: Mutex<Vec<String>>,
}

impl RecordedTransport {
    pub fn new(recordings: Vec<Recording>) -> Self {
        Self { recordings, ..Self::default() }
    }

    /// Loads every `*.jsonl` file in `dir`, in file-name order.
    pub fn from_dir(dir: &Path) -> Result<Self, RecordingLoadError> {
        let io = |source| RecordingLoadError::Io { path: dir.to_path_buf(), source };
        let mut files: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(io)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        files.sort();
        let mut recordings = Vec::new();
        for path in files {
            recordings.extend(read_recordings(&path)?);
        }
        Ok(Self::new(recordings))
    }

    /// Number of requests served, hits and misses alike.
    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }

    pub fn misses(&self) -> Vec<String> {
        self.misses.lock().unwrap().clone()
    }
}

fn read_recordings(path: &Path) -> Result<Vec<Recording>, RecordingLoadError> {
    let file = fs::File::open(path).map_err(|source| RecordingLoadError::Io { path: path.to_path_buf(), source })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| RecordingLoadError::Io { path: path.to_path_buf(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| RecordingLoadError::Malformed {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

impl Transport for RecordedTransport {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        self.requests.fetch_add(1, Ordering::SeqCst);
        let body = body_key(request.body.as_deref());
        let hit = self
            .recordings
            .iter()
            .find(|r| r.method == request.method && r.url == request.url && r.request_body == body);
        match hit {
            Some(rec) => {
                let body = match &rec.response {
                    serde_json::Value::String(s) => s.clone(),
                    other => other.to_string(),
                };
                Ok(HttpResponse { status: rec.status, body })
            }
            None => {
                self.misses.lock().unwrap().push(request.url.clone());
                Err(TransportError::NoRecording { method: request.method, url: request.url.clone() })
            }
        }
    }
}

/// Forwards to an inner transport and appends every exchange to a file in
/// the [`RecordedTransport`] format.
pub struct RecordingTransport<T> {
    inner: T,
    sink: Mutex<fs::File>,
}

impl<T: Transport> RecordingTransport<T> {
    pub fn new(inner: T, path: &Path) -> std::io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self { inner, sink: Mutex::new(file) })
    }
}

impl<T: Transport> Transport for RecordingTransport<T> {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let response = self.inner.send(request)?;
        let rec = Recording {
            method: request.method,
            url: request.url.clone(),
            request_body: body_key(request.body.as_deref()),
            status: response.status,
            response: serde_json::from_str(&response.body)
                .unwrap_or_else(|_| serde_json::Value::String(response.body.clone())),
        };
        let mut sink = self.sink.lock().unwrap();
        let line = serde_json::to_string(&rec).expect("recording serializes");
        writeln!(sink, "{line}").map_err(|e| TransportError::Io {
            url: request.url.clone(),
            message: format!("recording write failed: {e}"),
        })?;
        Ok(response)
    }
}

/// Attempt count and backoff schedule for transient failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub initial_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { attempts: 3, initial_backoff: Duration::from_secs(1) }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SendError {
    #[error(transparent)]
    Forbidden(TransportError),
    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: String },
}

/// Sends with retries on I/O errors and 429/5xx responses, sleeping
/// `initial_backoff * 2^n` between attempts. Offline and missing-recording
/// errors are returned immediately.
pub fn send_with_retry(
    transport: &dyn Transport,
    request: &HttpRequest,
    policy: RetryPolicy,
    clock: &dyn Clock,
) -> Result<HttpResponse, SendError> {
    let attempts = policy.attempts.max(1);
    let mut backoff = policy.initial_backoff;
    let mut last = String::new();
    for attempt in 1..=attempts {
        match transport.send(request) {
            Ok(resp) if resp.status == 429 || resp.status >= 500 => {
                last = format!("HTTP {}", resp.status);
            }
            Ok(resp) => return Ok(resp),
            Err(e @ (TransportError::Offline { .. } | TransportError::NoRecording { .. })) => {
                return Err(SendError::Forbidden(e));
            }
            Err(e) => last = e.to_string(),
        }
        if attempt < attempts {
            clock.sleep(backoff);
            backoff *= 2;
        }
    }
    Err(SendError::Exhausted { attempts, last })
}
