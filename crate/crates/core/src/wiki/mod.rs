//! MediaWiki ingestion: page fetching with an on-disk cache, one-hop link
//! expansion from seed topics, and corpus building.

mod cache;
mod limiter;
mod markup;

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub use cache::{cache_file_stem, write_atomic, PageCache};
pub use limiter::RateLimiter;
pub use markup::strip_markup;

use crate::clock::Clock;
use crate::text::{key_form, normalize};
use crate::transport::{send_with_retry, HttpRequest, RetryPolicy, SendError, Transport, TransportError};

pub const DEFAULT_API_BASE: &str = "https://en.wikipedia.org/w/api.php";
pub const DEFAULT_MAX_LINKS_PER_PAGE: usize = 200;
pub const MIN_REQUEST_INTERVAL: Duration = Duration::from_millis(100);
/// Namespaces whose links are never article candidates.
pub const EXCLUDED_NAMESPACES: [&str; 13] = [
    "File",
    "Image",
    "Category",
    "Help",
    "Template",
    "Portal",
    "Wikipedia",
    "Talk",
    "User",
    "Special",
    "Draft",
    "Module",
    "MediaWiki",
];
const MAX_CONTINUATIONS: usize = 50;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageDocument {
    pub title: String,
    pub url: String,
    pub plain_text: String,
    pub links: Vec<String>,
    pub retrieved_at: DateTime<Utc>,
}

#[derive(Debug, Error)]
pub enum WikiError {
    #[error("page title must not be empty")]
    EmptyTitle,
    #[error("invalid crawl plan: {0}")]
    InvalidPlan(String),
    #[error("page not found: {0:?}")]
    NotFound(String),
    #[error("{title:?} is a disambiguation page ({} options)", .options.len())]
    Disambiguation { title: String, options: Vec<String> },
    #[error("network access forbidden while fetching {title:?}: {source}")]
    NetworkForbidden { title: String, source: TransportError },
    #[error("fetching {title:?} failed after {attempts} attempts: {message}")]
    Transport { title: String, attempts: u32, message: String },
    #[error("fetching {title:?} returned HTTP {status}")]
    Http { title: String, status: u16 },
    #[error("unexpected API response for {title:?}: {message}")]
    Malformed { title: String, message: String },
    #[error("cache I/O at {path}: {source}")]
    Cache { path: PathBuf, source: std::io::Error },
    #[error("every topic failed to fetch ({} skipped)", .skipped.len())]
    CorpusEmpty { skipped: Vec<SkippedTopic> },
}

impl WikiError {
    /// True when the failure was a blocked network access.
    pub fn is_network_forbidden(&self) -> bool {
        match self {
            WikiError::NetworkForbidden { .. } => true,
            WikiError::CorpusEmpty { skipped } => skipped.iter().all(|s| s.network_forbidden),
            _ => false,
        }
    }
}

/// Crawl settings: seeds, link cap, politeness and cache location.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrawlPlan {
    seed_topics: Vec<String>,
    max_links_per_page: usize,
    request_interval: Duration,
    cache_dir: PathBuf,
    api_base: String,
    max_workers: usize,
}

impl CrawlPlan {
    pub fn new(seed_topics: Vec<String>, cache_dir: impl Into<PathBuf>) -> Result<Self, WikiError> {
        let seed_topics: Vec<String> = seed_topics.iter().map(|s| normalize(s)).filter(|s| !s.is_empty()).collect();
        if seed_topics.is_empty() {
            return Err(WikiError::InvalidPlan("seed_topics must not be empty".into()));
        }
        Ok(Self {
            seed_topics,
            max_links_per_page: DEFAULT_MAX_LINKS_PER_PAGE,
            request_interval: MIN_REQUEST_INTERVAL,
            cache_dir: cache_dir.into(),
            api_base: DEFAULT_API_BASE.into(),
            max_workers: 4,
        })
    }

    pub fn with_max_links(mut self, n: usize) -> Result<Self, WikiError> {
        if n == 0 {
            return Err(WikiError::InvalidPlan("max_links_per_page must be positive".into()));
        }
        self.max_links_per_page = n;
        Ok(self)
    }

    pub fn with_request_interval(mut self, d: Duration) -> Result<Self, WikiError> {
        if d < MIN_REQUEST_INTERVAL {
            return Err(WikiError::InvalidPlan(format!(
                "request_interval {d:?} is below the {MIN_REQUEST_INTERVAL:?} minimum"
            )));
        }
        self.request_interval = d;
        Ok(self)
    }

    pub fn with_api_base(mut self, base: impl Into<String>) -> Result<Self, WikiError> {
        let base = base.into();
        match url::Url::parse(&base) {
            Ok(u) if u.has_host() => {}
            _ => return Err(WikiError::InvalidPlan(format!("api base {base:?} is not an absolute URL"))),
        }
        self.api_base = base;
        Ok(self)
    }

    pub fn with_max_workers(mut self, n: usize) -> Self {
        self.max_workers = n.max(1);
        self
    }

    pub fn seed_topics(&self) -> &[String] {
        &self.seed_topics
    }
    pub fn max_links_per_page(&self) -> usize {
        self.max_links_per_page
    }
    pub fn request_interval(&self) -> Duration {
        self.request_interval
    }
    pub fn cache_dir(&self) -> &Path {
        &self.cache_dir
    }
    pub fn api_base(&self) -> &str {
        &self.api_base
    }
    pub fn max_workers(&self) -> usize {
        self.max_workers
    }
}

/// Article URL for a title on the wiki that serves `api_base`.
pub fn article_url(api_base: &str, title: &str) -> String {
    let origin = url::Url::parse(api_base)
        .ok()
        .map(|u| u.origin().ascii_serialization())
        .unwrap_or_else(|| "https://en.wikipedia.org".into());
    let path = normalize(title).replace(' ', "_");
    let encoded: String = percent_encoding::utf8_percent_encode(&path, ARTICLE_PATH).to_string();
    format!("{origin}/wiki/{encoded}")
}

const ARTICLE_PATH: &percent_encoding::AsciiSet = &percent_encoding::NON_ALPHANUMERIC
    .remove(b'_')
    .remove(b'-')
    .remove(b'.')
    .remove(b'(')
    .remove(b')')
    .remove(b',')
    .remove(b':')
    .remove(b'\'');

fn is_excluded_namespace(title: &str) -> bool {
    title.split_once(':').is_some_and(|(ns, _)| {
        let ns = ns.trim();
        EXCLUDED_NAMESPACES.iter().any(|x| x.eq_ignore_ascii_case(ns))
    })
}

/// Fetches pages through the MediaWiki Action API, serving repeats from disk.
pub struct WikiClient {
    plan: CrawlPlan,
    transport: Arc<dyn Transport>,
    clock: Arc<dyn Clock>,
    limiter: RateLimiter,
    cache: PageCache,
    retry: RetryPolicy,
    network_requests: AtomicUsize,
    cache_hits: AtomicUsize,
}

impl WikiClient {
    pub fn new(plan: CrawlPlan, transport: Arc<dyn Transport>, clock: Arc<dyn Clock>) -> Self {
        let limiter = RateLimiter::new(plan.request_interval, Arc::clone(&clock));
        let cache = PageCache::new(&plan.cache_dir);
        Self {
            plan,
            transport,
            clock,
            limiter,
            cache,
            retry: RetryPolicy::default(),
            network_requests: AtomicUsize::new(0),
            cache_hits: AtomicUsize::new(0),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn plan(&self) -> &CrawlPlan {
        &self.plan
    }

    pub fn limiter(&self) -> &RateLimiter {
        &self.limiter
    }

    pub fn cache(&self) -> &PageCache {
        &self.cache
    }

    /// HTTP requests issued so far, counting retries once.
    pub fn network_requests(&self) -> usize {
        self.network_requests.load(Ordering::Relaxed)
    }

    pub fn cache_hits(&self) -> usize {
        self.cache_hits.load(Ordering::Relaxed)
    }

    pub fn query_url(&self, title: &str, plcontinue: Option<&str>) -> String {
        let mut params = vec![
            ("action", "query"),
            ("format", "json"),
            ("formatversion", "2"),
            ("prop", "extracts|links|pageprops|info"),
            ("inprop", "url"),
            ("explaintext", "1"),
            ("exsectionformat", "wiki"),
            ("redirects", "1"),
            ("pllimit", "max"),
            ("titles", title),
        ];
        if let Some(c) = plcontinue {
            params.push(("plcontinue", c));
        }
        url::Url::parse_with_params(&self.plan.api_base, &params)
            .map(String::from)
            .unwrap_or_else(|_| self.plan.api_base.clone())
    }

    fn get_json(&self, title: &str, url: String) -> Result<Value, WikiError> {
        let request = HttpRequest::get(url);
        let host = request.host().unwrap_or_default();
        let response = self.limiter.run(&host, || {
            self.network_requests.fetch_add(1, Ordering::Relaxed);
            send_with_retry(self.transport.as_ref(), &request, self.retry, self.clock.as_ref())
        });
        let response = response.map_err(|e| match e {
            SendError::Forbidden(source) => WikiError::NetworkForbidden { title: title.to_owned(), source },
            SendError::Exhausted { attempts, last } => {
                WikiError::Transport { title: title.to_owned(), attempts, message: last }
            }
        })?;
        if !response.is_success() {
            return Err(WikiError::Http { title: title.to_owned(), status: response.status });
        }
        serde_json::from_str(&response.body)
            .map_err(|e| WikiError::Malformed { title: title.to_owned(), message: e.to_string() })
    }

    /// Returns the page for `title`, from the cache when present. A cache
    /// hit keeps the original `retrieved_at`.
    pub fn fetch_page(&self, title: &str) -> Result<PageDocument, WikiError> {
        let title = normalize(title);
        if title.is_empty() {
            return Err(WikiError::EmptyTitle);
        }
        if let Some(doc) = self.cache.load(&title) {
            self.cache_hits.fetch_add(1, Ordering::Relaxed);
            return Ok(doc);
        }
        let doc = self.fetch_remote(&title)?;
        let path = self.cache.path_for(&title);
        self.cache.store(&title, &doc).map_err(|source| WikiError::Cache { path, source })?;
        Ok(doc)
    }

    fn fetch_remote(&self, title: &str) -> Result<PageDocument, WikiError> {
        let malformed = |m: &str| WikiError::Malformed { title: title.to_owned(), message: m.to_owned() };
        let mut extract = String::new();
        let mut resolved = title.to_owned();
        let mut url = None;
        let mut raw_links: Vec<String> = Vec::new();
        let mut disambiguation = false;
        let mut cont: Option<String> = None;
        for _ in 0..MAX_CONTINUATIONS {
            let body = self.get_json(title, self.query_url(title, cont.as_deref()))?;
            let page = body.pointer("/query/pages/0").ok_or_else(|| malformed("no query.pages entry"))?;
            if page.get("missing").is_some() || page.get("invalid").is_some() {
                return Err(WikiError::NotFound(title.to_owned()));
            }
            if let Some(t) = page.get("title").and_then(Value::as_str) {
                resolved = t.to_owned();
            }
            if let Some(u) = page.get("fullurl").and_then(Value::as_str) {
                url = Some(u.to_owned());
            }
            if let Some(e) = page.get("extract").and_then(Value::as_str) {
                if extract.is_empty() {
                    extract = e.to_owned();
                }
            }
            if page.pointer("/pageprops/disambiguation").is_some() {
                disambiguation = true;
            }
            if let Some(links) = page.get("links").and_then(Value::as_array) {
                raw_links.extend(links.iter().filter_map(|l| l.get("title")?.as_str().map(str::to_owned)));
            }
            cont = body.pointer("/continue/plcontinue").and_then(Value::as_str).map(str::to_owned);
            if cont.is_none() {
                break;
            }
        }

        let self_key = key_form(&resolved);
        let requested_key = key_form(title);
        let mut seen = HashSet::new();
        let links: Vec<String> = raw_links
            .into_iter()
            .map(|l| normalize(&l))
            .filter(|l| {
                let k = key_form(l);
                !l.is_empty() && k != self_key && k != requested_key && seen.insert(k)
            })
            .collect();
        if disambiguation {
            return Err(WikiError::Disambiguation { title: resolved, options: links });
        }
        let plain_text = strip_markup(&extract);
        if plain_text.is_empty() {
            return Err(malformed("page has no extract text"));
        }
        Ok(PageDocument {
            url: url.unwrap_or_else(|| article_url(&self.plan.api_base, &resolved)),
            title: resolved,
            plain_text,
            links,
            retrieved_at: self.clock.now(),
        })
    }

    /// Outbound article titles of `seed`, in page order, without
    /// non-article namespaces, capped at the plan's link limit.
    pub fn expand_links(&self, seed: &str) -> Result<Vec<String>, WikiError> {
        let doc = self.fetch_page(seed)?;
        Ok(filter_links(&doc, self.plan.max_links_per_page))
    }
}

/// Link filtering used by [`WikiClient::expand_links`].
pub fn filter_links(doc: &PageDocument, cap: usize) -> Vec<String> {
    let own = key_form(&doc.title);
    let mut seen = HashSet::new();
    doc.links
        .iter()
        .filter(|l| !is_excluded_namespace(l))
        .filter(|l| {
            let k = key_form(l);
            k != own && seen.insert(k)
        })
        .take(cap)
        .cloned()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkippedTopic {
    pub title: String,
    pub error: String,
    #[serde(skip)]
    pub network_forbidden: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Corpus {
    /// Keyed by the normalized topic as requested.
    pub documents: BTreeMap<String, PageDocument>,
    pub skipped: Vec<SkippedTopic>,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    /// One JSON line per document, ordered by topic.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for doc in self.documents.values() {
            out.push_str(&serde_json::to_string(doc).expect("page document serializes"));
            out.push('\n');
        }
        out
    }
}

pub const CORPUS_FILE: &str = "corpus.jsonl";

/// Fetches every unique topic with at most `max_workers` fetches in flight,
/// then writes `corpus.jsonl` into the cache directory. Failed topics are
/// recorded as skipped.
pub fn build_corpus(client: &WikiClient, accepted_topics: &[String]) -> Result<Corpus, WikiError> {
    let mut seen = HashSet::new();
    let topics: Vec<String> =
        accepted_topics.iter().map(|t| normalize(t)).filter(|t| !t.is_empty() && seen.insert(key_form(t))).collect();
    if topics.is_empty() {
        return Err(WikiError::InvalidPlan("accepted_topics must not be empty".into()));
    }
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<PageDocument, WikiError>>>> =
        Mutex::new((0..topics.len()).map(|_| None).collect());
    let workers = client.plan.max_workers.min(topics.len());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(topic) = topics.get(i) else { break };
                let r = client.fetch_page(topic);
                results.lock().unwrap()[i] = Some(r);
            });
        }
    });

    let mut documents = BTreeMap::new();
    let mut skipped = Vec::new();
    for (topic, r) in topics.iter().zip(results.into_inner().unwrap()) {
        match r.expect("every topic visited") {
            Ok(doc) => {
                documents.insert(topic.clone(), doc);
            }
            Err(e) => {
                log::warn!("skipping {topic:?}: {e}");
                skipped.push(SkippedTopic {
                    title: topic.clone(),
                    network_forbidden: e.is_network_forbidden(),
                    error: e.to_string(),
                });
            }
        }
    }
    if documents.is_empty() {
        return Err(WikiError::CorpusEmpty { skipped });
    }
    let corpus = Corpus { documents, skipped };
    let path = client.plan.cache_dir.join(CORPUS_FILE);
    write_atomic(&path, corpus.to_jsonl().as_bytes()).map_err(|source| WikiError::Cache { path, source })?;
    Ok(corpus)
}

/// Reads a topic list: one title per line, blank lines and `#` comments skipped.
pub fn read_topics(text: &str) -> Vec<String> {
    text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).map(normalize).collect()
}

#[cfg(test)]
mod tests;
