//! SPARQL request transports: live HTTP, archive replay, and recording.
//!
//! An archive is a directory with one JSON file per request, named by the
//! hex SHA-256 of `endpoint + "\n" + query`:
//!
//! ```json
//! {"format": "streetonomics-response-archive/1", "endpoint": "...",
//!  "query": "...", "recorded_at": "2024-05-01T12:00:00Z", "status": 200, "body": "..."}
//! ```

use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const ARCHIVE_FORMAT: &str = "streetonomics-response-archive/1";
pub const SPARQL_JSON: &str = "application/sparql-results+json";

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SparqlRequest {
    pub endpoint: String,
    pub query: String,
}

impl SparqlRequest {
    pub fn new(endpoint: impl Into<String>, query: impl Into<String>) -> Self {
        SparqlRequest {
            endpoint: endpoint.into(),
            query: query.into(),
        }
    }

    /// Archive key: hex SHA-256 of endpoint, newline, query.
    pub fn key(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.endpoint.as_bytes());
        h.update(b"\n");
        h.update(self.query.as_bytes());
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Response {
    pub body: String,
    /// RFC 3339 time the body was fetched.
    pub recorded_at: String,
}

pub trait Transport: Send + Sync {
    fn send(&self, request: &SparqlRequest) -> Result<Response>;
}

impl<T: Transport + ?Sized> Transport for &T {
    fn send(&self, request: &SparqlRequest) -> Result<Response> {
        (**self).send(request)
    }
}

impl<T: Transport + ?Sized> Transport for Box<T> {
    fn send(&self, request: &SparqlRequest) -> Result<Response> {
        (**self).send(request)
    }
}

/// Spaces out calls so that at most `per_second` start in any one-second window.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Duration,
    next: Mutex<Option<Instant>>,
}

impl RateLimiter {
    pub fn per_second(per_second: f64) -> Self {
        let interval = if per_second > 0.0 && per_second.is_finite() {
            Duration::from_secs_f64(1.0 / per_second)
        } else {
            Duration::ZERO
        };
        RateLimiter {
            interval,
            next: Mutex::new(None),
        }
    }

    /// Blocks until the caller's slot comes up.
    pub fn acquire(&self) {
        let wait = {
            let mut next = self.next.lock().unwrap_or_else(|e| e.into_inner());
            let now = Instant::now();
            let slot = next.map_or(now, |n| n.max(now));
            *next = Some(slot + self.interval);
            slot - now
        };
        if !wait.is_zero() {
            thread::sleep(wait);
        }
    }
}

#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 4,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(8),
        }
    }
}

impl RetryPolicy {
    fn delay(&self, attempt: u32) -> Duration {
        self.base_delay
            .saturating_mul(1u32 << attempt.min(16))
            .min(self.max_delay)
    }
}

/// Live SPARQL over HTTP GET.
pub struct HttpTransport {
    agent: ureq::Agent,
    limiter: RateLimiter,
    retry: RetryPolicy,
    user_agent: String,
}

impl HttpTransport {
    pub fn new(requests_per_second: f64, retry: RetryPolicy) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(120)))
            .build()
            .into();
        HttpTransport {
            agent,
            limiter: RateLimiter::per_second(requests_per_second),
            retry,
            user_agent: format!("streetonomics/{}", env!("CARGO_PKG_VERSION")),
        }
    }

    fn attempt(&self, request: &SparqlRequest) -> std::result::Result<String, Attempt> {
        self.limiter.acquire();
        let mut resp = self
            .agent
            .get(&request.endpoint)
            .query("query", &request.query)
            .header("Accept", SPARQL_JSON)
            .header("User-Agent", &self.user_agent)
            .call()
            .map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| Attempt::Retry(format!("reading body: {e}")))?;
        match status {
            200..=299 => Ok(body),
            429 | 500..=599 => Err(Attempt::Retry(format!("HTTP {status}"))),
            _ => Err(Attempt::Fatal(format!("HTTP {status}: {}", truncate(&body, 500)))),
        }
    }
}

impl Default for HttpTransport {
    fn default() -> Self {
        Self::new(5.0, RetryPolicy::default())
    }
}

enum Attempt {
    Retry(String),
    Fatal(String),
}

impl Transport for HttpTransport {
    fn send(&self, request: &SparqlRequest) -> Result<Response> {
        let attempts = self.retry.max_attempts.max(1);
        let mut last = String::new();
        for attempt in 0..attempts {
            match self.attempt(request) {
                Ok(body) => {
                    return Ok(Response {
                        body,
                        recorded_at: now_rfc3339(),
                    })
                }
                Err(Attempt::Fatal(msg)) => return Err(Error::Network(format!("{}: {msg}", request.endpoint))),
                Err(Attempt::Retry(msg)) => {
                    log::warn!("request to {} failed (attempt {}/{attempts}): {msg}", request.endpoint, attempt + 1);
                    last = msg;
                    if attempt + 1 < attempts {
                        thread::sleep(self.retry.delay(attempt));
                    }
                }
            }
        }
        Err(Error::Network(format!(
            "{}: giving up after {attempts} attempts: {last}",
            request.endpoint
        )))
    }
}

fn truncate(s: &str, max: usize) -> &str {
    match s.char_indices().nth(max) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

pub(crate) fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArchiveEntry {
    pub format: String,
    pub endpoint: String,
    pub query: String,
    pub recorded_at: String,
    pub status: u16,
    pub body: String,
}

/// Replays responses from an archive directory and never touches the network.
#[derive(Debug, Clone)]
pub struct ArchiveTransport {
    dir: PathBuf,
}

impl ArchiveTransport {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ArchiveTransport { dir: dir.into() }
    }

    pub fn path_for(&self, request: &SparqlRequest) -> PathBuf {
        archive_path(&self.dir, request)
    }
}

fn archive_path(dir: &Path, request: &SparqlRequest) -> PathBuf {
    dir.join(format!("{}.json", request.key()))
}

impl Transport for ArchiveTransport {
    fn send(&self, request: &SparqlRequest) -> Result<Response> {
        let path = self.path_for(request);
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(Error::Network(format!(
                    "offline: no archived response for request {} ({})",
                    request.key(),
                    path.display()
                )))
            }
            Err(e) => return Err(Error::io(&path, e)),
        };
        let entry: ArchiveEntry = serde_json::from_str(&text).map_err(|e| Error::Json {
            context: path.display().to_string(),
            source: e,
        })?;
        if entry.format != ARCHIVE_FORMAT {
            return Err(Error::Invalid(format!(
                "{}: unsupported archive format {:?}",
                path.display(),
                entry.format
            )));
        }
        if entry.endpoint != request.endpoint || entry.query != request.query {
            return Err(Error::Invalid(format!("{}: archived request does not match", path.display())));
        }
        Ok(Response {
            body: entry.body,
            recorded_at: entry.recorded_at,
        })
    }
}

/// Writes every successful response from `inner` into an archive directory.
pub struct RecordingTransport<T> {
    inner: T,
    dir: PathBuf,
}

impl<T: Transport> RecordingTransport<T> {
    pub fn new(inner: T, dir: impl Into<PathBuf>) -> Self {
        RecordingTransport { inner, dir: dir.into() }
    }
}

/// Stores one response in `dir` in archive format.
pub fn write_archive_entry(dir: &Path, request: &SparqlRequest, response: &Response) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let entry = ArchiveEntry {
        format: ARCHIVE_FORMAT.into(),
        endpoint: request.endpoint.clone(),
        query: request.query.clone(),
        recorded_at: response.recorded_at.clone(),
        status: 200,
        body: response.body.clone(),
    };
    let path = archive_path(dir, request);
    let json = serde_json::to_string_pretty(&entry).map_err(|e| Error::Json {
        context: "archive entry".into(),
        source: e,
    })?;
    std::fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

impl<T: Transport> Transport for RecordingTransport<T> {
    fn send(&self, request: &SparqlRequest) -> Result<Response> {
        let resp = self.inner.send(request)?;
        write_archive_entry(&self.dir, request, &resp)?;
        Ok(resp)
    }
}
