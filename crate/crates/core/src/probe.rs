//! Issue one request against the target API and capture everything the
//! generator and runner need from the exchange.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;
use url::Url;

pub const DEFAULT_TIMEOUT_MS: u64 = 10_000;
pub const DEFAULT_MAX_BODY_BYTES: usize = 1024 * 1024;
const MAX_REDIRECTS: usize = 5;

#[derive(Debug, Clone)]
pub struct ProbeConfig {
    pub url: String,
    pub method: String,
    pub timeout_ms: u64,
    pub max_body_bytes: usize,
    pub extra_headers: Vec<(String, String)>,
}

impl ProbeConfig {
    pub fn get(url: impl Into<String>) -> Self {
        ProbeConfig {
            url: url.into(),
            method: "GET".to_string(),
            timeout_ms: DEFAULT_TIMEOUT_MS,
            max_body_bytes: DEFAULT_MAX_BODY_BYTES,
            extra_headers: Vec::new(),
        }
    }

    pub fn with_method(mut self, method: &str) -> Self {
        self.method = method.to_uppercase();
        self
    }
}

/// One observed HTTP exchange, frozen. The sole input to assertion
/// evaluation: no clock or network is consulted afterwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseCapture {
    pub status: u16,
    pub headers: Vec<(String, String)>,
    pub body_bytes: Vec<u8>,
    pub latency_ms: u64,
    pub json_body: Option<Value>,
    pub final_url: String,
}

impl ResponseCapture {
    /// Case-insensitive header lookup; names are stored as received.
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(n, _)| n.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }

    /// Build a capture from raw parts, deriving `json_body` from the bytes.
    pub fn from_parts(
        status: u16,
        headers: Vec<(String, String)>,
        body_bytes: Vec<u8>,
        latency_ms: u64,
        final_url: String,
    ) -> Self {
        let json_body = serde_json::from_slice(&body_bytes).ok();
        ResponseCapture { status, headers, body_bytes, latency_ms, json_body, final_url }
    }
}

#[derive(Debug, Error)]
pub enum ProbeError {
    #[error("invalid URL {0:?}")]
    InvalidUrl(String),
    #[error("connection failed: {0}")]
    Connect(String),
    #[error("request timed out after {0} ms")]
    Timeout(u64),
    #[error("response body exceeds {0} bytes")]
    BodyTooLarge(usize),
}

/// Send one request and capture the response. Redirects are followed up to 5
/// hops with the final URL recorded; non-2xx statuses are captures, not
/// errors. Latency is measured from request start to last body byte.
pub async fn probe(config: &ProbeConfig) -> Result<ResponseCapture, ProbeError> {
    let url = Url::parse(&config.url).map_err(|_| ProbeError::InvalidUrl(config.url.clone()))?;
    if url.scheme() != "http" && url.scheme() != "https" {
        return Err(ProbeError::InvalidUrl(config.url.clone()));
    }
    let method = reqwest::Method::from_bytes(config.method.as_bytes())
        .map_err(|_| ProbeError::InvalidUrl(format!("bad method {:?}", config.method)))?;

    let client = reqwest::Client::builder()
        .redirect(reqwest::redirect::Policy::limited(MAX_REDIRECTS))
        .timeout(Duration::from_millis(config.timeout_ms))
        .build()
        .map_err(|e| ProbeError::Connect(e.to_string()))?;

    let mut req = client.request(method, url).header("Accept", "application/json");
    for (name, value) in &config.extra_headers {
        req = req.header(name, value);
    }

    let started = Instant::now();
    let resp = req.send().await.map_err(|e| classify(e, config.timeout_ms))?;

    let status = resp.status().as_u16();
    let final_url = resp.url().to_string();
    let headers: Vec<(String, String)> = resp
        .headers()
        .iter()
        .map(|(n, v)| (n.to_string(), String::from_utf8_lossy(v.as_bytes()).into_owned()))
        .collect();

    let mut body = Vec::new();
    let mut resp = resp;
    while let Some(chunk) = resp.chunk().await.map_err(|e| classify(e, config.timeout_ms))? {
        if body.len() + chunk.len() > config.max_body_bytes {
            return Err(ProbeError::BodyTooLarge(config.max_body_bytes));
        }
        body.extend_from_slice(&chunk);
    }
    let latency_ms = started.elapsed().as_millis() as u64;

    Ok(ResponseCapture::from_parts(status, headers, body, latency_ms, final_url))
}

fn classify(e: reqwest::Error, timeout_ms: u64) -> ProbeError {
    if e.is_timeout() {
        ProbeError::Timeout(timeout_ms)
    } else {
        ProbeError::Connect(e.to_string())
    }
}

/// Human-readable digest of a capture, fed to the prompt builder. Never
/// exceeds `max_chars`; deterministic for equal captures.
pub fn summarize_capture(c: &ResponseCapture, max_chars: usize) -> String {
    let mut out = String::new();
    out.push_str(&format!("HTTP {}\n", c.status));
    for name in ["content-type", "content-length", "server"] {
        if let Some(value) = c.header(name) {
            out.push_str(&format!("{name}: {value}\n"));
        }
    }
    out.push_str(&format!("latency: {} ms\n", c.latency_ms));
    match &c.json_body {
        Some(v) => {
            out.push_str("body (json):\n");
            out.push_str(&serde_json::to_string_pretty(v).unwrap_or_default());
        }
        None => {
            out.push_str("body (raw):\n");
            out.push_str(&String::from_utf8_lossy(&c.body_bytes));
        }
    }
    truncate_chars(&out, max_chars)
}

fn truncate_chars(s: &str, max_chars: usize) -> String {
    if s.chars().count() <= max_chars {
        s.to_string()
    } else {
        s.chars().take(max_chars).collect()
    }
}
