//! Chat-completion client over HTTP with bounded retries.

use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use rand::Rng;
use serde_json::Value as Json;
use tracing::{debug, warn};

use super::{text_digest, ClientError, CompletionParams, ModelClient};

/// Request body shape; `"{name}"` strings are replaced by typed values.
pub const DEFAULT_BODY_TEMPLATE: &str = include_str!("../../assets/chat_body.json");

#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base: Duration,
    pub cap: Duration,
    pub jitter: bool,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 5,
            base: Duration::from_secs(1),
            cap: Duration::from_secs(32),
            jitter: true,
        }
    }
}

impl RetryPolicy {
    /// Wait before retry number `retry` (0-based): `base * 2^retry` capped,
    /// then drawn uniformly from its upper half when jitter is on.
    pub fn delay<R: Rng + ?Sized>(&self, retry: u32, rng: &mut R) -> Duration {
        let exp = self.base.saturating_mul(1u32 << retry.min(20)).min(self.cap);
        if !self.jitter || exp.is_zero() {
            return exp;
        }
        let half = exp / 2;
        half + Duration::from_nanos(rng.random_range(0..=(exp - half).as_nanos() as u64))
    }
}

#[derive(Debug, Clone)]
pub struct RemoteConfig {
    /// Base URL; requests go to `{base_url}/chat/completions`.
    pub base_url: String,
    pub api_key: Option<String>,
    pub body_template: Json,
    pub retry: RetryPolicy,
    pub request_timeout: Duration,
    pub max_concurrency: usize,
}

impl RemoteConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        RemoteConfig {
            base_url: base_url.into(),
            api_key: None,
            body_template: serde_json::from_str(DEFAULT_BODY_TEMPLATE).expect("built-in body template is JSON"),
            retry: RetryPolicy::default(),
            request_timeout: Duration::from_secs(600),
            max_concurrency: 8,
        }
    }

    /// Reads `MODEL_API_BASE` (required) and `MODEL_API_KEY`.
    pub fn from_env() -> Result<Self, ClientError> {
        let base = std::env::var("MODEL_API_BASE")
            .map_err(|_| ClientError::BackendUnavailable("MODEL_API_BASE is not set".into()))?;
        let mut cfg = Self::new(base);
        cfg.api_key = std::env::var("MODEL_API_KEY").ok().filter(|k| !k.is_empty());
        Ok(cfg)
    }
}

enum Attempt {
    Done(String),
    Transient(String),
    Fatal(ClientError),
}

pub struct RemoteClient {
    cfg: RemoteConfig,
    http: reqwest::blocking::Client,
    inflight: Mutex<usize>,
    freed: Condvar,
    requests: AtomicU64,
}

impl RemoteClient {
    pub fn new(cfg: RemoteConfig) -> Result<Self, ClientError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(cfg.request_timeout)
            .build()
            .map_err(|e| ClientError::BackendUnavailable(e.to_string()))?;
        Ok(RemoteClient {
            cfg,
            http,
            inflight: Mutex::new(0),
            freed: Condvar::new(),
            requests: AtomicU64::new(0),
        })
    }

    /// HTTP requests sent so far, retries included.
    pub fn request_count(&self) -> u64 {
        self.requests.load(Ordering::Relaxed)
    }

    pub fn body(&self, prompt: &str, params: &CompletionParams) -> Json {
        fill_template(&self.cfg.body_template, prompt, params)
    }

    fn acquire(&self) {
        let mut n = self.inflight.lock().unwrap_or_else(|p| p.into_inner());
        while *n >= self.cfg.max_concurrency.max(1) {
            n = self.freed.wait(n).unwrap_or_else(|p| p.into_inner());
        }
        *n += 1;
    }

    fn release(&self) {
        *self.inflight.lock().unwrap_or_else(|p| p.into_inner()) -= 1;
        self.freed.notify_one();
    }

    fn send_once(&self, body: &Json) -> Attempt {
        self.requests.fetch_add(1, Ordering::Relaxed);
        let url = format!("{}/chat/completions", self.cfg.base_url.trim_end_matches('/'));
        let mut req = self.http.post(url).json(body);
        if let Some(key) = &self.cfg.api_key {
            req = req.bearer_auth(key);
        }
        let resp = match req.send() {
            Ok(r) => r,
            Err(e) => return Attempt::Transient(e.to_string()),
        };
        let status = resp.status().as_u16();
        let text = match resp.text() {
            Ok(t) => t,
            Err(e) => return Attempt::Transient(e.to_string()),
        };
        match status {
            200..=299 => match extract_content(&text) {
                Some(c) => Attempt::Done(c),
                None => Attempt::Fatal(ClientError::Malformed(truncate(&text))),
            },
            429 | 500..=599 => Attempt::Transient(format!("status {status}")),
            400 | 413 if is_context_error(&text) => Attempt::Fatal(ClientError::ContextTooLong(truncate(&text))),
            _ => Attempt::Fatal(ClientError::Rejected {
                status,
                body: truncate(&text),
            }),
        }
    }
}

impl ModelClient for RemoteClient {
    fn complete(&self, prompt: &str, params: &CompletionParams) -> Result<String, ClientError> {
        params.validate()?;
        let body = self.body(prompt, params);
        let digest = text_digest(prompt);
        self.acquire();
        let mut rng = rand::rng();
        let mut retry = 0;
        let result = loop {
            match self.send_once(&body) {
                Attempt::Done(text) => break Ok(text),
                Attempt::Fatal(e) => break Err(e),
                Attempt::Transient(why) if retry < self.cfg.retry.max_retries => {
                    let wait = self.cfg.retry.delay(retry, &mut rng);
                    warn!(prompt = %&digest[..12], %why, retry, ?wait, "transient backend failure");
                    thread::sleep(wait);
                    retry += 1;
                }
                Attempt::Transient(why) => {
                    break Err(ClientError::BackendUnavailable(format!("{why} after {retry} retries")))
                }
            }
        };
        self.release();
        if let Ok(text) = &result {
            debug!(prompt = %&digest[..12], response = %&text_digest(text)[..12], "remote completion");
        }
        result
    }

    fn complete_n(&self, prompt: &str, params: &CompletionParams, n: usize) -> Result<Vec<String>, ClientError> {
        let next = AtomicUsize::new(0);
        let slots: Mutex<Vec<Option<Result<String, ClientError>>>> = Mutex::new(vec![None; n]);
        let workers = n.min(self.cfg.max_concurrency.max(1));
        thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= n {
                        break;
                    }
                    let r = self.complete(prompt, params);
                    slots.lock().unwrap_or_else(|p| p.into_inner())[i] = Some(r);
                });
            }
        });
        slots
            .into_inner()
            .unwrap_or_else(|p| p.into_inner())
            .into_iter()
            .map(|r| r.expect("every slot is filled"))
            .collect()
    }
}

fn fill_template(template: &Json, prompt: &str, params: &CompletionParams) -> Json {
    match template {
        Json::String(s) => match s.as_str() {
            "{prompt}" => Json::from(prompt),
            "{model_name}" => Json::from(params.model_name.as_str()),
            "{temperature}" => Json::from(params.temperature),
            "{max_tokens}" => Json::from(params.max_tokens),
            "{reasoning_effort}" => Json::from(params.reasoning_effort.as_str()),
            _ => template.clone(),
        },
        Json::Array(items) => Json::Array(items.iter().map(|v| fill_template(v, prompt, params)).collect()),
        Json::Object(map) => Json::Object(
            map.iter()
                .map(|(k, v)| (k.clone(), fill_template(v, prompt, params)))
                .collect(),
        ),
        other => other.clone(),
    }
}

fn extract_content(body: &str) -> Option<String> {
    let v: Json = serde_json::from_str(body).ok()?;
    v.pointer("/choices/0/message/content")?.as_str().map(str::to_string)
}

fn is_context_error(body: &str) -> bool {
    let b = body.to_ascii_lowercase();
    b.contains("context_length") || b.contains("context length") || b.contains("maximum context")
}

fn truncate(s: &str) -> String {
    s.chars().take(500).collect()
}
