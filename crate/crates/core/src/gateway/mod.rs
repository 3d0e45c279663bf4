//! Uniform chat-completion interface over live HTTP backends and
//! deterministic offline mocks.
//!
//! Every other pipeline stage calls LLMs exclusively through [`Gateway`],
//! which adds response caching, bounded concurrency, and retry with
//! exponential backoff and full jitter on transient failures.

pub mod http;
pub mod mock;

use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::corpus::cache::{cache_key, CacheStore};
use crate::error::{Error, Result};

pub use http::HttpBackend;
pub use mock::{mock_rule_table, MockBackend, MockRule, RecordedCall, ScriptedBackend};

/// Sampling controls sent with every request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingParams {
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

pub const DEFAULT_MAX_TOKENS: u32 = 2_048;

impl SamplingParams {
    /// Defaults for data generation and agent inference.
    pub fn generation() -> Self {
        SamplingParams {
            temperature: 0.5,
            top_p: 0.7,
            max_tokens: DEFAULT_MAX_TOKENS,
            seed: None,
        }
    }

    /// Defaults for the judge.
    pub fn judging() -> Self {
        SamplingParams {
            temperature: 0.2,
            top_p: 0.95,
            max_tokens: DEFAULT_MAX_TOKENS,
            seed: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(Error::validation(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(Error::validation(format!(
                "top_p {} outside (0, 1]",
                self.top_p
            )));
        }
        if self.max_tokens == 0 {
            return Err(Error::validation("max_tokens must be positive"));
        }
        Ok(())
    }

    /// Stable string covering every field, for cache keys.
    pub fn fingerprint(&self) -> String {
        format!(
            "t={};p={};max={};seed={}",
            self.temperature,
            self.top_p,
            self.max_tokens,
            self.seed.map(|s| s.to_string()).unwrap_or_default()
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MessageRole {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: MessageRole,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: MessageRole::User,
            content: content.into(),
        }
    }
}

/// Stable rendering of a message list, for cache keys.
pub fn render_messages(messages: &[ChatMessage]) -> String {
    serde_json::to_string(messages).unwrap_or_default()
}

/// Configuration for one named backend.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BackendConfig {
    pub backend_id: String,
    #[serde(default)]
    pub base_url: Option<String>,
    pub model_id: String,
    #[serde(default)]
    pub api_key_env_var: Option<String>,
    #[serde(default = "default_timeout_secs")]
    pub request_timeout_secs: u64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
}

fn default_timeout_secs() -> u64 {
    60
}

fn default_max_retries() -> u32 {
    3
}

impl BackendConfig {
    pub fn validate(&self) -> Result<()> {
        if self.backend_id.is_empty() {
            return Err(Error::validation("backend_id is empty"));
        }
        if self.model_id.is_empty() {
            return Err(Error::validation("model_id is empty"));
        }
        if self.base_url.is_some() && self.api_key_env_var.is_none() {
            return Err(Error::validation(format!(
                "live backend {} needs api_key_env_var",
                self.backend_id
            )));
        }
        Ok(())
    }
}

/// Failure classification a backend reports per attempt.
#[derive(Debug, Clone)]
pub enum BackendFailure {
    /// Worth retrying: network errors, timeouts, HTTP 429/5xx.
    Transient(String),
    /// Not worth retrying: HTTP 4xx, missing credentials, malformed response.
    Fatal(String),
}

/// One chat-completion provider.
pub trait Backend: Send + Sync {
    fn id(&self) -> &str;
    fn model_id(&self) -> &str;
    fn complete_once(
        &self,
        messages: &[ChatMessage],
        params: &SamplingParams,
    ) -> std::result::Result<String, BackendFailure>;
}

/// Retry schedule: exponential backoff with full jitter.
#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: default_max_retries(),
            base_delay: Duration::from_secs(1),
        }
    }
}

impl RetryPolicy {
    /// Full-jitter delay before retry number `attempt` (0-based).
    fn delay(&self, attempt: u32) -> Duration {
        use rand::Rng;
        let cap = self.base_delay.as_millis() as u64 * 2u64.saturating_pow(attempt);
        if cap == 0 {
            return Duration::ZERO;
        }
        Duration::from_millis(rand::rng().random_range(0..=cap))
    }
}

/// Counting semaphore bounding in-flight live requests.
pub(crate) struct Semaphore {
    permits: Mutex<usize>,
    cv: Condvar,
}

impl Semaphore {
    fn new(permits: usize) -> Self {
        Semaphore {
            permits: Mutex::new(permits.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> SemaphoreGuard<'_> {
        let mut permits = self.permits.lock().unwrap();
        while *permits == 0 {
            permits = self.cv.wait(permits).unwrap();
        }
        *permits -= 1;
        SemaphoreGuard { sem: self }
    }
}

pub(crate) struct SemaphoreGuard<'a> {
    sem: &'a Semaphore,
}

impl Drop for SemaphoreGuard<'_> {
    fn drop(&mut self) {
        *self.sem.permits.lock().unwrap() += 1;
        self.sem.cv.notify_one();
    }
}

pub const DEFAULT_CONCURRENCY: usize = 4;

/// Shared completion front end: cache, retry, and request bounding.
pub struct Gateway {
    backend: Arc<dyn Backend>,
    cache: Option<CacheStore>,
    retry: RetryPolicy,
    semaphore: Semaphore,
}

impl Gateway {
    pub fn new(backend: Arc<dyn Backend>) -> Self {
        Gateway {
            backend,
            cache: None,
            retry: RetryPolicy::default(),
            semaphore: Semaphore::new(DEFAULT_CONCURRENCY),
        }
    }

    pub fn with_cache(mut self, cache: CacheStore) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_concurrency(mut self, permits: usize) -> Self {
        self.semaphore = Semaphore::new(permits);
        self
    }

    pub fn backend_id(&self) -> &str {
        self.backend.id()
    }

    /// Complete a prompt, serving identical requests from the cache.
    pub fn complete(&self, messages: &[ChatMessage], params: &SamplingParams) -> Result<String> {
        self.complete_inner(messages, params, true)
    }

    /// Complete a prompt bypassing the cache lookup; the fresh completion
    /// still replaces whatever the cache held for this key.
    pub fn complete_uncached(
        &self,
        messages: &[ChatMessage],
        params: &SamplingParams,
    ) -> Result<String> {
        self.complete_inner(messages, params, false)
    }

    fn complete_inner(
        &self,
        messages: &[ChatMessage],
        params: &SamplingParams,
        read_cache: bool,
    ) -> Result<String> {
        if messages.is_empty() {
            return Err(Error::validation("message list is empty"));
        }
        for m in messages {
            if m.content.trim().is_empty() {
                return Err(Error::validation("message content is empty"));
            }
        }
        params.validate()?;

        let key = cache_key(
            self.backend.id(),
            self.backend.model_id(),
            &render_messages(messages),
            &params.fingerprint(),
        );
        if read_cache {
            if let Some(cache) = &self.cache {
                if let Some(hit) = cache.get(&key) {
                    return Ok(hit);
                }
            }
        }

        let _permit = self.semaphore.acquire();
        let mut attempt: u32 = 0;
        let completion = loop {
            match self.backend.complete_once(messages, params) {
                Ok(text) => break text,
                Err(BackendFailure::Fatal(msg)) => {
                    return Err(Error::transport(format!(
                        "backend {}: {msg}",
                        self.backend.id()
                    )));
                }
                Err(BackendFailure::Transient(msg)) => {
                    if attempt >= self.retry.max_retries {
                        return Err(Error::transport(format!(
                            "backend {}: retries exhausted after {} attempts: {msg}",
                            self.backend.id(),
                            attempt + 1
                        )));
                    }
                    let delay = self.retry.delay(attempt);
                    log::debug!(
                        "backend {} transient failure (attempt {}): {msg}; retrying in {:?}",
                        self.backend.id(),
                        attempt + 1,
                        delay
                    );
                    std::thread::sleep(delay);
                    attempt += 1;
                }
            }
        };

        if completion.trim().is_empty() {
            return Err(Error::parse(format!(
                "backend {} returned an empty completion",
                self.backend.id()
            )));
        }
        if let Some(cache) = &self.cache {
            cache.put(&key, &completion)?;
        }
        Ok(completion)
    }
}
