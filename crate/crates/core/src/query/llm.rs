//! Chat-completion providers.
//!
//! The remote provider speaks the common chat-completions shape:
//! request `{"model", "messages": [{"role": "user", "content": prompt}],
//! "temperature": 0}`, response `{"choices": [{"message": {"content": ...}}]}`.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::REFUSAL_SENTINEL;
use crate::embedding::post_json_with_retry;
use crate::error::{Error, Result};

pub trait LlmProvider: Send + Sync {
    fn provider_id(&self) -> &str;
    fn model_id(&self) -> &str;
    fn complete(&self, prompt: &str) -> Result<String>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "text")]
pub enum StubMode {
    /// Always answers the refusal sentinel.
    Refuse,
    /// Answers with the text of passage 0.
    EchoFirstPassage,
    Fixed(String),
}

/// Deterministic offline provider that counts its calls.
#[derive(Debug)]
pub struct StubLlm {
    mode: StubMode,
    calls: AtomicUsize,
}

impl StubLlm {
    pub fn new(mode: StubMode) -> Self {
        Self {
            mode,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl LlmProvider for StubLlm {
    fn provider_id(&self) -> &str {
        "stub"
    }

    fn model_id(&self) -> &str {
        match self.mode {
            StubMode::Refuse => "refuse",
            StubMode::EchoFirstPassage => "echo-first-passage",
            StubMode::Fixed(_) => "fixed",
        }
    }

    fn complete(&self, prompt: &str) -> Result<String> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(match &self.mode {
            StubMode::Refuse => REFUSAL_SENTINEL.to_owned(),
            StubMode::Fixed(text) => text.clone(),
            StubMode::EchoFirstPassage => {
                let start = prompt
                    .find("- Passage 0: ")
                    .map(|i| i + "- Passage 0: ".len())
                    .ok_or_else(|| Error::Provider {
                        retryable: false,
                        batch_indices: vec![],
                        message: "prompt has no passage 0".into(),
                    })?;
                let rest = &prompt[start..];
                let end = rest.find('\n').unwrap_or(rest.len());
                rest[..end].to_owned()
            }
        })
    }
}

/// Spaces requests so no more than `per_minute` start in any minute.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Duration,
    next: Mutex<Option<Instant>>,
}

impl RateLimiter {
    pub fn per_minute(per_minute: u32) -> Self {
        Self {
            interval: Duration::from_secs(60) / per_minute.max(1),
            next: Mutex::new(None),
        }
    }

    /// Time the caller must wait before issuing its request.
    pub fn reserve(&self) -> Duration {
        let now = Instant::now();
        let mut next = self.next.lock().expect("rate limiter lock");
        let slot = match *next {
            Some(t) if t > now => t,
            _ => now,
        };
        *next = Some(slot + self.interval);
        slot - now
    }

    pub fn acquire(&self) {
        let wait = self.reserve();
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteLlmConfig {
    pub endpoint: String,
    pub model: String,
    #[serde(default)]
    pub token: Option<String>,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_rpm")]
    pub requests_per_minute: u32,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_rpm() -> u32 {
    60
}

fn default_retries() -> u32 {
    3
}

fn default_timeout() -> u64 {
    120
}

pub struct RemoteLlm {
    config: RemoteLlmConfig,
    client: reqwest::blocking::Client,
    limiter: RateLimiter,
}

impl RemoteLlm {
    pub fn new(config: RemoteLlmConfig) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(Self {
            limiter: RateLimiter::per_minute(config.requests_per_minute),
            config,
            client,
        })
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: String,
}

impl LlmProvider for RemoteLlm {
    fn provider_id(&self) -> &str {
        "remote"
    }

    fn model_id(&self) -> &str {
        &self.config.model
    }

    fn complete(&self, prompt: &str) -> Result<String> {
        self.limiter.acquire();
        let body = serde_json::json!({
            "model": self.config.model,
            "messages": [{ "role": "user", "content": prompt }],
            "temperature": self.config.temperature,
        });
        let response: ChatResponse = post_json_with_retry(
            &self.client,
            &self.config.endpoint,
            self.config.token.as_deref(),
            &body,
            self.config.max_retries,
        )?;
        response
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| Error::Provider {
                retryable: false,
                batch_indices: vec![],
                message: "response has no choices".into(),
            })
    }
}
