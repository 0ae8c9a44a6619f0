//! HTTP JSON embedding provider.
//!
//! Request: `POST {endpoint}` with `{"model": "...", "input": ["text", ...]}`
//! and an optional `Authorization: Bearer <token>` header.
//! Response: `{"data": [{"index": 0, "embedding": [f, ...]}, ...]}`.
//! This is the shape most hosted embedding services accept.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{EmbeddingProvider, EmbeddingVector};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteEmbedderConfig {
    pub endpoint: String,
    pub model: String,
    pub dim: usize,
    #[serde(default)]
    pub token: Option<String>,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_retries() -> u32 {
    3
}

fn default_timeout() -> u64 {
    60
}

pub struct RemoteEmbedder {
    config: RemoteEmbedderConfig,
    client: reqwest::blocking::Client,
}

impl RemoteEmbedder {
    pub fn new(config: RemoteEmbedderConfig) -> Result<Self> {
        if config.dim == 0 {
            return Err(Error::Config("remote embedder dim must be positive".into()));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(Self { config, client })
    }
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    #[serde(default)]
    index: Option<usize>,
    embedding: Vec<f64>,
}

/// POSTs `body` and decodes the JSON reply, retrying transport failures,
/// 429 and 5xx with exponential backoff (250 ms, 500 ms, 1 s, ...).
pub(crate) fn post_json_with_retry<B: Serialize, R: serde::de::DeserializeOwned>(
    client: &reqwest::blocking::Client,
    endpoint: &str,
    token: Option<&str>,
    body: &B,
    max_retries: u32,
) -> Result<R> {
    let mut attempt = 0;
    loop {
        let mut request = client.post(endpoint).json(body);
        if let Some(token) = token {
            request = request.bearer_auth(token);
        }
        let (retryable, message) = match request.send() {
            Ok(response) if response.status().is_success() => {
                return response.json::<R>().map_err(|e| Error::Provider {
                    retryable: false,
                    batch_indices: vec![],
                    message: format!("undecodable response: {e}"),
                });
            }
            Ok(response) => {
                let status = response.status();
                let retryable = status.as_u16() == 429 || status.is_server_error();
                (retryable, format!("HTTP {status}"))
            }
            Err(e) => (true, e.to_string()),
        };
        if !retryable || attempt >= max_retries {
            return Err(Error::Provider {
                retryable,
                batch_indices: vec![],
                message,
            });
        }
        log::warn!("provider request failed ({message}); retry {}", attempt + 1);
        std::thread::sleep(Duration::from_millis(250 << attempt));
        attempt += 1;
    }
}

impl<T: Scalar> EmbeddingProvider<T> for RemoteEmbedder {
    fn provider_id(&self) -> &str {
        "remote"
    }

    fn model_id(&self) -> &str {
        &self.config.model
    }

    fn dim(&self) -> usize {
        self.config.dim
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector<T>>> {
        let body = serde_json::json!({ "model": self.config.model, "input": texts });
        let response: EmbeddingResponse = post_json_with_retry(
            &self.client,
            &self.config.endpoint,
            self.config.token.as_deref(),
            &body,
            self.config.max_retries,
        )?;
        let mut data = response.data;
        if data.iter().all(|d| d.index.is_some()) {
            data.sort_by_key(|d| d.index);
        }
        if data.len() != texts.len() {
            return Err(Error::Provider {
                retryable: false,
                batch_indices: vec![],
                message: format!("expected {} embeddings, got {}", texts.len(), data.len()),
            });
        }
        data.into_iter()
            .map(|d| {
                if d.embedding.len() != self.config.dim {
                    return Err(Error::DimensionMismatch {
                        expected: self.config.dim,
                        got: d.embedding.len(),
                    });
                }
                EmbeddingVector::new(
                    d.embedding.into_iter().map(T::of).collect(),
                    "remote",
                    self.config.model.clone(),
                )
                .map(EmbeddingVector::normalized)
            })
            .collect()
    }
}
