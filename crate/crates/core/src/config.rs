//! Runtime configuration: an optional TOML file overlaid with `SCIEX_*`
//! environment variables.
//!
//! ```toml
//! workspace = "./workspace"
//!
//! [server]
//! host = "127.0.0.1"
//! port = 8080
//!
//! [embedder]
//! kind = "remote"
//! endpoint = "https://example.invalid/v1/embeddings"
//! model = "text-embedding-small"
//! dim = 1536
//!
//! [llm]
//! kind = "stub"
//! mode = "refuse"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::embedding::{EmbeddingProvider, HashEmbedder, RemoteEmbedder, RemoteEmbedderConfig};
use crate::error::{Error, Result};
use crate::query::{LlmProvider, RemoteLlm, RemoteLlmConfig, StubLlm, StubMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EmbedderConfig {
    /// Offline feature-hashing embedder.
    Hash,
    Remote(RemoteEmbedderConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LlmConfig {
    Stub {
        #[serde(flatten)]
        mode: StubMode,
    },
    Remote(RemoteLlmConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServerConfig {
    pub host: String,
    pub port: u16,
    /// Shared bearer token; requests without it are rejected when set.
    pub token: Option<String>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".into(),
            port: 8080,
            token: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub workspace: PathBuf,
    pub server: ServerConfig,
    pub embedder: EmbedderConfig,
    pub llm: LlmConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            workspace: PathBuf::from("workspace"),
            server: ServerConfig::default(),
            embedder: EmbedderConfig::Hash,
            llm: LlmConfig::Stub {
                mode: StubMode::Refuse,
            },
        }
    }
}

fn parse_stub_mode(s: &str) -> Result<StubMode> {
    match s {
        "refuse" => Ok(StubMode::Refuse),
        "echo" | "echo_first_passage" => Ok(StubMode::EchoFirstPassage),
        other => match other.strip_prefix("fixed:") {
            Some(text) => Ok(StubMode::Fixed(text.to_owned())),
            None => Err(Error::Config(format!(
                "unknown stub mode `{other}` (refuse, echo, fixed:<text>)"
            ))),
        },
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse `{value}`")))
}

impl Config {
    /// Reads `path` if given (a missing explicit file is an error), then
    /// applies the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut config = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::Io {
                    path: p.to_owned(),
                    source: e,
                })?;
                Self::from_toml(&text)?
            }
            None => Self::default(),
        };
        config.apply_env(std::env::vars())?;
        Ok(config)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Overrides from `SCIEX_*` variables. Unrelated variables are ignored.
    pub fn apply_env(&mut self, vars: impl IntoIterator<Item = (String, String)>) -> Result<()> {
        let mut embed_endpoint = None;
        let mut embed_model = None;
        let mut embed_dim = None;
        let mut embed_token = None;
        let mut embed_kind = None;
        let mut llm_endpoint = None;
        let mut llm_model = None;
        let mut llm_token = None;
        let mut llm_kind = None;
        let mut stub_mode = None;

        for (key, value) in vars {
            match key.as_str() {
                "SCIEX_WORKSPACE" => self.workspace = PathBuf::from(value),
                "SCIEX_HOST" => self.server.host = value,
                "SCIEX_PORT" => self.server.port = parse_num(&key, &value)?,
                "SCIEX_API_TOKEN" => self.server.token = Some(value).filter(|v| !v.is_empty()),
                "SCIEX_EMBEDDER" => embed_kind = Some(value),
                "SCIEX_EMBEDDING_ENDPOINT" => embed_endpoint = Some(value),
                "SCIEX_EMBEDDING_MODEL" => embed_model = Some(value),
                "SCIEX_EMBEDDING_DIM" => embed_dim = Some(parse_num::<usize>(&key, &value)?),
                "SCIEX_EMBEDDING_TOKEN" => embed_token = Some(value),
                "SCIEX_LLM" => llm_kind = Some(value),
                "SCIEX_LLM_ENDPOINT" => llm_endpoint = Some(value),
                "SCIEX_LLM_MODEL" => llm_model = Some(value),
                "SCIEX_LLM_TOKEN" => llm_token = Some(value),
                "SCIEX_STUB_MODE" => stub_mode = Some(parse_stub_mode(&value)?),
                _ => {}
            }
        }

        match embed_kind.as_deref() {
            Some("hash") => self.embedder = EmbedderConfig::Hash,
            Some("remote") => {
                if !matches!(self.embedder, EmbedderConfig::Remote(_)) {
                    self.embedder = EmbedderConfig::Remote(RemoteEmbedderConfig {
                        endpoint: String::new(),
                        model: String::new(),
                        dim: 0,
                        token: None,
                        max_retries: 3,
                        timeout_secs: 60,
                    });
                }
            }
            Some(other) => return Err(Error::Config(format!("unknown embedder `{other}`"))),
            None => {}
        }
        if let EmbedderConfig::Remote(r) = &mut self.embedder {
            if let Some(v) = embed_endpoint {
                r.endpoint = v;
            }
            if let Some(v) = embed_model {
                r.model = v;
            }
            if let Some(v) = embed_dim {
                r.dim = v;
            }
            if embed_token.is_some() {
                r.token = embed_token;
            }
        }

        match llm_kind.as_deref() {
            Some("stub") => {
                if !matches!(self.llm, LlmConfig::Stub { .. }) {
                    self.llm = LlmConfig::Stub {
                        mode: StubMode::Refuse,
                    };
                }
            }
            Some("remote") => {
                if !matches!(self.llm, LlmConfig::Remote(_)) {
                    self.llm = LlmConfig::Remote(RemoteLlmConfig {
                        endpoint: String::new(),
                        model: String::new(),
                        token: None,
                        temperature: 0.0,
                        requests_per_minute: 60,
                        max_retries: 3,
                        timeout_secs: 120,
                    });
                }
            }
            Some(other) => return Err(Error::Config(format!("unknown llm `{other}`"))),
            None => {}
        }
        match &mut self.llm {
            LlmConfig::Stub { mode } => {
                if let Some(m) = stub_mode {
                    *mode = m;
                }
            }
            LlmConfig::Remote(r) => {
                if let Some(v) = llm_endpoint {
                    r.endpoint = v;
                }
                if let Some(v) = llm_model {
                    r.model = v;
                }
                if llm_token.is_some() {
                    r.token = llm_token;
                }
            }
        }
        Ok(())
    }

    pub fn build_embedder(&self) -> Result<Box<dyn EmbeddingProvider<f64>>> {
        match &self.embedder {
            EmbedderConfig::Hash => Ok(Box::new(HashEmbedder::new())),
            EmbedderConfig::Remote(r) => {
                if r.endpoint.is_empty() || r.model.is_empty() {
                    return Err(Error::Config("remote embedder needs endpoint and model".into()));
                }
                Ok(Box::new(RemoteEmbedder::new(r.clone())?))
            }
        }
    }

    pub fn build_llm(&self) -> Result<Box<dyn LlmProvider>> {
        match &self.llm {
            LlmConfig::Stub { mode } => Ok(Box::new(StubLlm::new(mode.clone()))),
            LlmConfig::Remote(r) => {
                if r.endpoint.is_empty() || r.model.is_empty() {
                    return Err(Error::Config("remote llm needs endpoint and model".into()));
                }
                Ok(Box::new(RemoteLlm::new(r.clone())?))
            }
        }
    }
}
