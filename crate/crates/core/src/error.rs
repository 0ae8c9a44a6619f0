use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed XML at byte {position}: {message}")]
    MalformedXml { position: u64, message: String },

    #[error("not a TEI document: {0}")]
    NotTei(String),

    #[error("empty document")]
    EmptyDocument,

    #[error("empty text")]
    EmptyText,

    #[error("unknown {kind} id `{id}`")]
    NotFound { kind: &'static str, id: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate vector: zero norm")]
    DegenerateVector,

    #[error("empty retrieval: all four ensembles are empty")]
    EmptyRetrieval,

    #[error("degenerate retrieval embedding: ensembles cancel to the zero vector")]
    DegenerateRetrieval,

    #[error("embedding provenance mismatch: {left} vs {right}")]
    ProvenanceMismatch { left: String, right: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("provider error (retryable: {retryable}) for batch indices {batch_indices:?}: {message}")]
    Provider {
        retryable: bool,
        batch_indices: Vec<usize>,
        message: String,
    },

    #[error("categories without labeled examples: {}", .0.join(", "))]
    EmptyCategory(Vec<String>),

    #[error("empty split: {0}")]
    EmptySplit(&'static str),

    #[error("workspace schema version {found} is newer than supported version {supported}")]
    UnsupportedVersion { found: u32, supported: u32 },

    #[error("workspace is locked by another writer: {}", .0.display())]
    Locked(PathBuf),

    #[error("corrupted file {}: {message}", path.display())]
    Corrupted { path: PathBuf, message: String },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    /// Stable machine-readable code, one per variant.
    pub fn code(&self) -> &'static str {
        match self {
            Error::MalformedXml { .. } => "malformed_xml",
            Error::NotTei(_) => "not_tei",
            Error::EmptyDocument => "empty_document",
            Error::EmptyText => "empty_text",
            Error::NotFound { .. } => "not_found",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::DegenerateVector => "degenerate_vector",
            Error::EmptyRetrieval => "empty_retrieval",
            Error::DegenerateRetrieval => "degenerate_retrieval",
            Error::ProvenanceMismatch { .. } => "provenance_mismatch",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::Provider { .. } => "provider_error",
            Error::EmptyCategory(_) => "empty_category",
            Error::EmptySplit(_) => "empty_split",
            Error::UnsupportedVersion { .. } => "unsupported_version",
            Error::Locked(_) => "workspace_locked",
            Error::Corrupted { .. } => "corrupted_file",
            Error::Io { .. } => "io_error",
            Error::Config(_) => "config_error",
        }
    }

    pub fn is_retryable(&self) -> bool {
        matches!(self, Error::Provider { retryable: true, .. } | Error::Locked(_))
    }

    pub(crate) fn not_found(kind: &'static str, id: impl Into<String>) -> Self {
        Error::NotFound {
            kind,
            id: id.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
