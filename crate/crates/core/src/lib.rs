//! Paragraph-level information extraction from scientific papers.
//!
//! Papers are ingested from TEI-XML or plain text into libraries of
//! content-addressed paragraphs. Users build named retrievals from positive
//! and negative queries and paragraphs, rank paragraphs against them, label
//! the results, train per-category sigmoid classifiers on the labels and ask
//! an LLM questions grounded in retrieved passages.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which is what persistence and the service use.

pub mod classifier;
pub mod config;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod query;
pub mod retrieval;
mod scalar;
pub mod store;
pub mod text;
pub mod workbench;

pub use config::Config;
pub use error::{Error, Result};
pub use scalar::Scalar;
pub use store::Workspace;
pub use workbench::Workbench;

pub type Embedding = embedding::EmbeddingVector<f64>;
pub type Retrieval = retrieval::RetrievalSpec<f64>;
pub type Model = classifier::LinearLabelModel<f64>;
pub type Hit = retrieval::RankedHit<f64>;
pub type Weights = retrieval::Weights<f64>;
pub type Dataset = classifier::Dataset<f64>;
