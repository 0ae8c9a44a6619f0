//! Offline bag-of-words embedder.
//!
//! Text is lowercased and split on non-alphanumeric characters; stopwords are
//! dropped. Each remaining token is hashed with 64-bit FNV-1a over its UTF-8
//! bytes and counted in bucket `hash % 256`. The count vector is L2-normalized.
//! A text with no remaining tokens maps to the zero vector.

use super::{EmbeddingProvider, EmbeddingVector};
use crate::error::Result;
use crate::scalar::Scalar;

pub const HASH_DIM: usize = 256;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a_64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, b| (h ^ u64::from(*b)).wrapping_mul(FNV_PRIME))
}

pub const STOPWORDS: &[&str] = &[
    "a", "about", "an", "and", "are", "as", "at", "be", "been", "but", "by", "can", "do", "does",
    "for", "from", "had", "has", "have", "if", "in", "into", "is", "it", "its", "no", "not", "of",
    "on", "or", "so", "such", "than", "that", "the", "their", "then", "there", "these", "they",
    "this", "to", "was", "were", "which", "while", "will", "with", "would",
];

/// Lowercased alphanumeric tokens with stopwords removed.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .filter(|t| STOPWORDS.binary_search(&t.as_str()).is_err())
}

#[derive(Debug, Clone, Default)]
pub struct HashEmbedder;

impl HashEmbedder {
    pub const PROVIDER_ID: &'static str = "offline";
    pub const MODEL_ID: &'static str = "fnv1a-bow-256";

    pub fn new() -> Self {
        Self
    }

    pub fn bucket(token: &str) -> usize {
        (fnv1a_64(token.as_bytes()) % HASH_DIM as u64) as usize
    }

    pub fn hash_embed<T: Scalar>(&self, text: &str) -> EmbeddingVector<T> {
        let mut counts = vec![T::zero(); HASH_DIM];
        for token in tokenize(text) {
            counts[Self::bucket(&token)] += T::one();
        }
        EmbeddingVector::new(counts, Self::PROVIDER_ID, Self::MODEL_ID)
            .expect("counts are finite and dim is 256")
            .normalized()
    }
}

impl<T: Scalar> EmbeddingProvider<T> for HashEmbedder {
    fn provider_id(&self) -> &str {
        Self::PROVIDER_ID
    }

    fn model_id(&self) -> &str {
        Self::MODEL_ID
    }

    fn dim(&self) -> usize {
        HASH_DIM
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector<T>>> {
        Ok(texts.iter().map(|t| self.hash_embed(t)).collect())
    }
}
