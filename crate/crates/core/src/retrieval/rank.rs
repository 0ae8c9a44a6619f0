use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::corpus::ParagraphId;
use crate::embedding::{cosine, display_score, EmbeddingVector};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Default number of hits.
pub const DEFAULT_K: usize = 5;

/// A paragraph eligible for ranking. Candidates are passed in document order;
/// that position is the first tie-breaker.
#[derive(Debug, Clone, Copy)]
pub struct Candidate<'a, T> {
    pub paragraph_id: &'a ParagraphId,
    pub embedding: &'a EmbeddingVector<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RankedHit<T = f64> {
    pub paragraph_id: ParagraphId,
    pub score: T,
    pub display_score: String,
    pub rank: usize,
}

/// Top-`k` candidates by cosine similarity to `retrieval`, score descending,
/// ties by document order then paragraph id. Degenerate (zero) paragraph
/// embeddings score 0.
pub fn rank_candidates<T: Scalar>(
    retrieval: &EmbeddingVector<T>,
    candidates: &[Candidate<'_, T>],
    k: usize,
    min_score: Option<T>,
) -> Result<Vec<RankedHit<T>>> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    if retrieval.is_degenerate() {
        return Err(Error::DegenerateRetrieval);
    }
    let mut scored: Vec<(T, usize)> = Vec::with_capacity(candidates.len());
    for (pos, c) in candidates.iter().enumerate() {
        let score = match cosine(retrieval, c.embedding) {
            Ok(s) => s,
            Err(Error::DegenerateVector) => T::zero(),
            Err(e) => return Err(e),
        };
        if min_score.is_none_or(|m| score >= m) {
            scored.push((score, pos));
        }
    }

    let order = |x: &(T, usize), y: &(T, usize)| -> Ordering {
        y.0.partial_cmp(&x.0)
            .unwrap_or(Ordering::Equal)
            .then(x.1.cmp(&y.1))
            .then_with(|| candidates[x.1].paragraph_id.cmp(candidates[y.1].paragraph_id))
    };
    if k < scored.len() {
        scored.select_nth_unstable_by(k - 1, order);
        scored.truncate(k);
    }
    scored.sort_by(order);

    Ok(scored
        .into_iter()
        .enumerate()
        .map(|(i, (score, pos))| RankedHit {
            paragraph_id: candidates[pos].paragraph_id.clone(),
            score,
            display_score: display_score(score),
            rank: i + 1,
        })
        .collect())
}
