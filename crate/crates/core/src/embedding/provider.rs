use super::{CacheKey, EmbeddingCache, EmbeddingVector, Provenance};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Largest batch sent to a provider in one call.
pub const MAX_BATCH: usize = 64;

/// Source of embeddings. Batch output order must match input order.
pub trait EmbeddingProvider<T: Scalar>: Send + Sync {
    fn provider_id(&self) -> &str;
    fn model_id(&self) -> &str;
    fn dim(&self) -> usize;
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector<T>>>;

    fn provenance(&self) -> Provenance {
        Provenance {
            provider_id: self.provider_id().to_owned(),
            model_id: self.model_id().to_owned(),
            dim: self.dim(),
        }
    }
}

/// Resolves each text from the cache or the provider, in input order.
///
/// Provider output is L2-normalized and rounded to `f32` before it enters the
/// cache, so a later hit is bit-identical to the first result. Texts missing
/// from the cache are sent in batches of at most [`MAX_BATCH`]; a failing batch
/// reports the input indices it covered.
pub fn embed_cached<T: Scalar>(
    provider: &dyn EmbeddingProvider<T>,
    cache: &EmbeddingCache,
    texts: &[String],
) -> Result<Vec<EmbeddingVector<T>>> {
    let provenance = provider.provenance();
    if cache.provenance() != &provenance {
        return Err(Error::ProvenanceMismatch {
            left: cache.provenance().to_string(),
            right: provenance.to_string(),
        });
    }
    let keys: Vec<CacheKey> = texts.iter().map(|t| CacheKey::for_text(t)).collect();

    // first input index for each distinct missing key
    let mut missing: Vec<usize> = Vec::new();
    {
        let mut seen = std::collections::HashSet::new();
        for (i, key) in keys.iter().enumerate() {
            if !cache.contains(key) && seen.insert(*key) {
                missing.push(i);
            }
        }
    }

    for batch in missing.chunks(MAX_BATCH) {
        let batch_texts: Vec<String> = batch.iter().map(|&i| texts[i].clone()).collect();
        let vectors = provider.embed(&batch_texts).map_err(|e| match e {
            Error::Provider {
                retryable, message, ..
            } => Error::Provider {
                retryable,
                batch_indices: batch.to_vec(),
                message,
            },
            other => Error::Provider {
                retryable: true,
                batch_indices: batch.to_vec(),
                message: other.to_string(),
            },
        })?;
        if vectors.len() != batch.len() {
            return Err(Error::Provider {
                retryable: false,
                batch_indices: batch.to_vec(),
                message: format!("provider returned {} vectors for {} texts", vectors.len(), batch.len()),
            });
        }
        for (&i, v) in batch.iter().zip(vectors) {
            if v.provenance() != provenance {
                return Err(Error::ProvenanceMismatch {
                    left: provenance.to_string(),
                    right: v.provenance().to_string(),
                });
            }
            let quantized: Vec<f32> = v.normalized().values().iter().map(|x| x.to_f32_lossy()).collect();
            cache.insert(keys[i], quantized);
        }
    }

    keys.iter()
        .map(|key| {
            let values = cache.get(key).expect("every key resolved above");
            EmbeddingVector::new(
                values.into_iter().map(<T as Scalar>::from_f32).collect(),
                provenance.provider_id.clone(),
                provenance.model_id.clone(),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::HashEmbedder;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Counting {
        inner: HashEmbedder,
        calls: AtomicUsize,
        texts: AtomicUsize,
        fail: bool,
    }

    impl Counting {
        fn new(fail: bool) -> Self {
            Self {
                inner: HashEmbedder,
                calls: AtomicUsize::new(0),
                texts: AtomicUsize::new(0),
                fail,
            }
        }
    }

    impl EmbeddingProvider<f64> for Counting {
        fn provider_id(&self) -> &str {
            HashEmbedder::PROVIDER_ID
        }
        fn model_id(&self) -> &str {
            HashEmbedder::MODEL_ID
        }
        fn dim(&self) -> usize {
            super::super::HASH_DIM
        }
        fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector<f64>>> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.texts.fetch_add(texts.len(), Ordering::SeqCst);
            if self.fail {
                return Err(Error::Provider {
                    retryable: true,
                    batch_indices: vec![],
                    message: "connection reset".into(),
                });
            }
            self.inner.embed(texts)
        }
    }

    fn strings(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn second_call_is_served_from_cache() {
        let p = Counting::new(false);
        let cache = EmbeddingCache::new(p.provenance());
        let first = embed_cached(&p, &cache, &strings(&["laser melt pool"])).unwrap();
        let second = embed_cached(&p, &cache, &strings(&["laser melt pool"])).unwrap();
        assert_eq!(p.calls.load(Ordering::SeqCst), 1);
        assert_eq!(
            first[0].values().iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            second[0].values().iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn order_preserved_and_duplicates_embedded_once() {
        let p = Counting::new(false);
        let cache = EmbeddingCache::new(p.provenance());
        let out = embed_cached(&p, &cache, &strings(&["alpha", "beta", "alpha"])).unwrap();
        let direct: EmbeddingVector<f64> = HashEmbedder.hash_embed("alpha");
        assert!((out[0].dot(&direct).unwrap() - 1.0).abs() < 1e-6);
        assert_eq!(out[0], out[2]);
        assert_ne!(out[0], out[1]);
        assert_eq!(p.texts.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn batches_are_capped() {
        let p = Counting::new(false);
        let cache = EmbeddingCache::new(p.provenance());
        let texts: Vec<String> = (0..150).map(|i| format!("token{i}")).collect();
        embed_cached(&p, &cache, &texts).unwrap();
        assert_eq!(p.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn failure_names_batch_indices() {
        let p = Counting::new(true);
        let cache = EmbeddingCache::new(p.provenance());
        let err = embed_cached(&p, &cache, &strings(&["a", "b"])).unwrap_err();
        match err {
            Error::Provider {
                retryable,
                batch_indices,
                ..
            } => {
                assert!(retryable);
                assert_eq!(batch_indices, vec![0, 1]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn cache_for_other_provider_rejected() {
        let p = Counting::new(false);
        let cache = EmbeddingCache::new(Provenance {
            provider_id: "remote".into(),
            model_id: "x".into(),
            dim: 8,
        });
        assert!(matches!(
            embed_cached(&p, &cache, &strings(&["a"])),
            Err(Error::ProvenanceMismatch { .. })
        ));
    }
}
