//! Fixed-dimension paragraph and query embeddings, their providers and cache.

mod cache;
mod hash;
mod provider;
mod remote;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use cache::{CacheKey, EmbeddingCache};
pub use hash::{fnv1a_64, tokenize, HashEmbedder, HASH_DIM, STOPWORDS};
pub use provider::{embed_cached, EmbeddingProvider, MAX_BATCH};
pub use remote::{RemoteEmbedder, RemoteEmbedderConfig};
pub(crate) use remote::post_json_with_retry;

use crate::error::{Error, Result};
use crate::scalar::{self, Scalar};

/// Which model produced a vector. Vectors are comparable only when the
/// provenance matches exactly.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Provenance {
    pub provider_id: String,
    pub model_id: String,
    pub dim: usize,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}[{}]", self.provider_id, self.model_id, self.dim)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawVector<T>", into = "RawVector<T>")]
#[serde(bound = "T: Scalar")]
pub struct EmbeddingVector<T> {
    values: Vec<T>,
    provider_id: String,
    model_id: String,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct RawVector<T> {
    values: Vec<T>,
    dim: usize,
    provider_id: String,
    model_id: String,
}

impl<T: Scalar> TryFrom<RawVector<T>> for EmbeddingVector<T> {
    type Error = Error;

    fn try_from(raw: RawVector<T>) -> Result<Self> {
        if raw.values.len() != raw.dim {
            return Err(Error::DimensionMismatch {
                expected: raw.dim,
                got: raw.values.len(),
            });
        }
        Self::new(raw.values, raw.provider_id, raw.model_id)
    }
}

impl<T: Scalar> From<EmbeddingVector<T>> for RawVector<T> {
    fn from(v: EmbeddingVector<T>) -> Self {
        RawVector {
            dim: v.values.len(),
            values: v.values,
            provider_id: v.provider_id,
            model_id: v.model_id,
        }
    }
}

impl<T: Scalar> EmbeddingVector<T> {
    pub fn new(
        values: Vec<T>,
        provider_id: impl Into<String>,
        model_id: impl Into<String>,
    ) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("embedding must have dim >= 1".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("embedding values must be finite".into()));
        }
        Ok(Self {
            values,
            provider_id: provider_id.into(),
            model_id: model_id.into(),
        })
    }

    pub fn zeros(provenance: &Provenance) -> Self {
        Self {
            values: vec![T::zero(); provenance.dim],
            provider_id: provenance.provider_id.clone(),
            model_id: provenance.model_id.clone(),
        }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn provider_id(&self) -> &str {
        &self.provider_id
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn provenance(&self) -> Provenance {
        Provenance {
            provider_id: self.provider_id.clone(),
            model_id: self.model_id.clone(),
            dim: self.dim(),
        }
    }

    pub fn same_provenance(&self, other: &Self) -> bool {
        self.provider_id == other.provider_id
            && self.model_id == other.model_id
            && self.dim() == other.dim()
    }

    pub fn check_provenance(&self, other: &Self) -> Result<()> {
        if self.same_provenance(other) {
            Ok(())
        } else {
            Err(Error::ProvenanceMismatch {
                left: self.provenance().to_string(),
                right: other.provenance().to_string(),
            })
        }
    }

    pub fn norm(&self) -> T {
        scalar::l2_norm(&self.values)
    }

    /// Zero vector, e.g. a text made only of stopwords.
    pub fn is_degenerate(&self) -> bool {
        self.values.iter().all(|v| v.is_zero())
    }

    pub fn dot(&self, other: &Self) -> Result<T> {
        self.check_provenance(other)?;
        Ok(scalar::dot(&self.values, &other.values))
    }

    /// Scales to unit L2 norm; the zero vector is returned unchanged.
    pub fn normalized(mut self) -> Self {
        let norm = self.norm();
        if norm > T::zero() {
            for v in &mut self.values {
                *v /= norm;
            }
        }
        self
    }

    pub fn scaled(mut self, factor: T) -> Self {
        for v in &mut self.values {
            *v *= factor;
        }
        self
    }

    pub fn negated(self) -> Self {
        self.scaled(-T::one())
    }

    pub(crate) fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn cast<U: Scalar>(&self) -> EmbeddingVector<U> {
        EmbeddingVector {
            values: self.values.iter().map(|v| U::of(v.to_f64_lossy())).collect(),
            provider_id: self.provider_id.clone(),
            model_id: self.model_id.clone(),
        }
    }
}

/// Cosine similarity of two vectors sharing provenance.
///
/// Zero-norm input yields [`Error::DegenerateVector`]; the result is clamped
/// to `[-1, 1]`.
pub fn cosine<T: Scalar>(u: &EmbeddingVector<T>, v: &EmbeddingVector<T>) -> Result<T> {
    u.check_provenance(v)?;
    let nu = u.norm();
    let nv = v.norm();
    if nu.is_zero() || nv.is_zero() {
        return Err(Error::DegenerateVector);
    }
    let s = scalar::dot(u.values(), v.values()) / (nu * nv);
    Ok(s.max(-T::one()).min(T::one()))
}

/// Percentage with one decimal, clamped to `[0, 100]`: `0.8333 -> "83.3%"`.
pub fn display_score<T: Scalar>(score: T) -> String {
    let pct = (score.to_f64_lossy() * 100.0).clamp(0.0, 100.0);
    format!("{pct:.1}%")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(values: &[f64]) -> EmbeddingVector<f64> {
        EmbeddingVector::new(values.to_vec(), "test", "m").unwrap()
    }

    #[test]
    fn cosine_extremes() {
        let e = v(&[0.3, -1.2, 2.0]);
        assert!((cosine(&e, &e).unwrap() - 1.0).abs() < 1e-9);
        assert!((cosine(&e, &e.clone().negated()).unwrap() + 1.0).abs() < 1e-9);
        assert!(cosine(&v(&[1.0, 0.0]), &v(&[0.0, 2.0])).unwrap().abs() < 1e-12);
    }

    #[test]
    fn cosine_matches_hand_arithmetic() {
        // u·v = 0.5*1.5 + (-1)*2 + 2*0.25 + 3*(-1) = 0.75 - 2 + 0.5 - 3 = -3.75
        // |u|^2 = 0.25 + 1 + 4 + 9 = 14.25, |v|^2 = 2.25 + 4 + 0.0625 + 1 = 7.3125
        let u = v(&[0.5, -1.0, 2.0, 3.0]);
        let w = v(&[1.5, 2.0, 0.25, -1.0]);
        let expected = -3.75 / (14.25f64.sqrt() * 7.3125f64.sqrt());
        assert!((cosine(&u, &w).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn cosine_rejects_zero_and_mismatch() {
        let z = v(&[0.0, 0.0]);
        assert!(matches!(cosine(&z, &v(&[1.0, 0.0])), Err(Error::DegenerateVector)));
        let other = EmbeddingVector::new(vec![1.0, 0.0], "other", "m").unwrap();
        assert!(matches!(
            cosine(&v(&[1.0, 0.0]), &other),
            Err(Error::ProvenanceMismatch { .. })
        ));
        assert!(cosine(&v(&[1.0, 0.0]), &v(&[1.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn rejects_non_finite() {
        assert!(EmbeddingVector::new(vec![f64::NAN], "p", "m").is_err());
        assert!(EmbeddingVector::<f64>::new(vec![], "p", "m").is_err());
    }

    #[test]
    fn display_format() {
        assert_eq!(display_score(0.8333), "83.3%");
        assert_eq!(display_score(-0.2), "0.0%");
        assert_eq!(display_score(1.0), "100.0%");
    }

    #[test]
    fn serde_checks_dim() {
        let json = r#"{"values":[1.0,2.0],"dim":3,"provider_id":"p","model_id":"m"}"#;
        assert!(serde_json::from_str::<EmbeddingVector<f64>>(json).is_err());
        let ok = v(&[1.0, 2.0]);
        let back: EmbeddingVector<f64> =
            serde_json::from_str(&serde_json::to_string(&ok).unwrap()).unwrap();
        assert_eq!(ok, back);
    }

    fn nonzero_vec() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, 6).prop_filter("nonzero", |v| {
            v.iter().map(|x| x * x).sum::<f64>() > 1e-6
        })
    }

    proptest! {
        #[test]
        fn cosine_symmetric_and_scale_invariant(a in nonzero_vec(), b in nonzero_vec(), s in 0.01f64..100.0) {
            let (u, w) = (v(&a), v(&b));
            let c = cosine(&u, &w).unwrap();
            prop_assert!((c - cosine(&w, &u).unwrap()).abs() < 1e-12);
            prop_assert!((c - cosine(&u.clone().scaled(s), &w).unwrap()).abs() < 1e-9);
            prop_assert!((c - cosine(&u, &w.clone().scaled(s)).unwrap()).abs() < 1e-9);
            prop_assert!((-1.0..=1.0).contains(&c));
        }
    }
}
