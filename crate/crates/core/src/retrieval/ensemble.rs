use super::Weights;
use crate::embedding::EmbeddingVector;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// The four embedding ensembles of a retrieval, already resolved.
#[derive(Debug, Clone, Copy)]
pub struct Ensembles<'a, T> {
    pub positive_paragraphs: &'a [EmbeddingVector<T>],
    pub positive_queries: &'a [EmbeddingVector<T>],
    pub negative_paragraphs: &'a [EmbeddingVector<T>],
    pub negative_queries: &'a [EmbeddingVector<T>],
}

impl<'a, T: Scalar> Ensembles<'a, T> {
    fn all(&self) -> impl Iterator<Item = &'a EmbeddingVector<T>> {
        self.positive_paragraphs
            .iter()
            .chain(self.positive_queries)
            .chain(self.negative_paragraphs)
            .chain(self.negative_queries)
    }
}

/// Element-wise mean; `None` for an empty ensemble.
pub fn mean<T: Scalar>(vectors: &[EmbeddingVector<T>]) -> Option<EmbeddingVector<T>> {
    let (first, rest) = vectors.split_first()?;
    let mut acc = first.clone();
    for v in rest {
        for (a, x) in acc.values_mut().iter_mut().zip(v.values()) {
            *a += *x;
        }
    }
    let n = T::of(vectors.len() as f64);
    for a in acc.values_mut() {
        *a /= n;
    }
    Some(acc)
}

/// `R = a*mean(P+) + b*mean(Q+) - c*mean(P-) - d*mean(Q-)`.
///
/// Empty ensembles contribute nothing. `R` is not renormalized. Every vector
/// must share one provenance.
pub fn retrieval_embedding<T: Scalar>(
    ensembles: &Ensembles<'_, T>,
    weights: &Weights<T>,
) -> Result<EmbeddingVector<T>> {
    weights.validate()?;
    let mut all = ensembles.all();
    let reference = all.next().ok_or(Error::EmptyRetrieval)?;
    for v in all {
        reference.check_provenance(v)?;
    }

    let mut r = EmbeddingVector::zeros(&reference.provenance());
    let terms = [
        (ensembles.positive_paragraphs, weights.a),
        (ensembles.positive_queries, weights.b),
        (ensembles.negative_paragraphs, -weights.c),
        (ensembles.negative_queries, -weights.d),
    ];
    for (members, weight) in terms {
        if let Some(m) = mean(members) {
            for (acc, x) in r.values_mut().iter_mut().zip(m.values()) {
                *acc += weight * *x;
            }
        }
    }
    Ok(r)
}
