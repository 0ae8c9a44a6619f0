//! Question answering over retrieved passages.

mod llm;
mod prompt;

use serde::{Deserialize, Serialize};

pub use llm::{LlmProvider, RateLimiter, RemoteLlm, RemoteLlmConfig, StubLlm, StubMode};
pub use prompt::{create_prompt, create_prompt_with_ids, Passage, Prompt, REFUSAL_SENTINEL};

use crate::classifier::{Category, LabelClassifier};
use crate::corpus::ParagraphId;
use crate::embedding::EmbeddingVector;
use crate::error::Result;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    pub text: String,
    /// Exactly the passages placed in the prompt, in prompt order.
    pub used_passages: Vec<Passage>,
    pub refused: bool,
    pub provider_id: String,
    pub model_id: String,
    /// True when no provider was called because nothing was retrieved.
    #[serde(default)]
    pub local_refusal: bool,
}

/// Exact match after trimming, or a lenient match that ignores case and a
/// trailing period.
pub fn is_refusal(text: &str) -> bool {
    let t = text.trim();
    if t == REFUSAL_SENTINEL {
        return true;
    }
    let lenient = |s: &str| s.trim_end_matches('.').trim().to_lowercase();
    lenient(t) == lenient(REFUSAL_SENTINEL)
}

fn local_refusal() -> Answer {
    Answer {
        text: REFUSAL_SENTINEL.to_owned(),
        used_passages: Vec::new(),
        refused: true,
        provider_id: "local".into(),
        model_id: "none".into(),
        local_refusal: true,
    }
}

/// Builds the prompt from `passages` and asks `provider`. With no passages
/// the provider is never called and a refusal is returned.
pub fn answer(
    query: &str,
    passages: Vec<(String, Option<ParagraphId>)>,
    provider: &dyn LlmProvider,
) -> Result<Answer> {
    if passages.is_empty() {
        return Ok(local_refusal());
    }
    let prompt = create_prompt_with_ids(query, passages)?;
    let text = provider.complete(&prompt.rendered)?;
    Ok(Answer {
        refused: is_refusal(&text),
        text,
        used_passages: prompt.passages,
        provider_id: provider.provider_id().to_owned(),
        model_id: provider.model_id().to_owned(),
        local_refusal: false,
    })
}

/// A paragraph considered for classifier-filtered answering, in document order.
#[derive(Debug, Clone)]
pub struct ClassifiedCandidate<'a, T> {
    pub paragraph_id: &'a ParagraphId,
    pub text: &'a str,
    pub embedding: &'a EmbeddingVector<T>,
}

/// Candidates predicted positive for `category`, by probability descending
/// (document order on ties), truncated to `k`.
pub fn classifier_passages<T: Scalar>(
    candidates: &[ClassifiedCandidate<'_, T>],
    category: Category,
    model: &dyn LabelClassifier<T>,
    threshold: T,
    k: usize,
) -> Result<Vec<(String, Option<ParagraphId>)>> {
    let mut positives: Vec<(T, usize)> = Vec::new();
    for (pos, c) in candidates.iter().enumerate() {
        let p = model.predict(c.embedding, threshold)?;
        if p.labels.contains(&category) {
            positives.push((p.probabilities[category.index()], pos));
        }
    }
    positives.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.1.cmp(&b.1))
    });
    Ok(positives
        .into_iter()
        .take(k)
        .map(|(_, pos)| {
            let c = &candidates[pos];
            (c.text.to_owned(), Some(c.paragraph_id.clone()))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{LinearLabelModel, TrainConfig};
    use crate::embedding::Provenance;

    #[test]
    fn refusal_detection() {
        assert!(is_refusal("  I cannot answer that.\n"));
        assert!(is_refusal("i cannot answer that"));
        assert!(!is_refusal("I cannot answer that, but the sensor is a thermistor."));
    }

    #[test]
    fn no_passages_no_call() {
        let stub = StubLlm::new(StubMode::EchoFirstPassage);
        let a = answer("q", vec![], &stub).unwrap();
        assert!(a.refused && a.local_refusal);
        assert_eq!(stub.calls(), 0);
    }

    #[test]
    fn refusing_stub_sets_flag_and_text_untouched() {
        let stub = StubLlm::new(StubMode::Fixed("I cannot answer that".into()));
        let a = answer("q", vec![("p".into(), None)], &stub).unwrap();
        assert!(a.refused);
        assert_eq!(a.text, "I cannot answer that");
    }

    #[test]
    fn used_passages_mirror_prompt() {
        let stub = StubLlm::new(StubMode::EchoFirstPassage);
        let passages: Vec<_> = (0..5)
            .map(|i| (format!("text {i}"), Some(ParagraphId::new(format!("p{i}")))))
            .collect();
        let a = answer("q", passages.clone(), &stub).unwrap();
        assert_eq!(a.text, "text 0");
        assert_eq!(a.used_passages.len(), 5);
        for (p, (text, id)) in a.used_passages.iter().zip(passages) {
            assert_eq!(p.text, text);
            assert_eq!(p.paragraph_id, id);
        }
    }

    #[test]
    fn classifier_ties_use_document_order() {
        let prov = Provenance {
            provider_id: "t".into(),
            model_id: "m".into(),
            dim: 2,
        };
        let model: LinearLabelModel<f64> = LinearLabelModel::zeros(prov, TrainConfig::default());
        let ids: Vec<ParagraphId> = ["c", "a", "b"].iter().map(|s| ParagraphId::from(*s)).collect();
        let e = EmbeddingVector::new(vec![1.0, 0.0], "t", "m").unwrap();
        let cands: Vec<_> = ids
            .iter()
            .map(|id| ClassifiedCandidate {
                paragraph_id: id,
                text: id.as_str(),
                embedding: &e,
            })
            .collect();
        let got = classifier_passages(&cands, Category::Data, &model, 0.5, 2).unwrap();
        let names: Vec<_> = got.iter().map(|(t, _)| t.as_str()).collect();
        assert_eq!(names, vec!["c", "a"]);
        let none = classifier_passages(&cands, Category::Data, &model, 0.9, 5).unwrap();
        assert!(none.is_empty());
    }
}
