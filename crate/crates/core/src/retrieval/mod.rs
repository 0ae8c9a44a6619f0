//! Customized retrievals: named ensembles of positive and negative queries
//! and paragraphs combined into one retrieval embedding, and ranking by
//! cosine similarity against it.

mod defaults;
mod ensemble;
mod rank;

use serde::{Deserialize, Serialize};

pub use defaults::{default_drafts, RetrievalDraft};
pub use ensemble::{mean, retrieval_embedding, Ensembles};
pub use rank::{rank_candidates, Candidate, RankedHit, DEFAULT_K};

use crate::classifier::Category;
use crate::corpus::{random_hex_id, ParagraphId, RetrievalId};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Ensemble weights: `a` positive paragraphs, `b` positive queries,
/// `c` negative paragraphs, `d` negative queries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Weights<T> {
    pub a: T,
    pub b: T,
    pub c: T,
    pub d: T,
}

impl<T: Scalar> Default for Weights<T> {
    fn default() -> Self {
        Self {
            a: T::one(),
            b: T::one(),
            c: T::one(),
            d: T::one(),
        }
    }
}

impl<T: Scalar> Weights<T> {
    pub fn validate(&self) -> Result<()> {
        for (name, w) in [("a", self.a), ("b", self.b), ("c", self.c), ("d", self.d)] {
            if !w.is_finite() || w < T::zero() {
                return Err(Error::InvalidArgument(format!(
                    "weight {name} must be finite and non-negative, got {w}"
                )));
            }
        }
        Ok(())
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self {
            a: self.a * factor,
            b: self.b * factor,
            c: self.c * factor,
            d: self.d * factor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
    Clear,
}

impl std::str::FromStr for Polarity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "positive" | "pos" | "+" => Ok(Polarity::Positive),
            "negative" | "neg" | "-" => Ok(Polarity::Negative),
            "clear" => Ok(Polarity::Clear),
            other => Err(Error::InvalidArgument(format!("unknown polarity `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RetrievalSpec<T = f64> {
    pub id: RetrievalId,
    pub name: String,
    #[serde(default)]
    pub description: Option<String>,
    /// Positive paragraphs of a categorized retrieval count as labels of
    /// that category when a dataset is exported.
    #[serde(default)]
    pub category: Option<Category>,
    #[serde(default)]
    pub positive_queries: Vec<String>,
    #[serde(default)]
    pub negative_queries: Vec<String>,
    #[serde(default)]
    pub positive_paragraph_ids: Vec<ParagraphId>,
    #[serde(default)]
    pub negative_paragraph_ids: Vec<ParagraphId>,
    #[serde(default)]
    pub weights: Weights<T>,
    /// Hits scoring below this are dropped. Unset by default.
    #[serde(default)]
    pub min_score: Option<T>,
}

impl<T: Scalar> RetrievalSpec<T> {
    pub fn new(name: &str) -> Result<Self> {
        let spec = Self {
            id: RetrievalId::new(random_hex_id()),
            name: name.trim().to_owned(),
            description: None,
            category: None,
            positive_queries: Vec::new(),
            negative_queries: Vec::new(),
            positive_paragraph_ids: Vec::new(),
            negative_paragraph_ids: Vec::new(),
            weights: Weights::default(),
            min_score: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Anonymous spec with a single positive query.
    pub fn for_query(query: &str) -> Self {
        Self {
            id: RetrievalId::new("adhoc"),
            name: "semantic search".into(),
            description: None,
            category: None,
            positive_queries: vec![query.to_owned()],
            negative_queries: Vec::new(),
            positive_paragraph_ids: Vec::new(),
            negative_paragraph_ids: Vec::new(),
            weights: Weights::default(),
            min_score: None,
        }
    }

    pub fn from_draft(draft: RetrievalDraft<T>) -> Result<Self> {
        let mut spec = Self::new(&draft.name)?;
        spec.description = draft.description.filter(|d| !d.trim().is_empty());
        spec.category = draft.category;
        spec.positive_queries = dedup_queries(draft.positive_queries);
        spec.negative_queries = dedup_queries(draft.negative_queries);
        if let Some(w) = draft.weights {
            spec.weights = w;
        }
        spec.min_score = draft.min_score;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::InvalidArgument("retrieval name must be non-empty".into()));
        }
        self.weights.validate()?;
        if let Some(q) = self
            .positive_queries
            .iter()
            .find(|q| self.negative_queries.contains(q))
        {
            return Err(Error::InvalidArgument(format!(
                "query `{q}` is both positive and negative"
            )));
        }
        if let Some(p) = self
            .positive_paragraph_ids
            .iter()
            .find(|p| self.negative_paragraph_ids.contains(p))
        {
            return Err(Error::InvalidArgument(format!(
                "paragraph {p} is both positive and negative"
            )));
        }
        if let Some(m) = self.min_score {
            if !m.is_finite() {
                return Err(Error::InvalidArgument("min_score must be finite".into()));
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.positive_queries.is_empty()
            && self.negative_queries.is_empty()
            && self.positive_paragraph_ids.is_empty()
            && self.negative_paragraph_ids.is_empty()
    }

    /// Set semantics: positive and negative membership are exclusive.
    pub fn label(&mut self, paragraph_id: &ParagraphId, polarity: Polarity) {
        self.positive_paragraph_ids.retain(|p| p != paragraph_id);
        self.negative_paragraph_ids.retain(|p| p != paragraph_id);
        match polarity {
            Polarity::Positive => self.positive_paragraph_ids.push(paragraph_id.clone()),
            Polarity::Negative => self.negative_paragraph_ids.push(paragraph_id.clone()),
            Polarity::Clear => {}
        }
    }

    pub fn polarity_of(&self, paragraph_id: &ParagraphId) -> Polarity {
        if self.positive_paragraph_ids.contains(paragraph_id) {
            Polarity::Positive
        } else if self.negative_paragraph_ids.contains(paragraph_id) {
            Polarity::Negative
        } else {
            Polarity::Clear
        }
    }

    /// Adds a query to one side, removing it from the other.
    pub fn add_query(&mut self, query: &str, positive: bool) -> Result<()> {
        let query = query.trim();
        if query.is_empty() {
            return Err(Error::InvalidArgument("query must be non-empty".into()));
        }
        self.positive_queries.retain(|q| q != query);
        self.negative_queries.retain(|q| q != query);
        if positive {
            self.positive_queries.push(query.to_owned());
        } else {
            self.negative_queries.push(query.to_owned());
        }
        Ok(())
    }

    pub fn remove_query(&mut self, query: &str) -> bool {
        let before = self.positive_queries.len() + self.negative_queries.len();
        self.positive_queries.retain(|q| q != query);
        self.negative_queries.retain(|q| q != query);
        before != self.positive_queries.len() + self.negative_queries.len()
    }

    /// Rewrites references to a paragraph whose id changed after correction.
    pub fn migrate_paragraph(&mut self, old: &ParagraphId, new: &ParagraphId) -> bool {
        let mut changed = false;
        for id in self
            .positive_paragraph_ids
            .iter_mut()
            .chain(self.negative_paragraph_ids.iter_mut())
        {
            if id == old {
                *id = new.clone();
                changed = true;
            }
        }
        changed
    }
}

fn dedup_queries(queries: Vec<String>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for q in queries {
        let q = q.trim().to_owned();
        if !q.is_empty() && !out.contains(&q) {
            out.push(q);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pid(s: &str) -> ParagraphId {
        ParagraphId::from(s)
    }

    #[test]
    fn labels_are_exclusive_sets() {
        let mut spec: RetrievalSpec = RetrievalSpec::new("Data").unwrap();
        spec.label(&pid("x"), Polarity::Positive);
        spec.label(&pid("x"), Polarity::Positive);
        assert_eq!(spec.positive_paragraph_ids, vec![pid("x")]);
        spec.label(&pid("x"), Polarity::Negative);
        assert!(spec.positive_paragraph_ids.is_empty());
        assert_eq!(spec.negative_paragraph_ids, vec![pid("x")]);
        spec.label(&pid("x"), Polarity::Clear);
        assert!(spec.is_empty());
    }

    #[test]
    fn validation() {
        assert!(RetrievalSpec::<f64>::new(" ").is_err());
        let mut spec: RetrievalSpec = RetrievalSpec::new("Data").unwrap();
        spec.weights.c = -1.0;
        assert!(spec.validate().is_err());
        spec.weights.c = f64::INFINITY;
        assert!(spec.validate().is_err());
        spec.weights = Weights::default();
        spec.positive_queries.push("q".into());
        spec.negative_queries.push("q".into());
        assert!(spec.validate().is_err());
    }

    #[test]
    fn query_sides_are_exclusive() {
        let mut spec: RetrievalSpec = RetrievalSpec::new("Data").unwrap();
        spec.add_query("related work", true).unwrap();
        spec.add_query("related work", false).unwrap();
        assert!(spec.positive_queries.is_empty());
        assert_eq!(spec.negative_queries, vec!["related work"]);
        assert!(spec.remove_query("related work"));
        assert!(!spec.remove_query("related work"));
    }

    #[test]
    fn json_field_names() {
        let spec: RetrievalSpec = RetrievalSpec::new("Data").unwrap();
        let json = serde_json::to_value(&spec).unwrap();
        for key in [
            "id",
            "name",
            "positive_queries",
            "negative_queries",
            "positive_paragraph_ids",
            "negative_paragraph_ids",
            "weights",
        ] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
        assert_eq!(json["weights"]["a"], 1.0);
    }
}
