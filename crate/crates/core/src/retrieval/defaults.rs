use serde::{Deserialize, Serialize};

use super::Weights;
use crate::classifier::Category;
use crate::scalar::Scalar;

/// User-facing shape for creating a retrieval: a name, optional description
/// and positive/negative query lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RetrievalDraft<T = f64> {
    pub name: String,
    #[serde(default)]
    pub description: Option<String>,
    #[serde(default)]
    pub category: Option<Category>,
    #[serde(default)]
    pub positive_queries: Vec<String>,
    #[serde(default)]
    pub negative_queries: Vec<String>,
    #[serde(default)]
    pub weights: Option<Weights<T>>,
    #[serde(default)]
    pub min_score: Option<T>,
}

const DEFAULTS: [&str; 4] = [
    include_str!("../../fixtures/retrievals/data_relevant.json"),
    include_str!("../../fixtures/retrievals/model_relevant.json"),
    include_str!("../../fixtures/retrievals/sensing_relevant.json"),
    include_str!("../../fixtures/retrievals/system_relevant.json"),
];

/// The four shipped category retrievals (data, model, sensing, system).
pub fn default_drafts<T: Scalar>() -> Vec<RetrievalDraft<T>> {
    DEFAULTS
        .iter()
        .map(|json| serde_json::from_str(json).expect("shipped retrieval fixtures are valid"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_defaults_one_per_category() {
        let drafts: Vec<RetrievalDraft> = default_drafts();
        assert_eq!(drafts.len(), 4);
        let mut cats: Vec<_> = drafts.iter().map(|d| d.category.unwrap()).collect();
        cats.sort();
        assert_eq!(cats, Category::ALL.to_vec());
        assert!(drafts.iter().all(|d| !d.positive_queries.is_empty()));
        assert_eq!(drafts[0].positive_queries[4], "Are the relevant dataset statistics provided?");
    }
}
