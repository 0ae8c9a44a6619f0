//! Multi-label paragraph classification over embeddings: dataset export,
//! one sigmoid head per category, and precision/recall/F1 reporting.

mod dataset;
mod model;
mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use dataset::{build_dataset, Dataset, DatasetLine, DatasetRecord, LabeledRow, Split};
pub use model::{
    head_objective, sigmoid, Head, LabelClassifier, LinearLabelModel, Prediction, TrainConfig,
};
pub use report::{evaluate, ClassificationReport, MetricRow};

use crate::corpus::ParagraphId;
use crate::error::{Error, Result};

pub const NUM_CATEGORIES: usize = 4;

/// Information category; the index order is fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Data = 0,
    Sensing = 1,
    Model = 2,
    System = 3,
}

impl Category {
    pub const ALL: [Category; NUM_CATEGORIES] =
        [Category::Data, Category::Sensing, Category::Model, Category::System];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::Data => "data",
            Category::Sensing => "sensing",
            Category::Model => "model",
            Category::System => "system",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if let Ok(i) = s.parse::<usize>() {
            return Category::from_index(i)
                .ok_or_else(|| Error::InvalidArgument(format!("category index {i} out of range")));
        }
        Category::ALL
            .into_iter()
            .find(|c| c.name() == s || (s == "dataset" && *c == Category::Data))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown category `{s}`")))
    }
}

/// Explicit categories assigned to a paragraph. `irrelevant` excludes labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub paragraph_id: ParagraphId,
    pub labels: BTreeSet<Category>,
    #[serde(default)]
    pub irrelevant: bool,
}

impl LabelRecord {
    pub fn new(
        paragraph_id: ParagraphId,
        labels: impl IntoIterator<Item = Category>,
        irrelevant: bool,
    ) -> Result<Self> {
        let labels: BTreeSet<Category> = labels.into_iter().collect();
        if irrelevant && !labels.is_empty() {
            return Err(Error::InvalidArgument(
                "an irrelevant paragraph cannot carry category labels".into(),
            ));
        }
        Ok(Self {
            paragraph_id,
            labels,
            irrelevant,
        })
    }

    pub fn label_vector(&self) -> [bool; NUM_CATEGORIES] {
        let mut v = [false; NUM_CATEGORIES];
        for c in &self.labels {
            v[c.index()] = true;
        }
        v
    }
}

/// Explicit label records keyed by paragraph id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelStore {
    records: BTreeMap<ParagraphId, LabelRecord>,
}

impl LabelStore {
    pub fn from_records(records: impl IntoIterator<Item = LabelRecord>) -> Self {
        Self {
            records: records
                .into_iter()
                .map(|r| (r.paragraph_id.clone(), r))
                .collect(),
        }
    }

    pub fn get(&self, id: &ParagraphId) -> Option<&LabelRecord> {
        self.records.get(id)
    }

    pub fn records(&self) -> impl Iterator<Item = &LabelRecord> {
        self.records.values()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Replaces the record; an empty, relevant record removes the entry.
    pub fn set(&mut self, record: LabelRecord) {
        if record.labels.is_empty() && !record.irrelevant {
            self.records.remove(&record.paragraph_id);
        } else {
            self.records.insert(record.paragraph_id.clone(), record);
        }
    }

    pub fn remove(&mut self, id: &ParagraphId) -> Option<LabelRecord> {
        self.records.remove(id)
    }

    /// Moves a record to the paragraph's new id after a correction.
    pub fn migrate(&mut self, old: &ParagraphId, new: &ParagraphId) -> bool {
        match self.records.remove(old) {
            Some(mut r) => {
                r.paragraph_id = new.clone();
                self.records.insert(new.clone(), r);
                true
            }
            None => false,
        }
    }
}
