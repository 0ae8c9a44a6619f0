use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Category, NUM_CATEGORIES};
use crate::corpus::ParagraphId;
use crate::embedding::{EmbeddingVector, Provenance};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// A labeled paragraph before splitting.
#[derive(Debug, Clone)]
pub struct LabeledRow<T> {
    pub paragraph_id: ParagraphId,
    pub text: String,
    pub labels: [bool; NUM_CATEGORIES],
    pub irrelevant: bool,
    pub embedding: EmbeddingVector<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DatasetRecord<T> {
    pub paragraph_id: ParagraphId,
    pub text: String,
    pub labels: [bool; NUM_CATEGORIES],
    pub embedding: EmbeddingVector<T>,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Dataset<T = f64> {
    pub records: Vec<DatasetRecord<T>>,
    pub provenance: Provenance,
    pub seed: u64,
    pub test_fraction: f64,
}

/// One JSON-Lines record of an exported dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetLine {
    pub paragraph_id: ParagraphId,
    pub text: String,
    pub labels: Vec<Category>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
}

/// Shuffles `n` indices with a seeded ChaCha8 stream and marks the first
/// `round(n * test_fraction)` as test.
fn assign_splits(n: usize, seed: u64, test_fraction: f64) -> Vec<Split> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = ((n as f64) * test_fraction).round() as usize;
    let mut splits = vec![Split::Train; n];
    for &i in order.iter().take(n_test.min(n)) {
        splits[i] = Split::Test;
    }
    splits
}

fn validate_fraction(test_fraction: f64) -> Result<()> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::InvalidArgument(format!(
            "test_fraction must be in [0, 1), got {test_fraction}"
        )));
    }
    Ok(())
}

/// Builds a seeded, deterministic train/test dataset.
///
/// Rows are ordered by paragraph id before splitting, so the split depends
/// only on the set of rows and the seed. Rows without any category are kept
/// only when `include_irrelevant` is set.
pub fn build_dataset<T: Scalar>(
    mut rows: Vec<LabeledRow<T>>,
    include_irrelevant: bool,
    seed: u64,
    test_fraction: f64,
) -> Result<Dataset<T>> {
    validate_fraction(test_fraction)?;
    rows.retain(|r| include_irrelevant || r.labels.iter().any(|l| *l));
    rows.sort_by(|a, b| a.paragraph_id.cmp(&b.paragraph_id));
    rows.dedup_by(|a, b| a.paragraph_id == b.paragraph_id);

    let empty: Vec<String> = Category::ALL
        .iter()
        .filter(|c| !rows.iter().any(|r| r.labels[c.index()]))
        .map(|c| c.name().to_owned())
        .collect();
    if !empty.is_empty() {
        return Err(Error::EmptyCategory(empty));
    }

    let provenance = rows[0].embedding.provenance();
    for r in &rows[1..] {
        rows[0].embedding.check_provenance(&r.embedding)?;
    }
    let splits = assign_splits(rows.len(), seed, test_fraction);
    Ok(Dataset {
        records: rows
            .into_iter()
            .zip(splits)
            .map(|(r, split)| DatasetRecord {
                paragraph_id: r.paragraph_id,
                text: r.text,
                labels: r.labels,
                embedding: r.embedding,
                split,
            })
            .collect(),
        provenance,
        seed,
        test_fraction,
    })
}

impl<T: Scalar> Dataset<T> {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &DatasetRecord<T>> {
        self.records.iter().filter(move |r| r.split == split)
    }

    pub fn train_len(&self) -> usize {
        self.split(Split::Train).count()
    }

    pub fn test_len(&self) -> usize {
        self.split(Split::Test).count()
    }

    pub fn to_lines(&self, with_embeddings: bool) -> Vec<DatasetLine> {
        self.records
            .iter()
            .map(|r| DatasetLine {
                paragraph_id: r.paragraph_id.clone(),
                text: r.text.clone(),
                labels: Category::ALL
                    .into_iter()
                    .filter(|c| r.labels[c.index()])
                    .collect(),
                embedding: with_embeddings
                    .then(|| r.embedding.values().iter().map(|v| v.to_f64_lossy()).collect()),
                split: Some(r.split),
            })
            .collect()
    }

    pub fn to_jsonl(&self, with_embeddings: bool) -> String {
        let mut out = String::new();
        for line in self.to_lines(with_embeddings) {
            out.push_str(&serde_json::to_string(&line).expect("dataset lines serialize"));
            out.push('\n');
        }
        out
    }

    /// Rebuilds a dataset from exported lines and their embeddings. Lines
    /// without a split are assigned one from `seed`.
    pub fn from_lines(
        lines: Vec<DatasetLine>,
        embeddings: Vec<EmbeddingVector<T>>,
        seed: u64,
        test_fraction: f64,
    ) -> Result<Self> {
        validate_fraction(test_fraction)?;
        if lines.is_empty() {
            return Err(Error::EmptySplit("dataset has no records"));
        }
        if lines.len() != embeddings.len() {
            return Err(Error::InvalidArgument("one embedding per dataset line required".into()));
        }
        let fallback = assign_splits(lines.len(), seed, test_fraction);
        let provenance = embeddings[0].provenance();
        let mut records = Vec::with_capacity(lines.len());
        for ((line, embedding), fallback) in lines.into_iter().zip(embeddings).zip(fallback) {
            if embedding.provenance() != provenance {
                return Err(Error::ProvenanceMismatch {
                    left: provenance.to_string(),
                    right: embedding.provenance().to_string(),
                });
            }
            let mut labels = [false; NUM_CATEGORIES];
            for c in &line.labels {
                labels[c.index()] = true;
            }
            records.push(DatasetRecord {
                paragraph_id: line.paragraph_id,
                text: line.text,
                labels,
                embedding,
                split: line.split.unwrap_or(fallback),
            });
        }
        Ok(Self {
            records,
            provenance,
            seed,
            test_fraction,
        })
    }

    pub fn parse_jsonl(text: &str) -> Result<Vec<DatasetLine>> {
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| {
                    Error::InvalidArgument(format!("dataset line {}: {e}", i + 1))
                })
            })
            .collect()
    }

    /// Caps training rows per category: a row is kept while any of its
    /// categories is below `max_per_category`. Test rows are untouched.
    pub fn downsample_train(&mut self, max_per_category: usize, seed: u64) {
        let mut train: Vec<usize> = self
            .records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.split == Split::Train)
            .map(|(i, _)| i)
            .collect();
        train.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut counts = [0usize; NUM_CATEGORIES];
        let mut drop = vec![false; self.records.len()];
        for i in train {
            let labels = self.records[i].labels;
            let needed = (0..NUM_CATEGORIES).any(|j| labels[j] && counts[j] < max_per_category);
            if needed {
                for j in 0..NUM_CATEGORIES {
                    counts[j] += labels[j] as usize;
                }
            } else {
                drop[i] = true;
            }
        }
        let mut i = 0;
        self.records.retain(|_| {
            let keep = !drop[i];
            i += 1;
            keep
        });
    }
}
