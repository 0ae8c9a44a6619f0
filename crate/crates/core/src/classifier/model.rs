//! One logistic head per category: `p(label j | x) = sigmoid(w_j . x + b_j)`.
//!
//! Each head minimizes mean binary cross-entropy plus `l2 / 2 * |w_j|^2`
//! (bias unregularized) by full-batch gradient descent from zero.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{Category, Dataset, Split, NUM_CATEGORIES};
use crate::corpus::{random_hex_id, ModelId};
use crate::embedding::{EmbeddingVector, Provenance};
use crate::error::{Error, Result};
use crate::scalar::{dot, Scalar};

pub fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus<T: Scalar>(z: T) -> T {
    z.max(T::zero()) + (-z.abs()).exp().ln_1p()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TrainConfig<T = f64> {
    pub learning_rate: T,
    pub epochs: usize,
    pub l2: T,
    pub seed: u64,
}

impl<T: Scalar> Default for TrainConfig<T> {
    fn default() -> Self {
        Self {
            learning_rate: T::of(0.1),
            epochs: 500,
            l2: T::of(1e-4),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Head<T = f64> {
    pub weights: Vec<T>,
    pub bias: T,
    /// Every training label in this column had the same value.
    pub degenerate: bool,
}

impl<T: Scalar> Head<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            weights: vec![T::zero(); dim],
            bias: T::zero(),
            degenerate: false,
        }
    }

    pub fn probability(&self, x: &[T]) -> T {
        sigmoid(dot(&self.weights, x) + self.bias)
    }
}

/// Loss and gradient of one head over a batch.
///
/// Returns `(loss, d loss / d w, d loss / d b)` where
/// `loss = mean(softplus(z_i) - y_i z_i) + l2/2 |w|^2` and `z_i = w . x_i + b`.
pub fn head_objective<T: Scalar>(
    weights: &[T],
    bias: T,
    xs: &[&[T]],
    ys: &[bool],
    l2: T,
) -> (T, Vec<T>, T) {
    let n = T::of(xs.len().max(1) as f64);
    let mut loss = T::zero();
    let mut grad_w = vec![T::zero(); weights.len()];
    let mut grad_b = T::zero();
    for (x, &y) in xs.iter().zip(ys) {
        let z = dot(weights, x) + bias;
        let y = if y { T::one() } else { T::zero() };
        loss += softplus(z) - y * z;
        let residual = sigmoid(z) - y;
        for (g, xi) in grad_w.iter_mut().zip(x.iter()) {
            *g += residual * *xi;
        }
        grad_b += residual;
    }
    let half = T::of(0.5);
    loss = loss / n + half * l2 * dot(weights, weights);
    for (g, w) in grad_w.iter_mut().zip(weights) {
        *g = *g / n + l2 * *w;
    }
    (loss, grad_w, grad_b / n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Prediction<T = f64> {
    pub probabilities: [T; NUM_CATEGORIES],
    pub labels: BTreeSet<Category>,
}

/// Per-category probability model over embeddings. Other backends (tree
/// ensembles, for instance) plug in here.
pub trait LabelClassifier<T: Scalar> {
    fn provenance(&self) -> &Provenance;
    fn probabilities(&self, x: &[T]) -> [T; NUM_CATEGORIES];

    fn predict(&self, embedding: &EmbeddingVector<T>, threshold: T) -> Result<Prediction<T>> {
        let p = self.provenance();
        if embedding.dim() != p.dim {
            return Err(Error::DimensionMismatch {
                expected: p.dim,
                got: embedding.dim(),
            });
        }
        if embedding.provenance() != *p {
            return Err(Error::ProvenanceMismatch {
                left: p.to_string(),
                right: embedding.provenance().to_string(),
            });
        }
        let probabilities = self.probabilities(embedding.values());
        let labels = Category::ALL
            .into_iter()
            .filter(|c| probabilities[c.index()] >= threshold)
            .collect();
        Ok(Prediction {
            probabilities,
            labels,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LinearLabelModel<T = f64> {
    pub id: ModelId,
    pub heads: Vec<Head<T>>,
    pub config: TrainConfig<T>,
    pub provenance: Provenance,
    /// Sum of head objectives before training and after every epoch.
    pub loss_history: Vec<T>,
}

impl<T: Scalar> LinearLabelModel<T> {
    pub fn zeros(provenance: Provenance, config: TrainConfig<T>) -> Self {
        Self {
            id: ModelId::new(random_hex_id()),
            heads: (0..NUM_CATEGORIES).map(|_| Head::zeros(provenance.dim)).collect(),
            config,
            provenance,
            loss_history: Vec::new(),
        }
    }

    /// Fits every head on the train split. Deterministic for fixed data and
    /// config.
    pub fn train(dataset: &Dataset<T>, config: TrainConfig<T>) -> Result<Self> {
        if config.epochs > 0 && !(config.learning_rate > T::zero() && config.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument("learning rate must be positive".into()));
        }
        if !(config.l2 >= T::zero() && config.l2.is_finite()) {
            return Err(Error::InvalidArgument("l2 must be finite and non-negative".into()));
        }
        let train: Vec<_> = dataset.split(Split::Train).collect();
        if train.is_empty() {
            return Err(Error::EmptySplit("train split is empty"));
        }
        for r in &train {
            if r.embedding.provenance() != dataset.provenance {
                return Err(Error::ProvenanceMismatch {
                    left: dataset.provenance.to_string(),
                    right: r.embedding.provenance().to_string(),
                });
            }
        }
        let xs: Vec<&[T]> = train.iter().map(|r| r.embedding.values()).collect();
        let mut model = Self::zeros(dataset.provenance.clone(), config);
        let columns: Vec<Vec<bool>> = (0..NUM_CATEGORIES)
            .map(|j| train.iter().map(|r| r.labels[j]).collect())
            .collect();

        let mut history = vec![T::zero(); model.config.epochs + 1];
        for (head, ys) in model.heads.iter_mut().zip(&columns) {
            head.degenerate = ys.iter().all(|y| *y) || ys.iter().all(|y| !*y);
            let losses = fit_head(head, &xs, ys, &model.config);
            for (h, l) in history.iter_mut().zip(losses) {
                *h += l;
            }
        }
        model.loss_history = history;
        Ok(model)
    }
}

/// Gradient descent on one head; returns the objective at every epoch
/// boundary (`epochs + 1` values).
fn fit_head<T: Scalar>(head: &mut Head<T>, xs: &[&[T]], ys: &[bool], config: &TrainConfig<T>) -> Vec<T> {
    let mut losses = Vec::with_capacity(config.epochs + 1);
    for _ in 0..config.epochs {
        let (loss, gw, gb) = head_objective(&head.weights, head.bias, xs, ys, config.l2);
        losses.push(loss);
        for (w, g) in head.weights.iter_mut().zip(gw) {
            *w -= config.learning_rate * g;
        }
        head.bias -= config.learning_rate * gb;
    }
    losses.push(head_objective(&head.weights, head.bias, xs, ys, config.l2).0);
    losses
}

impl<T: Scalar> LabelClassifier<T> for LinearLabelModel<T> {
    fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    fn probabilities(&self, x: &[T]) -> [T; NUM_CATEGORIES] {
        let mut out = [T::zero(); NUM_CATEGORIES];
        for (o, h) in out.iter_mut().zip(&self.heads) {
            *o = h.probability(x);
        }
        out
    }
}
