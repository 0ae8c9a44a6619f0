//! Multi-label classification report: per-class precision, recall, F1 and
//! support, plus micro, macro, weighted and samples averages.
//!
//! A ratio with a zero denominator is reported as 0 and listed in
//! `zero_division`.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Category, Dataset, LabelClassifier, Split, NUM_CATEGORIES};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1_score: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub classes: Vec<MetricRow>,
    pub micro_avg: MetricRow,
    pub macro_avg: MetricRow,
    pub weighted_avg: MetricRow,
    pub samples_avg: MetricRow,
    pub zero_division: Vec<String>,
}

#[derive(Default, Clone, Copy)]
struct Counts {
    tp: usize,
    fp: usize,
    fn_: usize,
}

fn ratio(num: usize, den: usize, what: &str, flags: &mut Vec<String>) -> f64 {
    if den == 0 {
        flags.push(what.to_owned());
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn row_from_counts(label: &str, c: Counts, support: usize, flags: &mut Vec<String>) -> MetricRow {
    MetricRow {
        label: label.to_owned(),
        precision: ratio(c.tp, c.tp + c.fp, &format!("{label} precision"), flags),
        recall: ratio(c.tp, c.tp + c.fn_, &format!("{label} recall"), flags),
        f1_score: ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_, &format!("{label} f1-score"), flags),
        support,
    }
}

impl ClassificationReport {
    /// Panics if the two slices differ in length.
    pub fn from_labels(
        truth: &[[bool; NUM_CATEGORIES]],
        predicted: &[[bool; NUM_CATEGORIES]],
    ) -> Result<Self> {
        assert_eq!(truth.len(), predicted.len(), "one prediction per record");
        if truth.is_empty() {
            return Err(Error::EmptySplit("test split is empty"));
        }
        let mut flags = Vec::new();
        let mut per_class = [Counts::default(); NUM_CATEGORIES];
        for (t, p) in truth.iter().zip(predicted) {
            for j in 0..NUM_CATEGORIES {
                match (t[j], p[j]) {
                    (true, true) => per_class[j].tp += 1,
                    (false, true) => per_class[j].fp += 1,
                    (true, false) => per_class[j].fn_ += 1,
                    (false, false) => {}
                }
            }
        }
        let supports: Vec<usize> = per_class.iter().map(|c| c.tp + c.fn_).collect();
        let total_support: usize = supports.iter().sum();

        let classes: Vec<MetricRow> = (0..NUM_CATEGORIES)
            .map(|j| row_from_counts(&j.to_string(), per_class[j], supports[j], &mut flags))
            .collect();

        let total = per_class.iter().fold(Counts::default(), |acc, c| Counts {
            tp: acc.tp + c.tp,
            fp: acc.fp + c.fp,
            fn_: acc.fn_ + c.fn_,
        });
        let micro_avg = row_from_counts("micro avg", total, total_support, &mut flags);

        let k = NUM_CATEGORIES as f64;
        let macro_avg = MetricRow {
            label: "macro avg".into(),
            precision: classes.iter().map(|r| r.precision).sum::<f64>() / k,
            recall: classes.iter().map(|r| r.recall).sum::<f64>() / k,
            f1_score: classes.iter().map(|r| r.f1_score).sum::<f64>() / k,
            support: total_support,
        };

        let weighted = |f: fn(&MetricRow) -> f64| -> f64 {
            if total_support == 0 {
                0.0
            } else {
                classes
                    .iter()
                    .map(|r| f(r) * r.support as f64)
                    .sum::<f64>()
                    / total_support as f64
            }
        };
        if total_support == 0 {
            flags.push("weighted avg".into());
        }
        let weighted_avg = MetricRow {
            label: "weighted avg".into(),
            precision: weighted(|r| r.precision),
            recall: weighted(|r| r.recall),
            f1_score: weighted(|r| r.f1_score),
            support: total_support,
        };

        let (mut sp, mut sr, mut sf) = (0.0, 0.0, 0.0);
        let mut sample_flags = [false; 3];
        for (t, p) in truth.iter().zip(predicted) {
            let inter = (0..NUM_CATEGORIES).filter(|&j| t[j] && p[j]).count();
            let n_true = t.iter().filter(|x| **x).count();
            let n_pred = p.iter().filter(|x| **x).count();
            let mut ignored = Vec::new();
            sp += ratio(inter, n_pred, "", &mut ignored);
            sample_flags[0] |= n_pred == 0;
            sr += ratio(inter, n_true, "", &mut ignored);
            sample_flags[1] |= n_true == 0;
            sf += ratio(2 * inter, n_true + n_pred, "", &mut ignored);
            sample_flags[2] |= n_true + n_pred == 0;
        }
        for (flag, name) in sample_flags.iter().zip(["precision", "recall", "f1-score"]) {
            if *flag {
                flags.push(format!("samples avg {name}"));
            }
        }
        let n = truth.len() as f64;
        let samples_avg = MetricRow {
            label: "samples avg".into(),
            precision: sp / n,
            recall: sr / n,
            f1_score: sf / n,
            support: total_support,
        };

        Ok(Self {
            classes,
            micro_avg,
            macro_avg,
            weighted_avg,
            samples_avg,
            zero_division: flags,
        })
    }

    pub fn averages(&self) -> [&MetricRow; 4] {
        [&self.micro_avg, &self.macro_avg, &self.weighted_avg, &self.samples_avg]
    }
}

fn title_case(label: &str) -> String {
    let mut chars = label.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

impl fmt::Display for ClassificationReport {
    /// Aligned plain-text table, two decimals.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<14}{:>10}{:>10}{:>10}{:>10}",
            "Class", "Precision", "Recall", "F1-Score", "Support"
        )?;
        for r in &self.classes {
            writeln!(
                f,
                "{:<14}{:>10.2}{:>10.2}{:>10.2}{:>10}",
                r.label, r.precision, r.recall, r.f1_score, r.support
            )?;
        }
        for r in self.averages() {
            writeln!(
                f,
                "{:<14}{:>10.2}{:>10.2}{:>10.2}{:>10}",
                title_case(&r.label),
                r.precision,
                r.recall,
                r.f1_score,
                r.support
            )?;
        }
        let legend: Vec<String> = Category::ALL
            .iter()
            .map(|c| format!("{} = {}", c.index(), c.name()))
            .collect();
        write!(f, "Classes: {}", legend.join(", "))
    }
}

/// Scores `model` on the test split at `threshold`.
pub fn evaluate<T: Scalar>(
    model: &dyn LabelClassifier<T>,
    dataset: &Dataset<T>,
    threshold: T,
) -> Result<ClassificationReport> {
    let mut truth = Vec::new();
    let mut predicted = Vec::new();
    for r in dataset.split(Split::Test) {
        let p = model.predict(&r.embedding, threshold)?;
        let mut row = [false; NUM_CATEGORIES];
        for c in p.labels {
            row[c.index()] = true;
        }
        truth.push(r.labels);
        predicted.push(row);
    }
    ClassificationReport::from_labels(&truth, &predicted)
}
