use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Accuracy,
    Auc,
    Sensitivity,
    Specificity,
    F1,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::Accuracy,
        Metric::Auc,
        Metric::Sensitivity,
        Metric::Specificity,
        Metric::F1,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::Auc => "auc",
            Metric::Sensitivity => "sensitivity",
            Metric::Specificity => "specificity",
            Metric::F1 => "f1",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown metric {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fn_: usize,
    pub tn: usize,
    pub fp: usize,
}

impl ConfusionMatrix {
    /// MCI (label 1) is the positive class.
    pub fn from_labels(truth: &[u8], predicted: &[u8]) -> Self {
        let mut c = ConfusionMatrix::default();
        for (&t, &p) in truth.iter().zip(predicted) {
            match (t == 1, p == 1) {
                (true, true) => c.tp += 1,
                (true, false) => c.fn_ += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fp += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fn_ + self.tn + self.fp
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub accuracy: f64,
    pub auc: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub f1: f64,
}

impl FoldMetrics {
    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Accuracy => self.accuracy,
            Metric::Auc => self.auc,
            Metric::Sensitivity => self.sensitivity,
            Metric::Specificity => self.specificity,
            Metric::F1 => self.f1,
        }
    }
}

fn check_fold(truth: &[u8]) -> Result<(usize, usize)> {
    if truth.is_empty() {
        return Err(Error::EmptyFold);
    }
    if let Some(&bad) = truth.iter().find(|&&y| y > 1) {
        return Err(Error::NonBinaryLabel(bad));
    }
    let pos = truth.iter().filter(|&&y| y == 1).count();
    let neg = truth.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClassFold);
    }
    Ok((pos, neg))
}

/// Accuracy, sensitivity, specificity and F1 from the confusion matrix of
/// `predicted`; AUC from `scores`.
pub fn compute_fold_metrics(truth: &[u8], predicted: &[u8], scores: &[f64]) -> Result<FoldMetrics> {
    check_fold(truth)?;
    for other in [predicted.len(), scores.len()] {
        if other != truth.len() {
            return Err(Error::DimensionMismatch {
                expected: truth.len(),
                actual: other,
            });
        }
    }
    let c = ConfusionMatrix::from_labels(truth, predicted);
    let (tp, fn_, tn, fp) = (c.tp as f64, c.fn_ as f64, c.tn as f64, c.fp as f64);
    Ok(FoldMetrics {
        accuracy: (tp + tn) / c.total() as f64,
        auc: auc(truth, scores)?,
        sensitivity: tp / (tp + fn_),
        specificity: tn / (tn + fp),
        f1: 2.0 * tp / (2.0 * tp + fp + fn_),
    })
}

/// Midrank (average rank, 1-based) of every value.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j averaged
        let r = (i + 1 + j) as f64 / 2.0;
        for &o in &order[i..j] {
            ranks[o] = r;
        }
        i = j;
    }
    ranks
}

/// Probability that a random positive scores above a random negative, ties
/// counting one half.
///
/// Computed from midranks: the doubled positive rank sum minus
/// `P (P + 1)` is an integer equal to twice the pair count, so the result
/// matches direct pair counting exactly.
pub fn auc(truth: &[u8], scores: &[f64]) -> Result<f64> {
    let (pos, neg) = check_fold(truth)?;
    if scores.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            actual: scores.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFiniteObjective);
    }
    let ranks = midranks(scores);
    let doubled: u64 = truth
        .iter()
        .zip(&ranks)
        .filter(|(&y, _)| y == 1)
        .map(|(_, &r)| (2.0 * r) as u64)
        .sum();
    let twice_pairs = doubled - (pos * (pos + 1)) as u64;
    Ok(twice_pairs as f64 / (2 * pos * neg) as f64)
}
