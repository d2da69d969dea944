use std::fmt;
use std::str::FromStr;

use ndarray::{concatenate, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::connectome::{FeatureVector, Measure};
use crate::error::{Error, Result};

/// Diagnostic group. MCI is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Diagnosis {
    #[serde(rename = "HC")]
    Hc,
    #[serde(rename = "MCI")]
    Mci,
}

impl Diagnosis {
    pub fn as_u8(self) -> u8 {
        match self {
            Diagnosis::Hc => 0,
            Diagnosis::Mci => 1,
        }
    }

    pub fn from_u8(v: u8) -> Result<Self> {
        match v {
            0 => Ok(Diagnosis::Hc),
            1 => Ok(Diagnosis::Mci),
            other => Err(Error::NonBinaryLabel(other)),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Diagnosis::Hc => "HC",
            Diagnosis::Mci => "MCI",
        }
    }
}

impl fmt::Display for Diagnosis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Diagnosis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "HC" => Ok(Diagnosis::Hc),
            "MCI" => Ok(Diagnosis::Mci),
            other => Err(Error::UnknownLabel(other.to_string())),
        }
    }
}

/// Subjects, their labels and one feature matrix per single measure.
///
/// Row `i` of every matrix belongs to `subject_ids[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCohort {
    subject_ids: Vec<String>,
    labels: Vec<Diagnosis>,
    features: [Array2<f64>; 3],
}

impl LabeledCohort {
    /// `features` is ordered as [`Measure::SINGLE`].
    pub fn new(
        subject_ids: Vec<String>,
        labels: Vec<Diagnosis>,
        features: [Array2<f64>; 3],
    ) -> Result<Self> {
        let n = subject_ids.len();
        if labels.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: labels.len(),
            });
        }
        for f in &features {
            if f.nrows() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: f.nrows(),
                });
            }
        }
        let mut seen = std::collections::HashSet::with_capacity(n);
        for id in &subject_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateSubjectId(id.clone()));
            }
        }
        Ok(Self {
            subject_ids,
            labels,
            features,
        })
    }

    /// Builds a cohort from per-subject feature vectors (any measure order).
    pub fn from_subjects(
        subject_ids: Vec<String>,
        labels: Vec<Diagnosis>,
        subjects: &[[FeatureVector; 3]],
    ) -> Result<Self> {
        let mut features: Vec<Array2<f64>> = Vec::with_capacity(3);
        for measure in Measure::SINGLE {
            let dim = subjects
                .first()
                .map_or(0, |s| find(s, measure).map_or(0, |f| f.len()));
            let mut m = Array2::zeros((subjects.len(), dim));
            for (i, s) in subjects.iter().enumerate() {
                let fv = find(s, measure)?;
                if fv.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        actual: fv.len(),
                    });
                }
                m.row_mut(i)
                    .assign(&ndarray::ArrayView1::from(&fv.values[..]));
            }
            features.push(m);
        }
        let features: [Array2<f64>; 3] = features.try_into().expect("three measures");
        Self::new(subject_ids, labels, features)
    }

    pub fn len(&self) -> usize {
        self.subject_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subject_ids.is_empty()
    }

    pub fn subject_ids(&self) -> &[String] {
        &self.subject_ids
    }

    pub fn labels(&self) -> &[Diagnosis] {
        &self.labels
    }

    pub fn label_bits(&self) -> Vec<u8> {
        self.labels.iter().map(|l| l.as_u8()).collect()
    }

    pub fn count(&self, class: Diagnosis) -> usize {
        self.labels.iter().filter(|&&l| l == class).count()
    }

    /// Feature matrix of a single measure, or the concatenation of all three
    /// (weights, shortest path, communicability) for [`Measure::Fused`].
    pub fn features(&self, measure: Measure) -> std::borrow::Cow<'_, Array2<f64>> {
        match measure.index() {
            Some(i) => std::borrow::Cow::Borrowed(&self.features[i]),
            None => std::borrow::Cow::Owned(self.fused()),
        }
    }

    pub fn feature_view(&self, measure: Measure) -> Option<ArrayView2<'_, f64>> {
        measure.index().map(|i| self.features[i].view())
    }

    pub fn fused(&self) -> Array2<f64> {
        concatenate(
            Axis(1),
            &[
                self.features[0].view(),
                self.features[1].view(),
                self.features[2].view(),
            ],
        )
        .expect("row counts agree")
    }

    /// The three feature vectors of one subject.
    pub fn subject_features(&self, index: usize) -> [FeatureVector; 3] {
        Measure::SINGLE.map(|m| {
            FeatureVector::new(
                m,
                self.features[m.index().expect("single")]
                    .row(index)
                    .to_vec(),
            )
        })
    }

    /// Rows at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> LabeledCohort {
        LabeledCohort {
            subject_ids: indices
                .iter()
                .map(|&i| self.subject_ids[i].clone())
                .collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            features: [0, 1, 2].map(|m| self.features[m].select(Axis(0), indices)),
        }
    }

    /// Majority and minority class; `None` when the classes are balanced.
    pub fn majority(&self) -> Option<(Diagnosis, Diagnosis)> {
        let (hc, mci) = (self.count(Diagnosis::Hc), self.count(Diagnosis::Mci));
        match hc.cmp(&mci) {
            std::cmp::Ordering::Greater => Some((Diagnosis::Hc, Diagnosis::Mci)),
            std::cmp::Ordering::Less => Some((Diagnosis::Mci, Diagnosis::Hc)),
            std::cmp::Ordering::Equal => None,
        }
    }

    pub fn has_both_classes(&self) -> bool {
        self.count(Diagnosis::Hc) > 0 && self.count(Diagnosis::Mci) > 0
    }
}

fn find(subject: &[FeatureVector; 3], measure: Measure) -> Result<&FeatureVector> {
    subject
        .iter()
        .find(|f| f.measure == measure)
        .ok_or(Error::MissingMeasure(measure.as_str()))
}
