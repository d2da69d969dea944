//! One network per network measure, combined by averaging their
//! probabilities (soft voting), plus the feature-fusion baseline input.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cohort::{Diagnosis, LabeledCohort};
use crate::connectome::{FeatureVector, Measure};
use crate::error::{Error, Result};
use crate::neuralnet::{train_classifier, MlpModel, TrainConfig};

/// Default decision threshold on the MCI probability.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Members ordered as [`Measure::SINGLE`], all trained with the same config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub members: [MlpModel; 3],
}

impl EnsembleModel {
    pub fn member(&self, measure: Measure) -> Option<&MlpModel> {
        measure.index().map(|i| &self.members[i])
    }

    /// Member probabilities for one subject, ordered as [`Measure::SINGLE`].
    pub fn member_probabilities(&self, subject: &[FeatureVector]) -> Result<[f64; 3]> {
        let mut out = [0.0; 3];
        for (slot, measure) in out.iter_mut().zip(Measure::SINGLE) {
            let fv = subject
                .iter()
                .find(|f| f.measure == measure)
                .ok_or(Error::MissingMeasure(measure.as_str()))?;
            *slot = self.members[measure.index().expect("single")].predict_proba(&fv.values)?;
        }
        Ok(out)
    }

    /// Mean of the three member probabilities.
    pub fn soft_vote(&self, subject: &[FeatureVector]) -> Result<f64> {
        Ok(mean3(self.member_probabilities(subject)?))
    }

    /// Per-member and ensemble probabilities for every subject of `cohort`.
    pub fn predict_cohort(&self, cohort: &LabeledCohort) -> Result<([Vec<f64>; 3], Vec<f64>)> {
        let mut members: [Vec<f64>; 3] = Default::default();
        for (slot, measure) in members.iter_mut().zip(Measure::SINGLE) {
            let xs = cohort.feature_view(measure).expect("single");
            *slot = self.members[measure.index().expect("single")].predict_proba_batch(xs)?;
        }
        let ensemble = (0..cohort.len())
            .map(|i| mean3([members[0][i], members[1][i], members[2][i]]))
            .collect();
        Ok((members, ensemble))
    }
}

fn mean3(p: [f64; 3]) -> f64 {
    (p[0] + p[1] + p[2]) / 3.0
}

/// Trains the three members independently on their own measure.
pub fn train_ensemble(cohort: &LabeledCohort, cfg: &TrainConfig) -> Result<EnsembleModel> {
    let ys = cohort.label_bits();
    let members: Vec<MlpModel> = Measure::SINGLE
        .par_iter()
        .map(|&measure| {
            let xs = cohort
                .feature_view(measure)
                .ok_or(Error::MissingMeasure(measure.as_str()))?;
            if xs.ncols() == 0 {
                return Err(Error::MissingMeasure(measure.as_str()));
            }
            train_classifier(xs, &ys, cfg)
        })
        .collect::<Result<_>>()?;
    Ok(EnsembleModel {
        members: members.try_into().expect("three members"),
    })
}

/// Concatenates the three single-measure vectors in the fixed order
/// weights, shortest path, communicability, whatever order they arrive in.
pub fn fuse_features(vectors: [&FeatureVector; 3]) -> Result<FeatureVector> {
    let mut ordered: [Option<&FeatureVector>; 3] = [None; 3];
    for fv in vectors {
        let i = fv
            .measure
            .index()
            .ok_or(Error::MissingMeasure("single measure"))?;
        ordered[i] = Some(fv);
    }
    let mut values = Vec::new();
    let mut expected = None;
    for (slot, measure) in ordered.iter().zip(Measure::SINGLE) {
        let fv = slot.ok_or(Error::MissingMeasure(measure.as_str()))?;
        match expected {
            None => expected = Some(fv.len()),
            Some(e) if e != fv.len() => {
                return Err(Error::DimensionMismatch {
                    expected: e,
                    actual: fv.len(),
                })
            }
            _ => {}
        }
        values.extend_from_slice(&fv.values);
    }
    Ok(FeatureVector::new(Measure::Fused, values))
}

/// MCI iff `p >= threshold`.
pub fn predict_label(p: f64, threshold: f64) -> Diagnosis {
    if p >= threshold {
        Diagnosis::Mci
    } else {
        Diagnosis::Hc
    }
}
