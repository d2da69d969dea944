//! Under-sampling of the majority class: random, NearMiss-3 and instance
//! hardness threshold. Samplers only ever drop majority subjects; survivors
//! keep their original relative order.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cohort::{Diagnosis, LabeledCohort};
use crate::error::{Error, Result};
use crate::evaluation::stratified_kfold;
use crate::neuralnet::{train_classifier, MinMaxNormalizer, TrainConfig};
use crate::seed::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMethod {
    #[default]
    None,
    Random,
    NearMiss3,
    InstanceHardness,
}

impl fmt::Display for SamplingMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SamplingMethod::None => "none",
            SamplingMethod::Random => "random",
            SamplingMethod::NearMiss3 => "near_miss_3",
            SamplingMethod::InstanceHardness => "instance_hardness",
        })
    }
}

impl FromStr for SamplingMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(SamplingMethod::None),
            "random" => Ok(SamplingMethod::Random),
            "nearmiss3" | "near_miss_3" => Ok(SamplingMethod::NearMiss3),
            "iht" | "instance_hardness" => Ok(SamplingMethod::InstanceHardness),
            other => Err(Error::InvalidConfig(format!("unknown sampler {other:?}"))),
        }
    }
}

/// Where resampling happens: once on the whole cohort before splitting, or
/// on each training split only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerMode {
    #[default]
    Dataset,
    Fold,
}

impl fmt::Display for SamplerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SamplerMode::Dataset => "dataset",
            SamplerMode::Fold => "fold",
        })
    }
}

impl FromStr for SamplerMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dataset" => Ok(SamplerMode::Dataset),
            "fold" => Ok(SamplerMode::Fold),
            other => Err(Error::InvalidConfig(format!(
                "unknown sampler mode {other:?}"
            ))),
        }
    }
}

/// Representation used for NearMiss distances and hardness scores.
pub const SAMPLING_FEATURE_SPACE: &str = "min_max_normalized_fused";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub method: SamplingMethod,
    pub mode: SamplerMode,
    pub k_neighbors: usize,
    pub seed: u64,
    pub iht_train_config: TrainConfig,
    pub iht_internal_folds: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            method: SamplingMethod::None,
            mode: SamplerMode::Dataset,
            k_neighbors: 3,
            seed: 0,
            iht_train_config: TrainConfig::default(),
            iht_internal_folds: 5,
        }
    }
}

impl SamplerConfig {
    pub fn new(method: SamplingMethod) -> Self {
        Self {
            method,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_neighbors == 0 {
            return Err(Error::InvalidConfig("k_neighbors must be >= 1".into()));
        }
        if self.iht_internal_folds < 2 {
            return Err(Error::InvalidConfig(
                "iht_internal_folds must be >= 2".into(),
            ));
        }
        self.iht_train_config.validate()
    }
}

struct Classes {
    majority: Vec<usize>,
    minority: Vec<usize>,
}

fn split_classes(cohort: &LabeledCohort) -> Result<Option<Classes>> {
    if !cohort.has_both_classes() {
        return Err(Error::SingleClassCohort);
    }
    Ok(cohort.majority().map(|(maj, min)| {
        let of = |class: Diagnosis| -> Vec<usize> {
            (0..cohort.len())
                .filter(|&i| cohort.labels()[i] == class)
                .collect()
        };
        Classes {
            majority: of(maj),
            minority: of(min),
        }
    }))
}

fn survivors(classes: &Classes, kept_majority: impl IntoIterator<Item = usize>) -> Vec<usize> {
    let mut keep: Vec<usize> = classes.minority.clone();
    keep.extend(kept_majority);
    keep.sort_unstable();
    keep
}

/// Indices retained by the configured sampler, ascending.
pub fn sample_indices(cohort: &LabeledCohort, cfg: &SamplerConfig) -> Result<Vec<usize>> {
    cfg.validate()?;
    match cfg.method {
        SamplingMethod::None => Ok((0..cohort.len()).collect()),
        SamplingMethod::Random => random_undersample_indices(cohort, cfg.seed),
        SamplingMethod::NearMiss3 => near_miss_3_indices(cohort, cfg.k_neighbors),
        SamplingMethod::InstanceHardness => instance_hardness_indices(cohort, cfg),
    }
}

pub fn apply_sampler(cohort: &LabeledCohort, cfg: &SamplerConfig) -> Result<LabeledCohort> {
    Ok(cohort.subset(&sample_indices(cohort, cfg)?))
}

pub fn random_undersample_indices(cohort: &LabeledCohort, seed: u64) -> Result<Vec<usize>> {
    let Some(classes) = split_classes(cohort)? else {
        return Ok((0..cohort.len()).collect());
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked = rand::seq::index::sample(&mut rng, classes.majority.len(), classes.minority.len());
    Ok(survivors(
        &classes,
        picked.into_iter().map(|i| classes.majority[i]),
    ))
}

/// Majority class reduced to the minority size by uniform sampling without
/// replacement.
pub fn random_undersample(cohort: &LabeledCohort, seed: u64) -> Result<LabeledCohort> {
    Ok(cohort.subset(&random_undersample_indices(cohort, seed)?))
}

fn euclidean(a: ndarray::ArrayView1<'_, f64>, b: ndarray::ArrayView1<'_, f64>) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Cohort-wide min-max normalized fused features.
pub fn sampling_space(cohort: &LabeledCohort) -> Result<Array2<f64>> {
    let fused = cohort.fused();
    MinMaxNormalizer::fit(fused.view())?.transform(fused.view())
}

/// Mean of the `k` smallest values (all of them if fewer).
fn mean_of_smallest(mut d: Vec<f64>, k: usize) -> f64 {
    d.sort_by(f64::total_cmp);
    let k = k.min(d.len());
    d[..k].iter().sum::<f64>() / k as f64
}

/// NearMiss-3 on an explicit point set. Returns the retained majority
/// positions (indices into `majority`), ascending.
pub fn near_miss_3_select(
    points: ArrayView2<'_, f64>,
    majority: &[usize],
    minority: &[usize],
    k: usize,
) -> Vec<usize> {
    let k = k.max(1).min(minority.len());
    let target = minority.len().min(majority.len());
    // dist[j][i]: majority j to minority i
    let dist: Vec<Vec<f64>> = majority
        .par_iter()
        .map(|&j| {
            minority
                .iter()
                .map(|&i| euclidean(points.row(j), points.row(i)))
                .collect()
        })
        .collect();

    // step 1: the k nearest majority samples of every minority sample
    let mut short_list = BTreeSet::new();
    for i in 0..minority.len() {
        let mut order: Vec<usize> = (0..majority.len()).collect();
        order.sort_by(|&a, &b| dist[a][i].total_cmp(&dist[b][i]).then(a.cmp(&b)));
        short_list.extend(order.into_iter().take(k));
    }

    // step 2: largest average distance to the k nearest minority samples
    let score: Vec<f64> = dist
        .iter()
        .map(|row| mean_of_smallest(row.clone(), k))
        .collect();
    let by_score = |a: &usize, b: &usize| score[*b].total_cmp(&score[*a]).then(a.cmp(b));
    let mut listed: Vec<usize> = short_list.iter().copied().collect();
    listed.sort_by(by_score);
    let mut rest: Vec<usize> = (0..majority.len())
        .filter(|j| !short_list.contains(j))
        .collect();
    rest.sort_by(by_score);

    let mut kept: Vec<usize> = listed.into_iter().chain(rest).take(target).collect();
    kept.sort_unstable();
    kept
}

pub fn near_miss_3_indices(cohort: &LabeledCohort, k: usize) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::InvalidConfig("k_neighbors must be >= 1".into()));
    }
    let Some(classes) = split_classes(cohort)? else {
        return Ok((0..cohort.len()).collect());
    };
    let points = sampling_space(cohort)?;
    let kept = near_miss_3_select(points.view(), &classes.majority, &classes.minority, k);
    Ok(survivors(
        &classes,
        kept.into_iter().map(|j| classes.majority[j]),
    ))
}

/// NearMiss-3 with `k` clamped to the minority size.
pub fn near_miss_3(cohort: &LabeledCohort, k: usize) -> Result<LabeledCohort> {
    Ok(cohort.subset(&near_miss_3_indices(cohort, k)?))
}

/// Out-of-fold probability of the true class for every subject, from an
/// internal stratified cross-validation of the network on fused features.
pub fn instance_hardness_scores(cohort: &LabeledCohort, cfg: &SamplerConfig) -> Result<Vec<f64>> {
    let labels = cohort.label_bits();
    let folds = cfg.iht_internal_folds;
    for class in [Diagnosis::Hc, Diagnosis::Mci] {
        let size = cohort.count(class);
        if size < folds {
            return Err(Error::InsufficientSamplesForFolds {
                class_size: size,
                folds,
            });
        }
    }
    let fused = cohort.fused();
    let splits = stratified_kfold(&labels, folds, derive_seed(cfg.seed, 0))?;
    let per_fold: Vec<(Vec<usize>, Vec<f64>)> = splits
        .par_iter()
        .map(|split| {
            let train_cfg = cfg
                .iht_train_config
                .with_seed(derive_seed(cfg.seed, 1 + split.fold as u64));
            let xs = fused.select(ndarray::Axis(0), &split.train);
            let ys: Vec<u8> = split.train.iter().map(|&i| labels[i]).collect();
            let model = train_classifier(xs.view(), &ys, &train_cfg)?;
            let test = fused.select(ndarray::Axis(0), &split.test);
            Ok((split.test.clone(), model.predict_proba_batch(test.view())?))
        })
        .collect::<Result<_>>()?;
    let mut scores = vec![0.0; cohort.len()];
    for (test, probs) in per_fold {
        for (i, p) in test.into_iter().zip(probs) {
            scores[i] = if labels[i] == 1 { p } else { 1.0 - p };
        }
    }
    Ok(scores)
}

pub fn instance_hardness_indices(
    cohort: &LabeledCohort,
    cfg: &SamplerConfig,
) -> Result<Vec<usize>> {
    let Some(classes) = split_classes(cohort)? else {
        return Ok((0..cohort.len()).collect());
    };
    let scores = instance_hardness_scores(cohort, cfg)?;
    let mut order = classes.majority.clone();
    // hardest (lowest correct-class probability) first
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let drop = classes.majority.len() - classes.minority.len();
    Ok(survivors(&classes, order.into_iter().skip(drop)))
}

/// Removes the majority subjects with the lowest out-of-fold correct-class
/// probability until the classes are balanced.
pub fn instance_hardness_threshold(
    cohort: &LabeledCohort,
    cfg: &SamplerConfig,
) -> Result<LabeledCohort> {
    Ok(cohort.subset(&instance_hardness_indices(cohort, cfg)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    fn cohort(points: &Array2<f64>, labels: &[u8]) -> LabeledCohort {
        let col = |j: usize| points.column(j).to_owned().insert_axis(ndarray::Axis(1));
        LabeledCohort::new(
            (0..labels.len()).map(|i| format!("s{i:02}")).collect(),
            labels
                .iter()
                .map(|&l| Diagnosis::from_u8(l).unwrap())
                .collect(),
            [col(0), col(1), col(0) * 0.0],
        )
        .unwrap()
    }

    fn imbalanced() -> LabeledCohort {
        let pts = Array2::from_shape_fn((15, 2), |(i, j)| ((i * 13 + j * 7) % 11) as f64);
        let labels: Vec<u8> = (0..15).map(|i| u8::from(i % 3 != 0)).collect();
        cohort(&pts, &labels)
    }

    #[test]
    fn random_balances_and_keeps_minority() {
        let c = imbalanced();
        let out = random_undersample(&c, 3).unwrap();
        assert_eq!(out.count(Diagnosis::Hc), 5);
        assert_eq!(out.count(Diagnosis::Mci), 5);
        let hc: Vec<&String> = c
            .subject_ids()
            .iter()
            .zip(c.labels())
            .filter(|(_, l)| **l == Diagnosis::Hc)
            .map(|(s, _)| s)
            .collect();
        let hc_out: Vec<&String> = out
            .subject_ids()
            .iter()
            .zip(out.labels())
            .filter(|(_, l)| **l == Diagnosis::Hc)
            .map(|(s, _)| s)
            .collect();
        assert_eq!(hc, hc_out);
        assert_eq!(out, random_undersample(&c, 3).unwrap());
        let sorted = out.subject_ids().windows(2).all(|w| w[0] < w[1]);
        assert!(sorted);
    }

    #[test]
    fn balanced_cohort_is_unchanged() {
        let pts = array![[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]];
        let c = cohort(&pts, &[0, 1, 0, 1]);
        assert_eq!(random_undersample(&c, 1).unwrap(), c);
        assert_eq!(near_miss_3(&c, 3).unwrap(), c);
    }

    #[test]
    fn single_class_rejected() {
        let pts = array![[0.0, 0.0], [1.0, 1.0]];
        let c = cohort(&pts, &[1, 1]);
        assert!(matches!(
            random_undersample(&c, 1),
            Err(Error::SingleClassCohort)
        ));
        assert!(matches!(near_miss_3(&c, 1), Err(Error::SingleClassCohort)));
    }

    #[test]
    fn near_miss_keeps_far_outlier() {
        // every minority point has the same nearest majority point, so the
        // short-list is smaller than the minority class and the rest is
        // filled by largest average distance
        let pts = array![
            [0.0, 0.0],
            [0.2, 0.1],
            [0.1, 0.3],
            [1.0, 1.0],
            [3.0, 3.5],
            [3.5, 3.0],
            [4.0, 4.0],
            [4.5, 4.0],
            [100.0, 100.0]
        ];
        let c = cohort(&pts, &[0, 0, 0, 1, 1, 1, 1, 1, 1]);
        let kept = near_miss_3_indices(&c, 1).unwrap();
        assert_eq!(kept, vec![0, 1, 2, 3, 7, 8]);
        // k above the minority size is clamped
        let clamped = near_miss_3_indices(&c, 10).unwrap();
        assert_eq!(clamped, near_miss_3_indices(&c, 3).unwrap());
        assert_eq!(clamped.len(), 6);
    }

    #[test]
    fn config_parsing() {
        assert_eq!(
            "nearmiss3".parse::<SamplingMethod>().unwrap(),
            SamplingMethod::NearMiss3
        );
        assert_eq!(
            "iht".parse::<SamplingMethod>().unwrap(),
            SamplingMethod::InstanceHardness
        );
        assert_eq!("fold".parse::<SamplerMode>().unwrap(), SamplerMode::Fold);
        assert!("smote".parse::<SamplingMethod>().is_err());
        let bad = SamplerConfig {
            k_neighbors: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn iht_needs_enough_samples() {
        let pts = Array2::from_shape_fn((7, 2), |(i, j)| (i + j) as f64);
        let c = cohort(&pts, &[0, 0, 1, 1, 1, 1, 1]);
        let cfg = SamplerConfig::new(SamplingMethod::InstanceHardness);
        assert!(matches!(
            instance_hardness_threshold(&c, &cfg),
            Err(Error::InsufficientSamplesForFolds {
                class_size: 2,
                folds: 5
            })
        ));
    }
}
