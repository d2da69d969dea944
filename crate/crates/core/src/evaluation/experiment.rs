use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::folds::{repeated_stratified_kfold, FoldAssignment};
use super::metrics::{auc, compute_fold_metrics, FoldMetrics, Metric};
use super::stats::{aggregate_metrics, mann_whitney_u, MannWhitneyMethod};
use crate::cohort::{Diagnosis, LabeledCohort};
use crate::ensemble::{predict_label, train_ensemble, DEFAULT_THRESHOLD};
use crate::error::{Error, Result};
use crate::neuralnet::{train_classifier, TrainConfig};
use crate::sampling::{
    sample_indices, SamplerConfig, SamplerMode, SamplingMethod, SAMPLING_FEATURE_SPACE,
};
use crate::seed::derive_seed;

/// A classifier evaluated by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Weights,
    ShortestPath,
    Communicability,
    Fusion,
    Ensemble,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Weights,
        Strategy::ShortestPath,
        Strategy::Communicability,
        Strategy::Fusion,
        Strategy::Ensemble,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Weights => "weights",
            Strategy::ShortestPath => "shortest_path",
            Strategy::Communicability => "communicability",
            Strategy::Fusion => "fusion",
            Strategy::Ensemble => "ensemble",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown strategy {s:?}")))
    }
}

/// AUC per test fold, or once per repetition over the pooled test scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AucMode {
    #[default]
    PerFold,
    Pooled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub sampler: SamplerConfig,
    /// Shared by every network. Its `seed` is replaced by a per-fold seed.
    pub train: TrainConfig,
    pub folds: usize,
    pub repetitions: usize,
    pub seed: u64,
    pub threshold: f64,
    pub auc_mode: AucMode,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            sampler: SamplerConfig::default(),
            train: TrainConfig::default(),
            folds: 10,
            repetitions: 10,
            seed: 0,
            threshold: DEFAULT_THRESHOLD,
            auc_mode: AucMode::PerFold,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 || self.repetitions == 0 {
            return Err(Error::InvalidConfig(
                "need folds >= 2 and repetitions >= 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::InvalidConfig(format!(
                "threshold {} outside [0, 1]",
                self.threshold
            )));
        }
        self.train.validate()?;
        self.sampler.validate()
    }
}

/// Configuration echo stored with every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub experiment: ExperimentConfig,
    pub seed_derivation: String,
    pub sampling_feature_space: String,
    /// Unit of the samples compared by the pairwise tests.
    pub significance_unit: String,
    pub n_subjects: usize,
    pub n_hc: usize,
    pub n_mci: usize,
    /// Class sizes after dataset-level resampling.
    pub n_hc_evaluated: usize,
    pub n_mci_evaluated: usize,
    /// Set by callers that extracted the features themselves.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disconnected_policy: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub se: f64,
    /// Number of values aggregated (repetitions instead of folds for pooled AUC).
    pub n_folds: usize,
    /// Per-fold values in (repetition, fold) order.
    pub values: Vec<f64>,
}

impl MetricSummary {
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        let (mean, se) = aggregate_metrics(&values)?;
        Ok(Self {
            mean,
            se,
            n_folds: values.len(),
            values,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseTest {
    pub metric: Metric,
    pub a: Strategy,
    pub b: Strategy,
    pub u: f64,
    pub p: f64,
    pub method: MannWhitneyMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub config: ReportConfig,
    pub strategies: BTreeMap<Strategy, BTreeMap<Metric, MetricSummary>>,
    pub pairwise_tests: Vec<PairwiseTest>,
}

impl EvaluationReport {
    pub fn summary(&self, strategy: Strategy, metric: Metric) -> Option<&MetricSummary> {
        self.strategies.get(&strategy)?.get(&metric)
    }

    pub fn mean(&self, strategy: Strategy, metric: Metric) -> f64 {
        self.summary(strategy, metric).map_or(f64::NAN, |s| s.mean)
    }

    pub fn test(&self, metric: Metric, a: Strategy, b: Strategy) -> Option<&PairwiseTest> {
        self.pairwise_tests
            .iter()
            .find(|t| t.metric == metric && ((t.a == a && t.b == b) || (t.a == b && t.b == a)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStage {
    Sampler,
    Normalizer,
}

/// Subjects whose data a fitted component was allowed to see. Indices refer
/// to the input cohort.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FitEvent {
    pub stage: FitStage,
    pub repetition: Option<usize>,
    pub fold: Option<usize>,
    pub subjects: Vec<usize>,
}

/// Per-fold results. Indices refer to the input cohort.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldOutcome {
    pub repetition: usize,
    pub fold: usize,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub test_labels: Vec<u8>,
    pub scores: BTreeMap<Strategy, Vec<f64>>,
    pub metrics: BTreeMap<Strategy, FoldMetrics>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub report: EvaluationReport,
    pub folds: Vec<FoldOutcome>,
}

pub type Observer<'a> = &'a (dyn Fn(&FitEvent) + Sync);

/// Repeated stratified cross-validation of all five strategies.
pub fn run_experiment(cohort: &LabeledCohort, cfg: &ExperimentConfig) -> Result<EvaluationReport> {
    Ok(run_experiment_detailed(cohort, cfg, None)?.report)
}

pub fn run_experiment_detailed(
    cohort: &LabeledCohort,
    cfg: &ExperimentConfig,
    observer: Option<Observer<'_>>,
) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    if !cohort.has_both_classes() {
        return Err(Error::SingleClassCohort);
    }
    let notify = |event: FitEvent| {
        if let Some(o) = observer {
            o(&event);
        }
    };

    let resample_dataset =
        cfg.sampler.mode == SamplerMode::Dataset && cfg.sampler.method != SamplingMethod::None;
    let retained = if resample_dataset {
        notify(FitEvent {
            stage: FitStage::Sampler,
            repetition: None,
            fold: None,
            subjects: (0..cohort.len()).collect(),
        });
        sample_indices(cohort, &cfg.sampler)?
    } else {
        (0..cohort.len()).collect()
    };
    let working = cohort.subset(&retained);
    let labels = working.label_bits();
    let splits = repeated_stratified_kfold(&labels, cfg.folds, cfg.repetitions, cfg.seed)?;

    // per-fold events carry working-cohort indices; report input-cohort ones
    let notify_fold = |mut event: FitEvent| {
        for i in &mut event.subjects {
            *i = retained[*i];
        }
        notify(event);
    };
    let mut folds: Vec<FoldOutcome> = splits
        .par_iter()
        .map(|split| run_fold(&working, &labels, split, cfg, &notify_fold))
        .collect::<Result<_>>()?;
    for f in &mut folds {
        for i in f.train.iter_mut().chain(f.test.iter_mut()) {
            *i = retained[*i];
        }
    }

    let mut strategies = BTreeMap::new();
    for strategy in Strategy::ALL {
        let mut per_metric = BTreeMap::new();
        for metric in Metric::ALL {
            let values = if metric == Metric::Auc && cfg.auc_mode == AucMode::Pooled {
                pooled_auc(&folds, strategy, cfg.repetitions)?
            } else {
                folds
                    .iter()
                    .map(|f| f.metrics[&strategy].get(metric))
                    .collect()
            };
            per_metric.insert(metric, MetricSummary::from_values(values)?);
        }
        strategies.insert(strategy, per_metric);
    }

    let mut pairwise_tests = Vec::new();
    for metric in Metric::ALL {
        for (ia, &a) in Strategy::ALL.iter().enumerate() {
            for &b in &Strategy::ALL[ia + 1..] {
                let r = mann_whitney_u(
                    &strategies[&a][&metric].values,
                    &strategies[&b][&metric].values,
                    MannWhitneyMethod::Auto,
                )?;
                pairwise_tests.push(PairwiseTest {
                    metric,
                    a,
                    b,
                    u: r.u,
                    p: r.p,
                    method: r.method,
                });
            }
        }
    }

    let report = EvaluationReport {
        config: ReportConfig {
            experiment: *cfg,
            seed_derivation: "splitmix64".into(),
            sampling_feature_space: SAMPLING_FEATURE_SPACE.into(),
            significance_unit: match cfg.auc_mode {
                AucMode::PerFold => "fold".into(),
                AucMode::Pooled => "fold (auc: repetition)".into(),
            },
            n_subjects: cohort.len(),
            n_hc: cohort.count(Diagnosis::Hc),
            n_mci: cohort.count(Diagnosis::Mci),
            n_hc_evaluated: working.count(Diagnosis::Hc),
            n_mci_evaluated: working.count(Diagnosis::Mci),
            disconnected_policy: None,
        },
        strategies,
        pairwise_tests,
    };
    Ok(ExperimentOutcome { report, folds })
}

fn pooled_auc(folds: &[FoldOutcome], strategy: Strategy, repetitions: usize) -> Result<Vec<f64>> {
    (0..repetitions)
        .map(|r| {
            let mut labels = Vec::new();
            let mut scores = Vec::new();
            for f in folds.iter().filter(|f| f.repetition == r) {
                labels.extend_from_slice(&f.test_labels);
                scores.extend_from_slice(&f.scores[&strategy]);
            }
            auc(&labels, &scores)
        })
        .collect()
}

fn run_fold(
    working: &LabeledCohort,
    labels: &[u8],
    split: &FoldAssignment,
    cfg: &ExperimentConfig,
    notify: &(dyn Fn(FitEvent) + Sync),
) -> Result<FoldOutcome> {
    let fold_seed = derive_seed(
        derive_seed(cfg.seed, split.repetition as u64),
        split.fold as u64,
    );
    let mut train_idx = split.train.clone();
    if cfg.sampler.mode == SamplerMode::Fold && cfg.sampler.method != SamplingMethod::None {
        notify(FitEvent {
            stage: FitStage::Sampler,
            repetition: Some(split.repetition),
            fold: Some(split.fold),
            subjects: train_idx.clone(),
        });
        let sampler = SamplerConfig {
            seed: derive_seed(fold_seed, 1),
            ..cfg.sampler
        };
        let keep = sample_indices(&working.subset(&train_idx), &sampler)?;
        train_idx = keep.into_iter().map(|k| train_idx[k]).collect();
    }
    notify(FitEvent {
        stage: FitStage::Normalizer,
        repetition: Some(split.repetition),
        fold: Some(split.fold),
        subjects: train_idx.clone(),
    });

    let train = working.subset(&train_idx);
    let test = working.subset(&split.test);
    let train_cfg = cfg.train.with_seed(derive_seed(fold_seed, 0));
    let ensemble = train_ensemble(&train, &train_cfg)?;
    let fusion = train_classifier(train.fused().view(), &train.label_bits(), &train_cfg)?;

    let (members, ensemble_scores) = ensemble.predict_cohort(&test)?;
    let fusion_scores = fusion.predict_proba_batch(test.fused().view())?;
    let [w, s, c] = members;
    let scores: BTreeMap<Strategy, Vec<f64>> = [
        (Strategy::Weights, w),
        (Strategy::ShortestPath, s),
        (Strategy::Communicability, c),
        (Strategy::Fusion, fusion_scores),
        (Strategy::Ensemble, ensemble_scores),
    ]
    .into_iter()
    .collect();

    let test_labels: Vec<u8> = split.test.iter().map(|&i| labels[i]).collect();
    let mut metrics = BTreeMap::new();
    for (&strategy, s) in &scores {
        let predicted: Vec<u8> = s
            .iter()
            .map(|&p| predict_label(p, cfg.threshold).as_u8())
            .collect();
        metrics.insert(strategy, compute_fold_metrics(&test_labels, &predicted, s)?);
    }
    Ok(FoldOutcome {
        repetition: split.repetition,
        fold: split.fold,
        train: train_idx,
        test: split.test.clone(),
        test_labels,
        scores,
        metrics,
    })
}
