//! Repeated stratified cross-validation, fold metrics, significance tests
//! and report aggregation.

mod experiment;
mod folds;
mod metrics;
mod stats;

pub use experiment::{
    run_experiment, run_experiment_detailed, AucMode, EvaluationReport, ExperimentConfig,
    ExperimentOutcome, FitEvent, FitStage, FoldOutcome, MetricSummary, PairwiseTest, ReportConfig,
    Strategy,
};
pub use folds::{repeated_stratified_kfold, stratified_kfold, FoldAssignment};
pub use metrics::{auc, compute_fold_metrics, midranks, ConfusionMatrix, FoldMetrics, Metric};
pub use stats::{aggregate_metrics, mann_whitney_u, MannWhitney, MannWhitneyMethod, EXACT_LIMIT};
