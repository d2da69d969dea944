use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    // connectome
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("asymmetry {max_diff:e} exceeds tolerance {allowed:e} at ({row}, {col})")]
    AsymmetryExceedsTolerance {
        row: usize,
        col: usize,
        max_diff: f64,
        allowed: f64,
    },
    #[error("negative weight {value} at ({row}, {col})")]
    NegativeWeight { row: usize, col: usize, value: f64 },
    #[error("non-finite entry at ({row}, {col})")]
    NonFiniteEntry { row: usize, col: usize },
    #[error("no pair of nodes is connected; the maximum finite path length is undefined")]
    AllPairsDisconnected,
    #[error("nodes {0} and {1} are not connected")]
    DisconnectedPair(usize, usize),
    #[error("symmetric eigendecomposition did not converge")]
    EigendecompositionFailure,

    // neural network / optimizer
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("label {0} is not binary")]
    NonBinaryLabel(u8),
    #[error("training set contains a single class")]
    SingleClassTrainingSet,
    #[error("objective is not finite")]
    NonFiniteObjective,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    // ensemble / sampling
    #[error("missing measure: {0}")]
    MissingMeasure(&'static str),
    #[error("cohort contains a single class")]
    SingleClassCohort,
    #[error("class of size {class_size} is too small for {folds} folds")]
    InsufficientSamplesForFolds { class_size: usize, folds: usize },

    // evaluation
    #[error("class of size {class_size} is smaller than k = {k}")]
    ClassSmallerThanK { class_size: usize, k: usize },
    #[error("fold is empty")]
    EmptyFold,
    #[error("fold contains a single class")]
    SingleClassFold,
    #[error("sample is empty")]
    EmptySample,
    #[error("exact Mann-Whitney mode needs min(n, m) <= {limit}, got {min_size}")]
    ExactModeUnavailable { min_size: usize, limit: usize },

    // data io
    #[error("file not found: {path} (subject {subject})", path = .path.display())]
    FileNotFound { path: PathBuf, subject: String },
    #[error("{path}:{line}: {message}", path = .path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("subject {subject}: {source}")]
    Subject {
        subject: String,
        #[source]
        source: Box<Error>,
    },
    #[error("duplicate subject id {0}")]
    DuplicateSubjectId(String),
    #[error("unknown label {0:?} (expected HC or MCI)")]
    UnknownLabel(String),
    #[error("{} already exists (pass overwrite to replace it)", .0.display())]
    FileExists(PathBuf),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Failures that stem from numerically pathological inputs or optimizer breakdown.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::EigendecompositionFailure | Error::NonFiniteObjective => true,
            Error::Subject { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    pub(crate) fn for_subject(self, subject: &str) -> Error {
        Error::Subject {
            subject: subject.to_string(),
            source: Box::new(self),
        }
    }
}
