//! Binary MLP classifier (two ReLU hidden layers, sigmoid output) trained
//! with L-BFGS on a penalized cross-entropy objective.

mod gram;
pub mod lbfgs;
pub mod mlp;
pub mod model;
pub mod normalizer;
pub mod params;

pub use lbfgs::{
    lbfgs_minimize, lbfgs_minimize_in, IterationRecord, LbfgsConfig, LbfgsResult, LbfgsVector,
    Termination,
};
pub use mlp::{forward, forward_batch, gradient, loss, sigmoid};
pub use model::{train_classifier, MlpModel, TrainConfig, TrainingSummary};
pub use normalizer::{fit_normalizer, MinMaxNormalizer};
pub use params::{init_parameters, Layout, MlpParameters, HIDDEN_UNITS};
