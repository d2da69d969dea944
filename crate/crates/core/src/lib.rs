//! Connectome-based classification of mild cognitive impairment: network
//! features, a small neural network trained with L-BFGS, a soft-voting
//! ensemble, under-sampling, and a cross-validation harness.

pub mod cli;
pub mod cohort;
pub mod connectome;
pub mod dataio;
pub mod ensemble;
pub mod error;
pub mod evaluation;
pub mod neuralnet;
pub mod sampling;
pub mod seed;

pub use cohort::{Diagnosis, LabeledCohort};
pub use error::{Error, Result};
