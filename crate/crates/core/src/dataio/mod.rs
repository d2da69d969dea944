//! Reading and writing matrices, manifests, feature tables and reports, and
//! the synthetic cohort generator.

mod features;
mod manifest;
mod matrix;
mod report;
mod synthetic;

pub use features::{load_feature_store, write_feature_store, FEATURE_FILES};
pub use manifest::{
    load_cohort, load_cohort_with, read_manifest, write_manifest, LoadOptions, ManifestEntry,
};
pub use matrix::{format_f64, read_matrix_csv, write_matrix_csv};
pub use report::{export_report, read_report, report_to_string, write_fold_dump};
pub use synthetic::{
    generate_synthetic_cohort, generate_synthetic_subjects, materialize_synthetic,
    SyntheticCohortConfig, SyntheticSubject,
};
