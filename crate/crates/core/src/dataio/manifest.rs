use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::matrix::read_matrix_csv;
use crate::cohort::{Diagnosis, LabeledCohort};
use crate::connectome::{
    extract_features, validate_matrix, DisconnectedPolicy, DEFAULT_SYMMETRY_TOLERANCE,
};
use crate::error::{Error, Result};

/// One manifest row; `path` is already resolved against the manifest directory.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub subject_id: String,
    pub label: Diagnosis,
    pub path: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadOptions {
    pub disconnected: DisconnectedPolicy,
    pub symmetry_tolerance: f64,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            disconnected: DisconnectedPolicy::default(),
            symmetry_tolerance: DEFAULT_SYMMETRY_TOLERANCE,
        }
    }
}

/// Reads a `subject_id,label,path` CSV.
pub fn read_manifest(manifest: &Path) -> Result<Vec<ManifestEntry>> {
    let base = manifest.parent().unwrap_or(Path::new("."));
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(manifest)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(io) if io.kind() == std::io::ErrorKind::NotFound => {
                Error::FileNotFound {
                    path: manifest.to_path_buf(),
                    subject: "-".into(),
                }
            }
            _ => Error::Csv(e),
        })?;
    let headers = reader.headers()?.clone();
    let expected = ["subject_id", "label", "path"];
    if headers.len() != 3 || headers.iter().zip(expected).any(|(h, e)| h != e) {
        return Err(Error::Parse {
            path: manifest.to_path_buf(),
            line: 1,
            message: format!(
                "header must be subject_id,label,path, found {:?}",
                headers.iter().collect::<Vec<_>>()
            ),
        });
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::Parse {
                path: manifest.to_path_buf(),
                line,
                message: e.to_string(),
            }
        })?;
        let subject_id = record[0].to_string();
        if !seen.insert(subject_id.clone()) {
            return Err(Error::DuplicateSubjectId(subject_id));
        }
        let label: Diagnosis = record[1].parse()?;
        let path = base.join(&record[2]);
        out.push(ManifestEntry {
            subject_id,
            label,
            path,
        });
    }
    Ok(out)
}

/// Writes a manifest with paths relative to the manifest directory when possible.
pub fn write_manifest(manifest: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let base = manifest.parent().unwrap_or(Path::new("."));
    let mut w = csv::Writer::from_path(manifest)?;
    w.write_record(["subject_id", "label", "path"])?;
    for e in entries {
        let rel = e.path.strip_prefix(base).unwrap_or(&e.path);
        w.write_record([
            e.subject_id.as_str(),
            e.label.as_str(),
            &rel.to_string_lossy(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_cohort(manifest: &Path) -> Result<LabeledCohort> {
    load_cohort_with(manifest, &LoadOptions::default())
}

/// Parses, validates and featurizes every subject, in manifest order.
pub fn load_cohort_with(manifest: &Path, opts: &LoadOptions) -> Result<LabeledCohort> {
    let entries = read_manifest(manifest)?;
    if entries.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let subjects = entries
        .par_iter()
        .map(|e| {
            if !e.path.is_file() {
                return Err(Error::FileNotFound {
                    path: e.path.clone(),
                    subject: e.subject_id.clone(),
                });
            }
            let load = || -> Result<_> {
                let raw = read_matrix_csv(&e.path)?;
                let m = validate_matrix(raw.view(), opts.symmetry_tolerance)?
                    .with_subject_id(e.subject_id.as_str());
                extract_features(&m, opts.disconnected)
            };
            load().map_err(|err| err.for_subject(&e.subject_id))
        })
        .collect::<Result<Vec<_>>>()?;
    let n_nodes: Vec<usize> = subjects.iter().map(|s| s[0].len()).collect();
    if let Some((i, &len)) = n_nodes.iter().enumerate().find(|(_, &l)| l != n_nodes[0]) {
        return Err(Error::DimensionMismatch {
            expected: n_nodes[0],
            actual: len,
        }
        .for_subject(&entries[i].subject_id));
    }
    LabeledCohort::from_subjects(
        entries.iter().map(|e| e.subject_id.clone()).collect(),
        entries.iter().map(|e| e.label).collect(),
        &subjects,
    )
}
