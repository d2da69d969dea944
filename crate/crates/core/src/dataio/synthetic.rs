use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::manifest::{write_manifest, ManifestEntry};
use super::matrix::write_matrix_csv;
use crate::cohort::{Diagnosis, LabeledCohort};
use crate::connectome::{
    extract_features, validate_matrix, DisconnectedPolicy, DEFAULT_SYMMETRY_TOLERANCE,
};
use crate::error::{Error, Result};
use crate::seed::derive_seed;

/// Log-normal random connectomes with a group effect.
///
/// A shared support (each node pair present with probability `density`)
/// carries base weights `exp(N(0, 1))`. MCI subjects have the weights of a
/// fixed random fraction `affected_edge_fraction` of the support multiplied
/// by `1 - effect_size`. Every subject weight is further multiplied by
/// `exp(noise_scale * N(0, 1))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCohortConfig {
    pub n_nodes: usize,
    pub n_hc: usize,
    pub n_mci: usize,
    pub effect_size: f64,
    pub affected_edge_fraction: f64,
    pub noise_scale: f64,
    pub density: f64,
    pub seed: u64,
}

impl Default for SyntheticCohortConfig {
    fn default() -> Self {
        Self {
            n_nodes: 120,
            n_hc: 49,
            n_mci: 108,
            effect_size: 0.3,
            affected_edge_fraction: 0.1,
            noise_scale: 0.3,
            density: 0.3,
            seed: 0,
        }
    }
}

impl SyntheticCohortConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.n_nodes < 2 {
            return fail("n_nodes must be >= 2");
        }
        if self.n_hc == 0 || self.n_mci == 0 {
            return fail("both groups need at least one subject");
        }
        if !(0.0..1.0).contains(&self.effect_size) {
            return fail("effect_size must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.affected_edge_fraction) {
            return fail("affected_edge_fraction must lie in [0, 1]");
        }
        if !(self.noise_scale > 0.0 && self.noise_scale.is_finite()) {
            return fail("noise_scale must be positive");
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return fail("density must lie in (0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSubject {
    pub subject_id: String,
    pub label: Diagnosis,
    pub matrix: Array2<f64>,
}

struct Template {
    /// (i, j, base weight, affected)
    edges: Vec<(usize, usize, f64, bool)>,
}

fn template(cfg: &SyntheticCohortConfig) -> Template {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0));
    let base = LogNormal::new(0.0, 1.0).expect("valid parameters");
    let mut edges = Vec::new();
    for i in 0..cfg.n_nodes {
        for j in i + 1..cfg.n_nodes {
            if rng.random::<f64>() < cfg.density {
                let w = base.sample(&mut rng);
                let affected = rng.random::<f64>() < cfg.affected_edge_fraction;
                edges.push((i, j, w, affected));
            }
        }
    }
    Template { edges }
}

/// HC subjects first (`hc_000`, ...), then MCI subjects (`mci_000`, ...).
pub fn generate_synthetic_subjects(cfg: &SyntheticCohortConfig) -> Result<Vec<SyntheticSubject>> {
    cfg.validate()?;
    let t = template(cfg);
    let labels: Vec<(Diagnosis, usize)> = (0..cfg.n_hc)
        .map(|i| (Diagnosis::Hc, i))
        .chain((0..cfg.n_mci).map(|i| (Diagnosis::Mci, i)))
        .collect();
    Ok(labels
        .par_iter()
        .enumerate()
        .map(|(s, &(label, k))| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 1 + s as u64));
            let mut m = Array2::zeros((cfg.n_nodes, cfg.n_nodes));
            for &(i, j, w, affected) in &t.edges {
                let eps: f64 = rng.sample(StandardNormal);
                let mut v = w * (cfg.noise_scale * eps).exp();
                if affected && label == Diagnosis::Mci {
                    v *= 1.0 - cfg.effect_size;
                }
                m[[i, j]] = v;
                m[[j, i]] = v;
            }
            let prefix = match label {
                Diagnosis::Hc => "hc",
                Diagnosis::Mci => "mci",
            };
            SyntheticSubject {
                subject_id: format!("{prefix}_{k:03}"),
                label,
                matrix: m,
            }
        })
        .collect())
}

/// Generates the subjects and extracts their features in memory.
pub fn generate_synthetic_cohort(
    cfg: &SyntheticCohortConfig,
    policy: DisconnectedPolicy,
) -> Result<LabeledCohort> {
    let subjects = generate_synthetic_subjects(cfg)?;
    let features = subjects
        .par_iter()
        .map(|s| {
            let m = validate_matrix(s.matrix.view(), DEFAULT_SYMMETRY_TOLERANCE)?;
            extract_features(&m, policy).map_err(|e| e.for_subject(&s.subject_id))
        })
        .collect::<Result<Vec<_>>>()?;
    LabeledCohort::from_subjects(
        subjects.iter().map(|s| s.subject_id.clone()).collect(),
        subjects.iter().map(|s| s.label).collect(),
        &features,
    )
}

/// Writes `matrices/<subject>.csv` and `manifest.csv` under `dir`; returns
/// the manifest path.
pub fn materialize_synthetic(subjects: &[SyntheticSubject], dir: &Path) -> Result<PathBuf> {
    let matrices = dir.join("matrices");
    std::fs::create_dir_all(&matrices)?;
    let mut entries = Vec::with_capacity(subjects.len());
    for s in subjects {
        let path = matrices.join(format!("{}.csv", s.subject_id));
        write_matrix_csv(&path, s.matrix.view())?;
        entries.push(ManifestEntry {
            subject_id: s.subject_id.clone(),
            label: s.label,
            path,
        });
    }
    let manifest = dir.join("manifest.csv");
    write_manifest(&manifest, &entries)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SyntheticCohortConfig {
        SyntheticCohortConfig {
            n_nodes: 12,
            n_hc: 4,
            n_mci: 6,
            seed: 9,
            ..Default::default()
        }
    }

    #[test]
    fn counts_and_validity() {
        let subjects = generate_synthetic_subjects(&small()).unwrap();
        assert_eq!(
            subjects.iter().filter(|s| s.label == Diagnosis::Hc).count(),
            4
        );
        assert_eq!(
            subjects
                .iter()
                .filter(|s| s.label == Diagnosis::Mci)
                .count(),
            6
        );
        for s in &subjects {
            let m = &s.matrix;
            assert_eq!(m, &m.t().to_owned());
            assert!(m.iter().all(|&v| v >= 0.0 && v.is_finite()));
            assert!(m.diag().iter().all(|&v| v == 0.0));
            assert!(validate_matrix(m.view(), 0.0).is_ok());
        }
        assert_eq!(subjects, generate_synthetic_subjects(&small()).unwrap());
    }

    #[test]
    fn invalid_configs() {
        for cfg in [
            SyntheticCohortConfig {
                effect_size: 1.0,
                ..small()
            },
            SyntheticCohortConfig { n_hc: 0, ..small() },
            SyntheticCohortConfig {
                noise_scale: 0.0,
                ..small()
            },
            SyntheticCohortConfig {
                affected_edge_fraction: 1.5,
                ..small()
            },
        ] {
            assert!(matches!(
                generate_synthetic_subjects(&cfg),
                Err(Error::InvalidConfig(_))
            ));
        }
    }
}
