//! Python bindings. Matrices cross the boundary as lists of lists of floats.

use std::collections::BTreeMap;
use std::path::PathBuf;

use ndarray::Array2;
use pyo3::exceptions::{PyArithmeticError, PyFileExistsError, PyFileNotFoundError, PyIOError, PyValueError};
use pyo3::prelude::*;

use connectome_mci::connectome::{self, DisconnectedPolicy, Measure};
use connectome_mci::dataio::{self, LoadOptions, SyntheticCohortConfig};
use connectome_mci::ensemble::{self, EnsembleModel};
use connectome_mci::evaluation::{self, AucMode, EvaluationReport, ExperimentConfig, MannWhitneyMethod, Metric, Strategy};
use connectome_mci::neuralnet::{self, MlpModel, TrainConfig};
use connectome_mci::sampling::{self, SamplerConfig, SamplerMode, SamplingMethod};
use connectome_mci::{Error, LabeledCohort};

fn to_py(e: Error) -> PyErr {
    let msg = e.to_string();
    if e.is_numerical() {
        return PyArithmeticError::new_err(msg);
    }
    match e {
        Error::FileNotFound { .. } => PyFileNotFoundError::new_err(msg),
        Error::FileExists(_) => PyFileExistsError::new_err(msg),
        Error::Io(_) => PyIOError::new_err(msg),
        _ => PyValueError::new_err(msg),
    }
}

fn to_array(rows: Vec<Vec<f64>>) -> PyResult<Array2<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(PyValueError::new_err("rows have different lengths"));
    }
    Array2::from_shape_vec((nrows, ncols), rows.into_iter().flatten().collect())
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

fn to_rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn parse_policy(s: &str) -> PyResult<DisconnectedPolicy> {
    s.parse().map_err(PyValueError::new_err)
}

fn parse_measure(s: &str) -> PyResult<Measure> {
    match s {
        "weights" => Ok(Measure::Weights),
        "shortest_path" => Ok(Measure::ShortestPath),
        "communicability" => Ok(Measure::Communicability),
        "fused" => Ok(Measure::Fused),
        other => Err(PyValueError::new_err(format!("unknown measure {other:?}"))),
    }
}

fn train_config(alpha: f64, max_iter: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        l2_alpha: alpha,
        max_iterations: max_iter,
        seed,
        ..Default::default()
    }
}

fn validated(matrix: Vec<Vec<f64>>, tolerance: f64) -> PyResult<connectome::ConnectivityMatrix> {
    let raw = to_array(matrix)?;
    connectome::validate_matrix(raw.view(), tolerance).map_err(to_py)
}

/// Symmetrized, zero-diagonal copy of a valid connectivity matrix.
#[pyfunction]
#[pyo3(signature = (matrix, tolerance = connectome::DEFAULT_SYMMETRY_TOLERANCE))]
fn validate_matrix(matrix: Vec<Vec<f64>>, tolerance: f64) -> PyResult<Vec<Vec<f64>>> {
    Ok(to_rows(&validated(matrix, tolerance)?.weights().to_owned()))
}

#[pyfunction]
fn node_strengths(matrix: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    let m = validated(matrix, connectome::DEFAULT_SYMMETRY_TOLERANCE)?;
    Ok(connectome::node_strengths(&m).0.to_vec())
}

/// All-pairs shortest-path matrix (edge length 1/w); unreachable pairs are inf.
#[pyfunction]
fn shortest_path_matrix(matrix: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    let m = validated(matrix, connectome::DEFAULT_SYMMETRY_TOLERANCE)?;
    Ok(to_rows(&connectome::shortest_path_matrix(&m)))
}

#[pyfunction]
fn communicability_matrix(matrix: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    let m = validated(matrix, connectome::DEFAULT_SYMMETRY_TOLERANCE)?;
    Ok(to_rows(&connectome::communicability_matrix(&m).map_err(to_py)?))
}

/// `{"weights": [...], "shortest_path": [...], "communicability": [...]}`
#[pyfunction]
#[pyo3(signature = (matrix, disconnected = "max_finite"))]
fn extract_features(matrix: Vec<Vec<f64>>, disconnected: &str) -> PyResult<BTreeMap<String, Vec<f64>>> {
    let m = validated(matrix, connectome::DEFAULT_SYMMETRY_TOLERANCE)?;
    let features = connectome::extract_features(&m, parse_policy(disconnected)?).map_err(to_py)?;
    Ok(features.into_iter().map(|f| (f.measure.to_string(), f.values)).collect())
}

#[pyfunction]
fn auc(labels: Vec<u8>, scores: Vec<f64>) -> PyResult<f64> {
    evaluation::auc(&labels, &scores).map_err(to_py)
}

/// Returns `(u, p)`; `method` is "auto", "exact" or "normal".
#[pyfunction]
#[pyo3(signature = (a, b, method = "auto"))]
fn mann_whitney_u(a: Vec<f64>, b: Vec<f64>, method: &str) -> PyResult<(f64, f64)> {
    let method: MannWhitneyMethod = method.parse().map_err(to_py)?;
    let r = evaluation::mann_whitney_u(&a, &b, method).map_err(to_py)?;
    Ok((r.u, r.p))
}

/// Returns `(mean, standard_error)`.
#[pyfunction]
fn aggregate_metrics(values: Vec<f64>) -> PyResult<(f64, f64)> {
    evaluation::aggregate_metrics(&values).map_err(to_py)
}

/// List of `(train_indices, test_indices)`.
#[pyfunction]
fn stratified_kfold(labels: Vec<u8>, k: usize, seed: u64) -> PyResult<Vec<(Vec<usize>, Vec<usize>)>> {
    Ok(evaluation::stratified_kfold(&labels, k, seed)
        .map_err(to_py)?
        .into_iter()
        .map(|f| (f.train, f.test))
        .collect())
}

#[pyclass(name = "Cohort", module = "pyconnectome_mci")]
struct PyCohort(LabeledCohort);

#[pymethods]
impl PyCohort {
    /// `features` holds the weights, shortest-path and communicability matrices.
    #[new]
    fn new(subject_ids: Vec<String>, labels: Vec<String>, features: [Vec<Vec<f64>>; 3]) -> PyResult<Self> {
        let labels = labels.iter().map(|l| l.parse()).collect::<Result<Vec<_>, _>>().map_err(to_py)?;
        let [w, s, c] = features;
        let cohort = LabeledCohort::new(subject_ids, labels, [to_array(w)?, to_array(s)?, to_array(c)?]).map_err(to_py)?;
        Ok(Self(cohort))
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    #[getter]
    fn subject_ids(&self) -> Vec<String> {
        self.0.subject_ids().to_vec()
    }

    /// "HC" or "MCI" per subject.
    #[getter]
    fn labels(&self) -> Vec<String> {
        self.0.labels().iter().map(|l| l.to_string()).collect()
    }

    fn features(&self, measure: &str) -> PyResult<Vec<Vec<f64>>> {
        Ok(to_rows(&self.0.features(parse_measure(measure)?)))
    }

    fn subset(&self, indices: Vec<usize>) -> PyResult<Self> {
        if indices.iter().any(|&i| i >= self.0.len()) {
            return Err(PyValueError::new_err("index out of range"));
        }
        Ok(Self(self.0.subset(&indices)))
    }

    /// Under-sampled copy; `method` is "none", "random", "nearmiss3" or "iht".
    #[pyo3(signature = (method, seed = 0, k_neighbors = 3))]
    fn undersample(&self, py: Python<'_>, method: &str, seed: u64, k_neighbors: usize) -> PyResult<Self> {
        let cfg = SamplerConfig {
            method: method.parse::<SamplingMethod>().map_err(to_py)?,
            k_neighbors,
            seed,
            ..Default::default()
        };
        let cohort = &self.0;
        py.detach(|| sampling::apply_sampler(cohort, &cfg)).map(Self).map_err(to_py)
    }

    fn write_features(&self, directory: PathBuf) -> PyResult<()> {
        dataio::write_feature_store(&directory, &self.0).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "Cohort(n={}, hc={}, mci={})",
            self.0.len(),
            self.0.count(connectome_mci::Diagnosis::Hc),
            self.0.count(connectome_mci::Diagnosis::Mci)
        )
    }
}

#[pyfunction]
#[pyo3(signature = (manifest, disconnected = "max_finite"))]
fn load_cohort(py: Python<'_>, manifest: PathBuf, disconnected: &str) -> PyResult<PyCohort> {
    let opts = LoadOptions {
        disconnected: parse_policy(disconnected)?,
        ..Default::default()
    };
    py.detach(|| dataio::load_cohort_with(&manifest, &opts)).map(PyCohort).map_err(to_py)
}

#[pyfunction]
fn load_features(directory: PathBuf) -> PyResult<PyCohort> {
    dataio::load_feature_store(&directory).map(PyCohort).map_err(to_py)
}

/// Synthetic cohort with features extracted in memory. If `directory` is
/// given, matrices and a manifest are written there as well.
#[pyfunction]
#[pyo3(signature = (n_nodes = 120, n_hc = 49, n_mci = 108, effect_size = 0.3, affected_edge_fraction = 0.1,
                    noise_scale = 0.3, density = 0.3, seed = 0, directory = None))]
#[allow(clippy::too_many_arguments)]
fn synthetic_cohort(
    py: Python<'_>,
    n_nodes: usize,
    n_hc: usize,
    n_mci: usize,
    effect_size: f64,
    affected_edge_fraction: f64,
    noise_scale: f64,
    density: f64,
    seed: u64,
    directory: Option<PathBuf>,
) -> PyResult<PyCohort> {
    let cfg = SyntheticCohortConfig {
        n_nodes,
        n_hc,
        n_mci,
        effect_size,
        affected_edge_fraction,
        noise_scale,
        density,
        seed,
    };
    py.detach(|| {
        if let Some(dir) = &directory {
            let subjects = dataio::generate_synthetic_subjects(&cfg)?;
            dataio::materialize_synthetic(&subjects, dir)?;
        }
        dataio::generate_synthetic_cohort(&cfg, DisconnectedPolicy::default())
    })
    .map(PyCohort)
    .map_err(to_py)
}

#[pyclass(name = "MlpModel", module = "pyconnectome_mci")]
struct PyMlpModel(MlpModel);

#[pymethods]
impl PyMlpModel {
    fn predict_proba(&self, x: Vec<f64>) -> PyResult<f64> {
        self.0.predict_proba(&x).map_err(to_py)
    }

    fn predict_proba_batch(&self, xs: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        self.0.predict_proba_batch(to_array(xs)?.view()).map_err(to_py)
    }

    #[getter]
    fn input_dim(&self) -> usize {
        self.0.input_dim()
    }

    #[getter]
    fn final_loss(&self) -> f64 {
        self.0.summary.final_loss
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.0.summary.iterations
    }
}

#[pyfunction]
#[pyo3(signature = (xs, ys, alpha = 1e-4, max_iter = 200, seed = 0))]
fn train_classifier(py: Python<'_>, xs: Vec<Vec<f64>>, ys: Vec<u8>, alpha: f64, max_iter: usize, seed: u64) -> PyResult<PyMlpModel> {
    let xs = to_array(xs)?;
    let cfg = train_config(alpha, max_iter, seed);
    py.detach(|| neuralnet::train_classifier(xs.view(), &ys, &cfg))
        .map(PyMlpModel)
        .map_err(to_py)
}

#[pyclass(name = "EnsembleModel", module = "pyconnectome_mci")]
struct PyEnsemble(EnsembleModel);

#[pymethods]
impl PyEnsemble {
    /// Soft-vote MCI probability for every subject of `cohort`.
    fn predict_proba(&self, cohort: &PyCohort) -> PyResult<Vec<f64>> {
        Ok(self.0.predict_cohort(&cohort.0).map_err(to_py)?.1)
    }

    /// Per-member probabilities, keyed by measure.
    fn member_proba(&self, cohort: &PyCohort) -> PyResult<BTreeMap<String, Vec<f64>>> {
        let (members, _) = self.0.predict_cohort(&cohort.0).map_err(to_py)?;
        Ok(Measure::SINGLE.iter().zip(members).map(|(m, p)| (m.to_string(), p)).collect())
    }

    /// "HC" or "MCI" per subject.
    #[pyo3(signature = (cohort, threshold = ensemble::DEFAULT_THRESHOLD))]
    fn predict(&self, cohort: &PyCohort, threshold: f64) -> PyResult<Vec<String>> {
        Ok(self
            .predict_proba(cohort)?
            .into_iter()
            .map(|p| ensemble::predict_label(p, threshold).to_string())
            .collect())
    }
}

#[pyfunction]
#[pyo3(signature = (cohort, alpha = 1e-4, max_iter = 200, seed = 0))]
fn train_ensemble(py: Python<'_>, cohort: &PyCohort, alpha: f64, max_iter: usize, seed: u64) -> PyResult<PyEnsemble> {
    let cfg = train_config(alpha, max_iter, seed);
    let cohort = &cohort.0;
    py.detach(|| ensemble::train_ensemble(cohort, &cfg)).map(PyEnsemble).map_err(to_py)
}

#[pyclass(name = "Report", module = "pyconnectome_mci")]
struct PyReport(EvaluationReport);

#[pymethods]
impl PyReport {
    /// `(mean, se)` of one metric of one strategy.
    fn summary(&self, strategy: &str, metric: &str) -> PyResult<(f64, f64)> {
        let s: Strategy = strategy.parse().map_err(to_py)?;
        let m: Metric = metric.parse().map_err(to_py)?;
        let summary = self.0.summary(s, m).ok_or_else(|| PyValueError::new_err("missing entry"))?;
        Ok((summary.mean, summary.se))
    }

    fn values(&self, strategy: &str, metric: &str) -> PyResult<Vec<f64>> {
        let s: Strategy = strategy.parse().map_err(to_py)?;
        let m: Metric = metric.parse().map_err(to_py)?;
        Ok(self.0.summary(s, m).map(|x| x.values.clone()).unwrap_or_default())
    }

    fn to_json(&self) -> PyResult<String> {
        dataio::report_to_string(&self.0).map_err(to_py)
    }

    #[pyo3(signature = (path, overwrite = false))]
    fn export(&self, path: PathBuf, overwrite: bool) -> PyResult<()> {
        dataio::export_report(&self.0, &path, overwrite).map_err(to_py)
    }
}

#[pyfunction]
fn read_report(path: PathBuf) -> PyResult<PyReport> {
    dataio::read_report(&path).map(PyReport).map_err(to_py)
}

/// Repeated stratified cross-validation of all five strategies.
#[pyfunction]
#[pyo3(signature = (cohort, sampler = "none", sampler_mode = "dataset", folds = 10, repeats = 10, seed = 0,
                    alpha = 1e-4, max_iter = 200, threshold = 0.5, pooled_auc = false))]
#[allow(clippy::too_many_arguments)]
fn run_experiment(
    py: Python<'_>,
    cohort: &PyCohort,
    sampler: &str,
    sampler_mode: &str,
    folds: usize,
    repeats: usize,
    seed: u64,
    alpha: f64,
    max_iter: usize,
    threshold: f64,
    pooled_auc: bool,
) -> PyResult<PyReport> {
    let train = train_config(alpha, max_iter, seed);
    let cfg = ExperimentConfig {
        sampler: SamplerConfig {
            method: sampler.parse::<SamplingMethod>().map_err(to_py)?,
            mode: sampler_mode.parse::<SamplerMode>().map_err(to_py)?,
            seed,
            iht_train_config: train,
            ..Default::default()
        },
        train,
        folds,
        repetitions: repeats,
        seed,
        threshold,
        auc_mode: if pooled_auc { AucMode::Pooled } else { AucMode::PerFold },
    };
    let cohort = &cohort.0;
    py.detach(|| evaluation::run_experiment(cohort, &cfg)).map(PyReport).map_err(to_py)
}

#[pymodule]
fn pyconnectome_mci(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCohort>()?;
    m.add_class::<PyMlpModel>()?;
    m.add_class::<PyEnsemble>()?;
    m.add_class::<PyReport>()?;
    m.add_function(wrap_pyfunction!(validate_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(node_strengths, m)?)?;
    m.add_function(wrap_pyfunction!(shortest_path_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(communicability_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(extract_features, m)?)?;
    m.add_function(wrap_pyfunction!(auc, m)?)?;
    m.add_function(wrap_pyfunction!(mann_whitney_u, m)?)?;
    m.add_function(wrap_pyfunction!(aggregate_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(stratified_kfold, m)?)?;
    m.add_function(wrap_pyfunction!(load_cohort, m)?)?;
    m.add_function(wrap_pyfunction!(load_features, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic_cohort, m)?)?;
    m.add_function(wrap_pyfunction!(train_classifier, m)?)?;
    m.add_function(wrap_pyfunction!(train_ensemble, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(read_report, m)?)?;
    Ok(())
}
