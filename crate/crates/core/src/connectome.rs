//! Connectivity-matrix validation and the three network measures used as
//! classifier inputs: raw edge weights, weighted shortest-path lengths and
//! strength-normalized communicability.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used by [`validate_matrix`] when callers have no better value.
pub const DEFAULT_SYMMETRY_TOLERANCE: f64 = 1e-9;

/// Network measure a feature vector was derived from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    Weights,
    ShortestPath,
    Communicability,
    Fused,
}

impl Measure {
    /// The three single measures, in fusion order.
    pub const SINGLE: [Measure; 3] = [
        Measure::Weights,
        Measure::ShortestPath,
        Measure::Communicability,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Measure::Weights => "weights",
            Measure::ShortestPath => "shortest_path",
            Measure::Communicability => "communicability",
            Measure::Fused => "fused",
        }
    }

    /// Position among [`Measure::SINGLE`]; `None` for the fused tag.
    pub fn index(self) -> Option<usize> {
        match self {
            Measure::Weights => Some(0),
            Measure::ShortestPath => Some(1),
            Measure::Communicability => Some(2),
            Measure::Fused => None,
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A validated connectome: symmetric, finite, nonnegative, zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivityMatrix {
    subject_id: String,
    weights: Array2<f64>,
}

impl ConnectivityMatrix {
    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    pub fn n_nodes(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> ArrayView2<'_, f64> {
        self.weights.view()
    }

    pub fn with_subject_id(mut self, subject_id: impl Into<String>) -> Self {
        self.subject_id = subject_id.into();
        self
    }
}

/// Checks the connectome contract and returns the symmetrized matrix
/// `(raw + rawᵀ) / 2` with its diagonal cleared.
///
/// Asymmetry is measured relative to the largest absolute entry, so
/// `symmetry_tolerance` is scale free.
pub fn validate_matrix(
    raw: ArrayView2<'_, f64>,
    symmetry_tolerance: f64,
) -> Result<ConnectivityMatrix> {
    let (rows, cols) = raw.dim();
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    for ((row, col), &v) in raw.indexed_iter() {
        if !v.is_finite() {
            return Err(Error::NonFiniteEntry { row, col });
        }
    }
    for ((row, col), &v) in raw.indexed_iter() {
        if v < 0.0 {
            return Err(Error::NegativeWeight { row, col, value: v });
        }
    }
    let scale = raw.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let allowed = symmetry_tolerance * scale;
    let mut worst = (0, 0, 0.0_f64);
    for i in 0..rows {
        for j in (i + 1)..rows {
            let diff = (raw[[i, j]] - raw[[j, i]]).abs();
            if diff > worst.2 {
                worst = (i, j, diff);
            }
        }
    }
    if worst.2 > allowed {
        return Err(Error::AsymmetryExceedsTolerance {
            row: worst.0,
            col: worst.1,
            max_diff: worst.2,
            allowed,
        });
    }
    let mut weights = Array2::zeros((rows, rows));
    for i in 0..rows {
        for j in (i + 1)..rows {
            let w = 0.5 * (raw[[i, j]] + raw[[j, i]]);
            weights[[i, j]] = w;
            weights[[j, i]] = w;
        }
    }
    Ok(ConnectivityMatrix {
        subject_id: String::new(),
        weights,
    })
}

/// Diagonal of the strength matrix: per-node sum of incident weights.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeStrengths(pub Array1<f64>);

impl NodeStrengths {
    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice().expect("contiguous")
    }
}

pub fn node_strengths(m: &ConnectivityMatrix) -> NodeStrengths {
    NodeStrengths(m.weights.rows().into_iter().map(|row| row.sum()).collect())
}

/// Flattened upper triangle (diagonal excluded) of one measure.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub measure: Measure,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(measure: Measure, values: Vec<f64>) -> Self {
        Self { measure, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Number of strictly-upper-triangular entries of an `n x n` matrix.
pub fn upper_triangle_len(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Inverse of [`upper_triangle_len`]; `None` when `len` is not triangular.
pub fn nodes_for_upper_triangle_len(len: usize) -> Option<usize> {
    let n = ((1.0 + (1.0 + 8.0 * len as f64).sqrt()) / 2.0).round() as usize;
    (upper_triangle_len(n) == len).then_some(n)
}

/// Row-major upper triangle without the diagonal:
/// `[m01, m02, .., m0(n-1), m12, .., m(n-2)(n-1)]`.
pub fn flatten_upper_triangle(m: ArrayView2<'_, f64>, measure: Measure) -> FeatureVector {
    let n = m.nrows();
    let mut values = Vec::with_capacity(upper_triangle_len(n));
    for i in 0..n {
        for j in (i + 1)..n {
            values.push(m[[i, j]]);
        }
    }
    FeatureVector { measure, values }
}

/// Rebuilds the symmetric matrix with the given diagonal value.
pub fn unflatten_upper_triangle(values: &[f64], n: usize, diagonal: f64) -> Result<Array2<f64>> {
    let expected = upper_triangle_len(n);
    if values.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            actual: values.len(),
        });
    }
    let mut m = Array2::from_elem((n, n), diagonal);
    let mut it = values.iter();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = *it.next().expect("length checked");
            m[[i, j]] = v;
            m[[j, i]] = v;
        }
    }
    Ok(m)
}

/// What to report for node pairs with no connecting path.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "policy", content = "value", rename_all = "snake_case")]
pub enum DisconnectedPolicy {
    /// Largest finite shortest-path length of the same subject.
    #[default]
    MaxFinite,
    FixedConstant(f64),
    Error,
}

impl FromStr for DisconnectedPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "max_finite" => Ok(DisconnectedPolicy::MaxFinite),
            "error" => Ok(DisconnectedPolicy::Error),
            _ => match s.strip_prefix("constant:") {
                Some(v) => v
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .map(DisconnectedPolicy::FixedConstant)
                    .ok_or_else(|| format!("invalid constant in {s:?}")),
                None => Err(format!(
                    "unknown disconnected policy {s:?} (expected max_finite, constant:<v> or error)"
                )),
            },
        }
    }
}

impl fmt::Display for DisconnectedPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DisconnectedPolicy::MaxFinite => f.write_str("max_finite"),
            DisconnectedPolicy::FixedConstant(v) => write!(f, "constant:{v}"),
            DisconnectedPolicy::Error => f.write_str("error"),
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
struct HeapEntry {
    dist: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// All-pairs shortest-path lengths with edge length `1 / w` for `w > 0`.
/// Unreachable pairs are `f64::INFINITY`; the diagonal is zero.
pub fn shortest_path_matrix(m: &ConnectivityMatrix) -> Array2<f64> {
    let n = m.n_nodes();
    let w = &m.weights;
    let neighbors: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i && w[[i, j]] > 0.0)
                .map(|j| (j, 1.0 / w[[i, j]]))
                .collect()
        })
        .collect();

    let mut dist = Array2::from_elem((n, n), f64::INFINITY);
    let mut heap = BinaryHeap::new();
    for source in 0..n {
        let mut row = dist.row_mut(source);
        row[source] = 0.0;
        heap.push(HeapEntry {
            dist: 0.0,
            node: source,
        });
        while let Some(HeapEntry { dist: d, node: u }) = heap.pop() {
            if d > row[u] {
                continue;
            }
            for &(v, len) in &neighbors[u] {
                let candidate = d + len;
                if candidate < row[v] {
                    row[v] = candidate;
                    heap.push(HeapEntry {
                        dist: candidate,
                        node: v,
                    });
                }
            }
        }
    }
    // Dijkstra from each end can differ in the last bit; keep the matrix exactly symmetric.
    for i in 0..n {
        for j in (i + 1)..n {
            let d = dist[[i, j]].min(dist[[j, i]]);
            dist[[i, j]] = d;
            dist[[j, i]] = d;
        }
    }
    dist
}

/// Shortest-path feature vector with unreachable pairs mapped by `policy`.
pub fn shortest_path_lengths(
    m: &ConnectivityMatrix,
    policy: DisconnectedPolicy,
) -> Result<FeatureVector> {
    let dist = shortest_path_matrix(m);
    let mut fv = flatten_upper_triangle(dist.view(), Measure::ShortestPath);
    if fv.values.iter().all(|v| v.is_finite()) {
        return Ok(fv);
    }
    let fill = match policy {
        DisconnectedPolicy::MaxFinite => fv
            .values
            .iter()
            .copied()
            .filter(|v| v.is_finite())
            .reduce(f64::max)
            .ok_or(Error::AllPairsDisconnected)?,
        DisconnectedPolicy::FixedConstant(c) => c,
        DisconnectedPolicy::Error => {
            let n = m.n_nodes();
            let (i, j) = (0..n)
                .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
                .find(|&(i, j)| !dist[[i, j]].is_finite())
                .expect("an infinite entry exists");
            return Err(Error::DisconnectedPair(i, j));
        }
    };
    for v in fv.values.iter_mut().filter(|v| !v.is_finite()) {
        *v = fill;
    }
    Ok(fv)
}

const EIGEN_EPS: f64 = f64::EPSILON;
const EIGEN_MAX_ITER: usize = 10_000;

/// `exp(a)` for a symmetric matrix via `Q exp(Λ) Qᵀ`. The result is
/// symmetrized so that it is exactly symmetric.
pub fn matrix_exponential_symmetric(a: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let (rows, cols) = a.dim();
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigendecompositionFailure);
    }
    let n = rows;
    let dm = DMatrix::from_fn(n, n, |i, j| a[[i, j]]);
    let eig = SymmetricEigen::try_new(dm, EIGEN_EPS, EIGEN_MAX_ITER)
        .ok_or(Error::EigendecompositionFailure)?;
    let q = &eig.eigenvectors;
    let exp_l: Vec<f64> = eig.eigenvalues.iter().map(|l| l.exp()).collect();
    if exp_l.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigendecompositionFailure);
    }
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let mut acc = 0.0;
            for (k, el) in exp_l.iter().enumerate() {
                acc += q[(i, k)] * el * q[(j, k)];
            }
            out[[i, j]] = acc;
            out[[j, i]] = acc;
        }
    }
    Ok(out)
}

/// Strength-normalized adjacency `D^{-1/2} W D^{-1/2}`; isolated nodes get
/// zero rows and columns.
pub fn normalized_adjacency(m: &ConnectivityMatrix) -> Array2<f64> {
    let inv_sqrt: Vec<f64> = node_strengths(m)
        .0
        .iter()
        .map(|&s| if s > 0.0 { 1.0 / s.sqrt() } else { 0.0 })
        .collect();
    let n = m.n_nodes();
    Array2::from_shape_fn((n, n), |(i, j)| {
        inv_sqrt[i] * m.weights[[i, j]] * inv_sqrt[j]
    })
}

/// Connected components (edges are `w > 0`), each sorted ascending.
fn components(m: &ConnectivityMatrix) -> Vec<Vec<usize>> {
    let n = m.n_nodes();
    let mut label = vec![usize::MAX; n];
    let mut out = Vec::new();
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut members = vec![start];
        label[start] = id;
        let mut cursor = 0;
        while cursor < members.len() {
            let u = members[cursor];
            cursor += 1;
            for v in 0..n {
                if label[v] == usize::MAX && m.weights[[u, v]] > 0.0 {
                    label[v] = id;
                    members.push(v);
                }
            }
        }
        members.sort_unstable();
        out.push(members);
    }
    out
}

/// Full communicability matrix `exp(D^{-1/2} W D^{-1/2})`.
///
/// Exponentiated per connected component: entries between components are
/// exactly zero and isolated nodes get a unit diagonal.
pub fn communicability_matrix(m: &ConnectivityMatrix) -> Result<Array2<f64>> {
    let n = m.n_nodes();
    let a = normalized_adjacency(m);
    let mut out = Array2::zeros((n, n));
    for comp in components(m) {
        if comp.len() == 1 {
            out[[comp[0], comp[0]]] = 1.0;
            continue;
        }
        let block = Array2::from_shape_fn((comp.len(), comp.len()), |(i, j)| a[[comp[i], comp[j]]]);
        let e = matrix_exponential_symmetric(block.view())?;
        for (bi, &i) in comp.iter().enumerate() {
            for (bj, &j) in comp.iter().enumerate() {
                // exp of a nonnegative matrix is nonnegative; clear rounding residue
                out[[i, j]] = e[[bi, bj]].max(0.0);
            }
        }
    }
    Ok(out)
}

pub fn communicability(m: &ConnectivityMatrix) -> Result<FeatureVector> {
    let c = communicability_matrix(m)?;
    Ok(flatten_upper_triangle(c.view(), Measure::Communicability))
}

/// The three single-measure feature vectors of one subject, in fusion order.
pub fn extract_features(
    m: &ConnectivityMatrix,
    policy: DisconnectedPolicy,
) -> Result<[FeatureVector; 3]> {
    Ok([
        flatten_upper_triangle(m.weights(), Measure::Weights),
        shortest_path_lengths(m, policy)?,
        communicability(m)?,
    ])
}
