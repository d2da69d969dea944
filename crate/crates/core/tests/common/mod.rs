//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use connectome_mci::cohort::{Diagnosis, LabeledCohort};
use connectome_mci::connectome::DisconnectedPolicy;
use connectome_mci::neuralnet::Layout;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random symmetric nonnegative zero-diagonal matrix; each pair is an edge
/// with probability `density`, weights from `weight`.
pub fn random_graph(
    r: &mut ChaCha8Rng,
    n: usize,
    density: f64,
    mut weight: impl FnMut(&mut ChaCha8Rng) -> f64,
) -> Array2<f64> {
    let mut w = Array2::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n {
            if r.random::<f64>() < density {
                let v = weight(r);
                w[[i, j]] = v;
                w[[j, i]] = v;
            }
        }
    }
    w
}

// ---------------------------------------------------------------- communicability

pub fn matmul(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let (n, k, m) = (a.nrows(), a.ncols(), b.ncols());
    let mut out = Array2::zeros((n, m));
    for i in 0..n {
        for j in 0..m {
            let mut s = 0.0;
            for t in 0..k {
                s += a[[i, t]] * b[[t, j]];
            }
            out[[i, j]] = s;
        }
    }
    out
}

/// `Σ_{k=0..terms} A^k / k!`
pub fn taylor_exp(a: &Array2<f64>, terms: usize) -> Array2<f64> {
    let n = a.nrows();
    let mut sum = Array2::<f64>::eye(n);
    let mut term = Array2::<f64>::eye(n);
    for k in 1..=terms {
        term = matmul(&term, a) / k as f64;
        sum += &term;
    }
    sum
}

/// `D^{-1/2} W D^{-1/2}` with zero rows for isolated nodes.
pub fn normalized_adjacency(w: &Array2<f64>) -> Array2<f64> {
    let n = w.nrows();
    let s: Vec<f64> = (0..n).map(|i| (0..n).map(|j| w[[i, j]]).sum()).collect();
    Array2::from_shape_fn((n, n), |(i, j)| {
        if s[i] == 0.0 || s[j] == 0.0 {
            0.0
        } else {
            w[[i, j]] / (s[i].sqrt() * s[j].sqrt())
        }
    })
}

// ---------------------------------------------------------------- shortest paths

/// All-pairs shortest paths with edge length `1 / w`; infinity when unreachable.
pub fn floyd_warshall(w: &Array2<f64>) -> Array2<f64> {
    let n = w.nrows();
    let mut d = Array2::from_shape_fn((n, n), |(i, j)| {
        if i == j {
            0.0
        } else if w[[i, j]] > 0.0 {
            1.0 / w[[i, j]]
        } else {
            f64::INFINITY
        }
    });
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[[i, k]] + d[[k, j]];
                if via < d[[i, j]] {
                    d[[i, j]] = via;
                }
            }
        }
    }
    d
}

/// Expected flattened shortest-path features, or `None` when the policy
/// must fail.
pub fn expected_shortest_paths(d: &Array2<f64>, policy: DisconnectedPolicy) -> Option<Vec<f64>> {
    let n = d.nrows();
    let mut upper = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            upper.push(d[[i, j]]);
        }
    }
    let max_finite = upper
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))));
    let any_inf = upper.iter().any(|v| v.is_infinite());
    if !any_inf {
        return Some(upper);
    }
    let fill = match policy {
        DisconnectedPolicy::MaxFinite => max_finite?,
        DisconnectedPolicy::FixedConstant(c) => c,
        DisconnectedPolicy::Error => return None,
    };
    Some(
        upper
            .into_iter()
            .map(|v| if v.is_finite() { v } else { fill })
            .collect(),
    )
}

// ---------------------------------------------------------------- neural network

/// Plain-loop re-implementation of the network on the flat parameter layout.
pub struct NaiveMlp<'a> {
    pub layout: Layout,
    pub theta: &'a [f64],
}

fn relu(v: f64) -> f64 {
    v.max(0.0)
}

impl NaiveMlp<'_> {
    fn at(&self, range: std::ops::Range<usize>, i: usize) -> f64 {
        self.theta[range.start + i]
    }

    /// First-layer pre-activations of one sample.
    pub fn z1(&self, x: &[f64]) -> Vec<f64> {
        let (d, h) = (self.layout.input_dim, self.layout.hidden);
        (0..h)
            .map(|j| {
                let mut s = self.at(self.layout.b1(), j);
                for (i, xi) in x.iter().enumerate().take(d) {
                    s += xi * self.theta[self.layout.w1().start + i * h + j];
                }
                s
            })
            .collect()
    }

    /// Output logit from first-layer pre-activations; also returns the
    /// activation pattern of both hidden layers.
    pub fn head(&self, z1: &[f64]) -> (f64, Vec<bool>) {
        let h = self.layout.hidden;
        let a1: Vec<f64> = z1.iter().map(|&v| relu(v)).collect();
        let mut pattern: Vec<bool> = z1.iter().map(|&v| v > 0.0).collect();
        let mut logit = self.theta[self.layout.b3()];
        for k in 0..h {
            let mut z2 = self.at(self.layout.b2(), k);
            for j in 0..h {
                z2 += a1[j] * self.theta[self.layout.w2().start + j * h + k];
            }
            pattern.push(z2 > 0.0);
            logit += relu(z2) * self.at(self.layout.w3(), k);
        }
        (logit, pattern)
    }

    pub fn penalty(&self) -> f64 {
        self.layout
            .weight_blocks()
            .into_iter()
            .flat_map(|r| self.theta[r].iter())
            .map(|w| w * w)
            .sum()
    }
}

pub fn sample_loss(logit: f64, y: u8) -> f64 {
    let p = (1.0 / (1.0 + (-logit).exp())).clamp(1e-12, 1.0 - 1e-12);
    if y == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Mean cross-entropy plus `alpha` times the squared weights.
pub fn naive_loss(layout: Layout, theta: &[f64], xs: &Array2<f64>, ys: &[u8], alpha: f64) -> f64 {
    let net = NaiveMlp { layout, theta };
    let mut ce = 0.0;
    for (row, &y) in xs.rows().into_iter().zip(ys) {
        let x = row.to_vec();
        ce += sample_loss(net.head(&net.z1(&x)).0, y);
    }
    ce / ys.len() as f64 + alpha * net.penalty()
}

/// Outcome of a central-difference check.
#[derive(Debug, Default)]
pub struct FdReport {
    pub checked: usize,
    /// Coordinates whose perturbation crosses a ReLU kink at every tried step.
    pub skipped_kinks: usize,
    /// Coordinates where both gradients sit below the floor.
    pub below_floor: usize,
    pub worst_relative: f64,
    pub worst_index: usize,
}

struct Cached {
    z1: Vec<f64>,
    a1: Vec<f64>,
    z2: Vec<f64>,
    logit: f64,
}

/// Central differences with step `h` for every coordinate, compared with
/// `grad` as `|g - fd| / max(|g|, |fd|, floor)`.
///
/// Each perturbation touches a single pre-activation, so the perturbed
/// logits are obtained by updating cached forward values (`O(H)` per sample
/// for first-layer coordinates, `O(1)` elsewhere). The cache itself comes
/// from [`NaiveMlp`]. Coordinates whose perturbation flips a ReLU are
/// retried with a 100x smaller step, up to twice.
#[allow(clippy::too_many_arguments)]
pub fn finite_difference_check(
    layout: Layout,
    theta: &[f64],
    xs: &Array2<f64>,
    ys: &[u8],
    alpha: f64,
    grad: &[f64],
    h: f64,
    floor: f64,
) -> FdReport {
    let n = ys.len();
    let (d, hid) = (layout.input_dim, layout.hidden);
    let net = NaiveMlp { layout, theta };
    let w2 = |j: usize, k: usize| theta[layout.w2().start + j * hid + k];
    let w3 = |k: usize| theta[layout.w3().start + k];
    let rows: Vec<Vec<f64>> = xs.rows().into_iter().map(|r| r.to_vec()).collect();
    let cache: Vec<Cached> = rows
        .iter()
        .map(|x| {
            let z1 = net.z1(x);
            let a1: Vec<f64> = z1.iter().map(|&v| relu(v)).collect();
            let z2: Vec<f64> = (0..hid)
                .map(|k| {
                    theta[layout.b2().start + k] + (0..hid).map(|j| a1[j] * w2(j, k)).sum::<f64>()
                })
                .collect();
            let logit = net.head(&z1).0;
            Cached { z1, a1, z2, logit }
        })
        .collect();

    // logit after shifting z1[j] by delta; None when an activation flips
    let shift_z1 = |c: &Cached, j: usize, delta: f64| -> Option<f64> {
        let z = c.z1[j] + delta;
        if (z > 0.0) != (c.z1[j] > 0.0) {
            return None;
        }
        let da = relu(z) - c.a1[j];
        let mut logit = theta[layout.b3()];
        for k in 0..hid {
            let z2 = c.z2[k] + da * w2(j, k);
            if (z2 > 0.0) != (c.z2[k] > 0.0) {
                return None;
            }
            logit += relu(z2) * w3(k);
        }
        Some(logit)
    };
    // logit after shifting z2[k] by delta
    let shift_z2 = |c: &Cached, k: usize, delta: f64| -> Option<f64> {
        let z = c.z2[k] + delta;
        if (z > 0.0) != (c.z2[k] > 0.0) {
            return None;
        }
        // recompute the full sum so the rounding matches a fresh evaluation
        let mut logit = theta[layout.b3()];
        for q in 0..hid {
            let zq = if q == k { z } else { c.z2[q] };
            logit += relu(zq) * w3(q);
        }
        Some(logit)
    };

    // returns the data term difference quotient, or None on a kink
    let quotient = |step: f64, perturbed: &dyn Fn(usize, f64) -> Option<f64>| -> Option<f64> {
        let mut diff = 0.0;
        for (s, &y) in ys.iter().enumerate() {
            let lp = perturbed(s, step)?;
            let lm = perturbed(s, -step)?;
            diff += sample_loss(lp, y) - sample_loss(lm, y);
        }
        Some(diff / n as f64 / (2.0 * step))
    };

    let is_weight = |k: usize| layout.weight_blocks().iter().any(|r| r.contains(&k));
    let (cache, rows) = (&cache, &rows);
    let mut report = FdReport::default();
    for k in 0..layout.len() {
        let perturbed: Box<dyn Fn(usize, f64) -> Option<f64>> = if layout.w1().contains(&k) {
            let off = k - layout.w1().start;
            let (i, j) = (off / hid, off % hid);
            debug_assert!(i < d);
            Box::new(move |s: usize, t: f64| shift_z1(&cache[s], j, t * rows[s][i]))
        } else if layout.b1().contains(&k) {
            let j = k - layout.b1().start;
            Box::new(move |s: usize, t: f64| shift_z1(&cache[s], j, t))
        } else if layout.w2().contains(&k) {
            let off = k - layout.w2().start;
            let (j, q) = (off / hid, off % hid);
            Box::new(move |s: usize, t: f64| shift_z2(&cache[s], q, t * cache[s].a1[j]))
        } else if layout.b2().contains(&k) {
            let q = k - layout.b2().start;
            Box::new(move |s: usize, t: f64| shift_z2(&cache[s], q, t))
        } else if layout.w3().contains(&k) {
            let q = k - layout.w3().start;
            Box::new(move |s: usize, t: f64| Some(cache[s].logit + t * relu(cache[s].z2[q])))
        } else {
            Box::new(move |s: usize, t: f64| Some(cache[s].logit + t))
        };
        let mut step = h;
        let mut fd = None;
        for _ in 0..3 {
            if let Some(q) = quotient(step, &*perturbed) {
                // the penalty is quadratic, so its central difference is exact
                fd = Some(
                    q + if is_weight(k) {
                        2.0 * alpha * theta[k]
                    } else {
                        0.0
                    },
                );
                break;
            }
            step /= 100.0;
        }
        match fd {
            None => report.skipped_kinks += 1,
            Some(fd) => {
                let g = grad[k];
                let scale = g.abs().max(fd.abs());
                if scale < floor {
                    report.below_floor += 1;
                }
                let rel = (g - fd).abs() / scale.max(floor);
                report.checked += 1;
                if rel > report.worst_relative {
                    report.worst_relative = rel;
                    report.worst_index = k;
                }
            }
        }
    }
    report
}

/// Random parameters with first-layer scale suited to inputs in [0, 1].
pub fn random_theta(r: &mut ChaCha8Rng, layout: Layout) -> Vec<f64> {
    let w1_scale = (3.0 / layout.input_dim as f64).sqrt();
    (0..layout.len())
        .map(|k| {
            let u: f64 = r.random_range(-1.0..1.0);
            if layout.w1().contains(&k) {
                u * w1_scale
            } else if layout.w2().contains(&k) || layout.w3().contains(&k) {
                u * 0.5
            } else {
                u * 0.2
            }
        })
        .collect()
}

// ---------------------------------------------------------------- ranks

pub fn brute_force_auc(labels: &[u8], scores: &[f64]) -> f64 {
    let mut count = 0.0;
    let mut pairs = 0usize;
    for (i, &yi) in labels.iter().enumerate() {
        if yi != 1 {
            continue;
        }
        for (j, &yj) in labels.iter().enumerate() {
            if yj != 0 {
                continue;
            }
            pairs += 1;
            if scores[i] > scores[j] {
                count += 1.0;
            } else if scores[i] == scores[j] {
                count += 0.5;
            }
        }
    }
    count / pairs as f64
}

/// Midrank by counting: (#smaller) + (#equal + 1) / 2.
pub fn naive_midranks(values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .map(|&v| {
            let less = values.iter().filter(|&&u| u < v).count() as f64;
            let equal = values.iter().filter(|&&u| u == v).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

fn combinations(n: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..k).collect();
    if k > n {
        return;
    }
    loop {
        visit(&idx);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Two-sided exact p-value by listing every way of assigning `a.len()` of
/// the pooled midranks to the first sample.
pub fn enumerated_mann_whitney_p(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = naive_midranks(&pooled);
    let n = a.len();
    let total = pooled.len();
    let centre = n as f64 * (total as f64 + 1.0) / 2.0;
    let observed: f64 = ranks[..n].iter().sum();
    let dev = (observed - centre).abs();
    let mut extreme = 0u64;
    let mut all = 0u64;
    combinations(total, n, |c| {
        let s: f64 = c.iter().map(|&i| ranks[i]).sum();
        all += 1;
        // rank sums are multiples of 1/2, compare with a half-step margin
        if (s - centre).abs() >= dev - 0.25 {
            extreme += 1;
        }
    });
    extreme as f64 / all as f64
}

// ---------------------------------------------------------------- samplers

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// NearMiss-3 by exhaustive search: among all majority subsets of the
/// minority size, the one with the most short-listed members and, among
/// those, the largest total score (mean distance to the `k` nearest
/// minority points). Returns majority positions, ascending.
pub fn near_miss_3_exhaustive(
    points: &[Vec<f64>],
    majority: &[usize],
    minority: &[usize],
    k: usize,
) -> Vec<usize> {
    let k = k.min(minority.len());
    let mut short_list = vec![false; majority.len()];
    for &i in minority {
        let mut by_dist: Vec<(f64, usize)> = majority
            .iter()
            .enumerate()
            .map(|(p, &j)| (euclid(&points[i], &points[j]), p))
            .collect();
        by_dist.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for &(_, p) in by_dist.iter().take(k) {
            short_list[p] = true;
        }
    }
    let score: Vec<f64> = majority
        .iter()
        .map(|&j| {
            let mut d: Vec<f64> = minority
                .iter()
                .map(|&i| euclid(&points[i], &points[j]))
                .collect();
            d.sort_by(|x, y| x.partial_cmp(y).unwrap());
            d[..k].iter().sum::<f64>() / k as f64
        })
        .collect();
    let mut best: Option<(usize, f64, Vec<usize>)> = None;
    combinations(majority.len(), minority.len(), |c| {
        let listed = c.iter().filter(|&&p| short_list[p]).count();
        let total: f64 = c.iter().map(|&p| score[p]).sum();
        let better = match &best {
            None => true,
            Some((bl, bt, _)) => listed > *bl || (listed == *bl && total > *bt + 1e-12),
        };
        if better {
            best = Some((listed, total, c.to_vec()));
        }
    });
    best.map(|b| b.2).unwrap_or_default()
}

/// Cohort whose three measures are the given 2-D points, their negation and
/// their coordinate sums.
pub fn cohort_from_points(points: &[Vec<f64>], labels: &[u8]) -> LabeledCohort {
    let n = points.len();
    let d = points[0].len();
    let w = Array2::from_shape_fn((n, d), |(i, j)| points[i][j]);
    let s = w.mapv(|v| -v);
    let c = Array2::from_shape_fn((n, 1), |(i, _)| points[i].iter().sum());
    LabeledCohort::new(
        (0..n).map(|i| format!("p{i:03}")).collect(),
        labels
            .iter()
            .map(|&l| Diagnosis::from_u8(l).unwrap())
            .collect(),
        [w, s, c],
    )
    .unwrap()
}

/// Two separated blobs (majority MCI around +2, minority HC around -2) plus
/// `flipped` MCI-labelled copies of HC points, jittered by 1e-3. Returns the
/// points, labels and indices of the planted points.
pub fn planted_blobs(
    seed: u64,
    n_majority: usize,
    n_minority: usize,
    flipped: usize,
) -> (Vec<Vec<f64>>, Vec<u8>, Vec<usize>) {
    let mut r = rng(seed);
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n_majority + n_minority {
        let (centre, label) = if i < n_majority { (2.0, 1) } else { (-2.0, 0) };
        points.push(vec![
            centre + r.random_range(-0.8..0.8),
            centre + r.random_range(-0.8..0.8),
        ]);
        labels.push(label);
    }
    let mut planted = Vec::new();
    for f in 0..flipped {
        let source = points[n_majority + f % n_minority].clone();
        planted.push(points.len());
        points.push(
            source
                .iter()
                .map(|v| v + r.random_range(-1e-3..1e-3))
                .collect(),
        );
        labels.push(1);
    }
    (points, labels, planted)
}
