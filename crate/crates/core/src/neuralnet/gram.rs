//! Training in the span of the training rows.
//!
//! Every gradient of the objective with respect to the first-layer weights
//! has the form `Xᵀ M + 2α W1`. Starting from `W1 = W0`, every L-BFGS
//! iterate, search direction and curvature pair therefore stays of the form
//! `c · W0 + Xᵀ A` with a scalar `c` and an `N x hidden` matrix `A`. Inner
//! products of such blocks only involve `K = X Xᵀ`, `X W0` and `‖W0‖²`, so
//! the optimizer runs on the same iterates as in the full parameter space
//! while every operation costs `O(N² · hidden)` instead of
//! `O(N · d · hidden)`. This matters when `d` (thousands of edges) is much
//! larger than the number of subjects.

use std::sync::Arc;

use ndarray::{Array2, ArrayView2};

use super::lbfgs::LbfgsVector;
use super::mlp::{head_backprop, rest_penalty};
use super::params::{Layout, MlpParameters};

pub(crate) struct GramContext {
    xs: Array2<f64>,
    w0: Array2<f64>,
    /// `X W0`
    xw0: Array2<f64>,
    /// `X Xᵀ`
    gram: Array2<f64>,
    w0_sq: f64,
    layout: Layout,
    sqrt_len: f64,
    /// Largest Euclidean norm of a feature column of `X`.
    max_column_norm: f64,
    max_abs_w0: f64,
}

impl GramContext {
    pub(crate) fn new(xs: ArrayView2<'_, f64>, init: &MlpParameters) -> Arc<Self> {
        let layout = init.layout();
        let w0 = init.w1().to_owned();
        let xw0 = xs.dot(&w0);
        let gram = xs.dot(&xs.t());
        let w0_sq = w0.iter().map(|v| v * v).sum();
        let max_column_norm = xs
            .columns()
            .into_iter()
            .map(|c| c.dot(&c).sqrt())
            .fold(0.0, f64::max);
        let max_abs_w0 = w0.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        Arc::new(Self {
            xs: xs.to_owned(),
            w0,
            xw0,
            gram,
            w0_sq,
            layout,
            sqrt_len: (layout.len() as f64).sqrt(),
            max_column_norm,
            max_abs_w0,
        })
    }

    /// The starting point `W1 = W0` with the remaining parameters of `init`.
    pub(crate) fn start(self: &Arc<Self>, init: &MlpParameters) -> GramVector {
        let n = self.xs.nrows();
        let h = self.layout.hidden;
        GramVector {
            ctx: Arc::clone(self),
            c: 1.0,
            a: Array2::zeros((n, h)),
            ka: Array2::zeros((n, h)),
            xw0_a: 0.0,
            rest: init.as_flat()[self.layout.b1().start..].to_vec(),
        }
    }
}

/// A parameter vector whose first-layer block is `c · W0 + Xᵀ a`.
#[derive(Clone)]
pub(crate) struct GramVector {
    ctx: Arc<GramContext>,
    c: f64,
    a: Array2<f64>,
    /// Cached `K a`.
    ka: Array2<f64>,
    /// Cached `⟨X W0, a⟩`.
    xw0_a: f64,
    rest: Vec<f64>,
}

fn slice_dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    acc[0] + acc[1] + acc[2] + acc[3] + tail
}

fn frobenius(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    slice_dot(
        a.as_slice().expect("standard layout"),
        b.as_slice().expect("standard layout"),
    )
}

impl GramVector {
    fn w1_dot(&self, other: &Self) -> f64 {
        let ctx = &self.ctx;
        self.c * other.c * ctx.w0_sq
            + self.c * other.xw0_a
            + other.c * self.xw0_a
            + frobenius(&self.a, &other.ka)
    }

    /// First-layer block in the original `d x hidden` shape.
    pub(crate) fn materialize_w1(&self) -> Array2<f64> {
        let mut w1 = self.ctx.xs.t().dot(&self.a);
        w1.scaled_add(self.c, &self.ctx.w0);
        w1
    }

    pub(crate) fn into_parameters(self) -> MlpParameters {
        let w1 = self.materialize_w1();
        let mut flat = Vec::with_capacity(self.ctx.layout.len());
        flat.extend(w1.iter().copied());
        flat.extend_from_slice(&self.rest);
        MlpParameters::from_flat(self.ctx.layout, flat).expect("layout")
    }

    /// Penalized cross-entropy and its gradient at this point.
    pub(crate) fn value_and_gradient(&self, ys: &[u8], l2_alpha: f64) -> (f64, GramVector) {
        let ctx = &self.ctx;
        let h = ctx.layout.hidden;
        let b1 = ndarray::ArrayView1::from(&self.rest[..h]);
        let mut z1 = ctx.xw0.clone() * self.c;
        z1 += &self.ka;
        z1 += &b1;
        let head = head_backprop(&z1, &self.rest, h, ys);

        let mut grad_rest = vec![0.0; self.rest.len()];
        head.write_rest(&mut grad_rest);
        let mut value = head.cross_entropy + rest_penalty(&self.rest, h, l2_alpha, &mut grad_rest);

        let mut a = head.dz1;
        let mut c = 0.0;
        if l2_alpha != 0.0 {
            value += l2_alpha * self.w1_dot(self);
            a.scaled_add(2.0 * l2_alpha, &self.a);
            c = 2.0 * l2_alpha * self.c;
        }
        let ka = ctx.gram.dot(&a);
        let xw0_a = frobenius(&ctx.xw0, &a);
        (
            value,
            GramVector {
                ctx: Arc::clone(ctx),
                c,
                a,
                ka,
                xw0_a,
                rest: grad_rest,
            },
        )
    }
}

impl LbfgsVector for GramVector {
    fn dot(&self, other: &Self) -> f64 {
        self.w1_dot(other) + slice_dot(&self.rest, &other.rest)
    }

    fn axpy(&mut self, alpha: f64, x: &Self) {
        self.c += alpha * x.c;
        self.a.scaled_add(alpha, &x.a);
        self.ka.scaled_add(alpha, &x.ka);
        self.xw0_a += alpha * x.xw0_a;
        for (s, v) in self.rest.iter_mut().zip(&x.rest) {
            *s += alpha * v;
        }
    }

    fn scale(&mut self, alpha: f64) {
        self.c *= alpha;
        self.a *= alpha;
        self.ka *= alpha;
        self.xw0_a *= alpha;
        for s in self.rest.iter_mut() {
            *s *= alpha;
        }
    }

    fn norm_inf(&self) -> f64 {
        let w1 = self.materialize_w1();
        w1.iter()
            .chain(self.rest.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    fn norm_inf_at_most(&self, tol: f64) -> bool {
        // ‖v‖∞ <= ‖v‖₂ <= sqrt(len) ‖v‖∞
        let norm2 = self.dot(self).max(0.0).sqrt();
        if norm2 <= tol {
            return true;
        }
        if norm2 > tol * self.ctx.sqrt_len {
            return false;
        }
        let rest_inf = self.rest.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if rest_inf > tol {
            return false;
        }
        // |(Xᵀa)_ij + c w0_ij| <= ‖X_:i‖ ‖a_:j‖ + |c| |w0_ij|
        let max_a_col = self
            .a
            .columns()
            .into_iter()
            .map(|c| c.dot(&c).sqrt())
            .fold(0.0, f64::max);
        if self.ctx.max_column_norm * max_a_col + self.c.abs() * self.ctx.max_abs_w0 <= tol {
            return true;
        }
        self.norm_inf() <= tol
    }

    fn is_finite(&self) -> bool {
        self.c.is_finite()
            && self.a.iter().all(|v| v.is_finite())
            && self.ka.iter().all(|v| v.is_finite())
            && self.xw0_a.is_finite()
            && self.rest.iter().all(|v| v.is_finite())
    }
}
