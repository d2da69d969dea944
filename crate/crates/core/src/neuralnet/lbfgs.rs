//! Limited-memory BFGS with a strong-Wolfe line search.
//!
//! The search direction comes from the two-loop recursion over the last
//! `history` curvature pairs, scaled by `sᵀy / yᵀy`. Steps are accepted only
//! when they satisfy the strong Wolfe conditions, so the objective never
//! increases between accepted iterates.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sufficient-decrease constant.
pub const WOLFE_C1: f64 = 1e-4;
/// Curvature constant.
pub const WOLFE_C2: f64 = 0.9;

const MAX_LINE_SEARCH_EVALS: usize = 40;
const MAX_STEP: f64 = 1e10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LbfgsConfig {
    pub history: usize,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self {
            history: 10,
            max_iterations: 200,
            gradient_tolerance: 1e-5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// ‖∇f‖∞ fell below the tolerance.
    Converged,
    MaxIterations,
    /// No step satisfying the strong Wolfe conditions was found, even along
    /// steepest descent; the best iterate is returned.
    LineSearchFailure,
}

/// One accepted step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub step: f64,
    pub value_before: f64,
    pub value: f64,
    /// Directional derivative `∇f(x)ᵀd` at the start of the step.
    pub slope_before: f64,
    /// Directional derivative `∇f(x + αd)ᵀd` at the accepted point.
    pub slope: f64,
    /// Euclidean norm of the gradient at the accepted point.
    pub grad_norm: f64,
    pub evaluations: usize,
}

impl IterationRecord {
    pub fn satisfies_strong_wolfe(&self, c1: f64, c2: f64) -> bool {
        self.value <= self.value_before + c1 * self.step * self.slope_before
            && self.slope.abs() <= c2 * self.slope_before.abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsResult<V = Vec<f64>> {
    pub x: V,
    pub value: f64,
    pub initial_value: f64,
    pub grad_inf_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
    pub trace: Vec<IterationRecord>,
}

/// Vector space the optimizer iterates in. `Vec<f64>` is the plain case;
/// other representations only need to reproduce the Euclidean geometry of
/// the parameters they stand for.
pub trait LbfgsVector: Clone {
    fn dot(&self, other: &Self) -> f64;
    /// `self += a * x`
    fn axpy(&mut self, a: f64, x: &Self);
    fn scale(&mut self, a: f64);
    fn norm_inf(&self) -> f64;
    fn is_finite(&self) -> bool;

    /// `‖self‖∞ <= tol`. Implementations with an expensive `norm_inf` may
    /// decide from cheaper bounds first.
    fn norm_inf_at_most(&self, tol: f64) -> bool {
        self.norm_inf() <= tol
    }
}

impl LbfgsVector for Vec<f64> {
    fn dot(&self, other: &Self) -> f64 {
        self.iter().zip(other).map(|(x, y)| x * y).sum()
    }

    fn axpy(&mut self, a: f64, x: &Self) {
        for (s, xi) in self.iter_mut().zip(x) {
            *s += a * xi;
        }
    }

    fn scale(&mut self, a: f64) {
        for s in self.iter_mut() {
            *s *= a;
        }
    }

    fn norm_inf(&self) -> f64 {
        self.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }
}

impl<V> LbfgsResult<V> {
    pub fn map_point<W>(self, f: impl FnOnce(V) -> W) -> LbfgsResult<W> {
        LbfgsResult {
            x: f(self.x),
            value: self.value,
            initial_value: self.initial_value,
            grad_inf_norm: self.grad_inf_norm,
            iterations: self.iterations,
            evaluations: self.evaluations,
            termination: self.termination,
            trace: self.trace,
        }
    }
}

fn difference<V: LbfgsVector>(a: &V, b: &V) -> V {
    let mut out = a.clone();
    out.axpy(-1.0, b);
    out
}

struct CurvaturePair<V> {
    s: V,
    y: V,
    rho: f64,
}

/// `-H g` via the two-loop recursion.
fn two_loop<V: LbfgsVector>(history: &VecDeque<CurvaturePair<V>>, g: &V) -> V {
    let mut d = g.clone();
    d.scale(-1.0);
    let mut alphas = vec![0.0; history.len()];
    for (k, pair) in history.iter().enumerate().rev() {
        let a = pair.rho * pair.s.dot(&d);
        alphas[k] = a;
        d.axpy(-a, &pair.y);
    }
    if let Some(last) = history.back() {
        d.scale(last.s.dot(&last.y) / last.y.dot(&last.y));
    }
    for (k, pair) in history.iter().enumerate() {
        let b = pair.rho * pair.y.dot(&d);
        d.axpy(alphas[k] - b, &pair.s);
    }
    d
}

/// Point evaluated during a line search.
#[derive(Clone)]
struct Probe<V> {
    step: f64,
    value: f64,
    slope: f64,
    point: Option<(V, V)>,
}

struct LineSearch<'a, V, F> {
    objective: &'a mut F,
    x0: &'a V,
    d: &'a V,
    f0: f64,
    slope0: f64,
    evaluations: usize,
}

impl<V: LbfgsVector, F: FnMut(&V) -> (f64, V)> LineSearch<'_, V, F> {
    fn probe(&mut self, step: f64) -> Probe<V> {
        let mut x = self.x0.clone();
        x.axpy(step, self.d);
        let (value, grad) = (self.objective)(&x);
        self.evaluations += 1;
        let finite = value.is_finite() && grad.is_finite();
        let value = if finite { value } else { f64::INFINITY };
        let slope = if finite { grad.dot(self.d) } else { f64::NAN };
        Probe {
            step,
            value,
            slope,
            point: Some((x, grad)),
        }
    }

    fn armijo(&self, p: &Probe<V>) -> bool {
        p.value.is_finite() && p.value <= self.f0 + WOLFE_C1 * p.step * self.slope0
    }

    fn curvature(&self, p: &Probe<V>) -> bool {
        p.slope.abs() <= -WOLFE_C2 * self.slope0
    }

    /// Bracketing phase; returns a point satisfying the strong Wolfe conditions.
    fn search(&mut self, initial_step: f64) -> Option<Probe<V>> {
        let mut prev = Probe {
            step: 0.0,
            value: self.f0,
            slope: self.slope0,
            point: None,
        };
        let mut step = initial_step;
        let mut first = true;
        while self.evaluations < MAX_LINE_SEARCH_EVALS {
            let cur = self.probe(step);
            if !self.armijo(&cur) || (!first && cur.value >= prev.value) {
                return self.zoom(prev, cur);
            }
            if self.curvature(&cur) {
                return Some(cur);
            }
            if cur.slope >= 0.0 {
                return self.zoom(cur, prev);
            }
            if step >= MAX_STEP {
                return None;
            }
            prev = cur;
            step = (step * 4.0).min(MAX_STEP);
            first = false;
        }
        None
    }

    /// Refines a bracket `[lo, hi]` (`lo` satisfies Armijo and has the lower
    /// value) until the strong Wolfe conditions hold.
    fn zoom(&mut self, mut lo: Probe<V>, mut hi: Probe<V>) -> Option<Probe<V>> {
        while self.evaluations < MAX_LINE_SEARCH_EVALS {
            let width = (hi.step - lo.step).abs();
            if width <= f64::EPSILON * lo.step.abs().max(1e-300) {
                return None;
            }
            let (a, b) = if lo.step < hi.step {
                (lo.step, hi.step)
            } else {
                (hi.step, lo.step)
            };
            let trial = interpolate(lo.step, lo.value, lo.slope, hi.step, hi.value, hi.slope)
                .filter(|t| *t > a + 0.1 * width && *t < b - 0.1 * width)
                .unwrap_or(0.5 * (lo.step + hi.step));
            let cur = self.probe(trial);
            if !self.armijo(&cur) || cur.value >= lo.value {
                hi = cur;
            } else {
                if self.curvature(&cur) {
                    return Some(cur);
                }
                if cur.slope * (hi.step - lo.step) >= 0.0 {
                    hi = lo;
                }
                lo = cur;
            }
        }
        None
    }
}

/// Minimizer of the cubic matching values and slopes at two steps.
fn interpolate(
    p_step: f64,
    p_value: f64,
    p_slope: f64,
    q_step: f64,
    q_value: f64,
    q_slope: f64,
) -> Option<f64> {
    if ![p_value, q_value, p_slope, q_slope]
        .iter()
        .all(|v| v.is_finite())
    {
        return None;
    }
    let d1 = p_slope + q_slope - 3.0 * (p_value - q_value) / (p_step - q_step);
    let disc = d1 * d1 - p_slope * q_slope;
    if disc < 0.0 {
        return None;
    }
    let d2 = (q_step - p_step).signum() * disc.sqrt();
    let denom = q_slope - p_slope + 2.0 * d2;
    if denom == 0.0 {
        return None;
    }
    let t = q_step - (q_step - p_step) * (q_slope + d2 - d1) / denom;
    t.is_finite().then_some(t)
}

/// Minimizes `objective`, which writes the gradient into its second argument
/// and returns the value.
pub fn lbfgs_minimize<F>(mut objective: F, x0: Vec<f64>, cfg: &LbfgsConfig) -> Result<LbfgsResult>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let out = lbfgs_minimize_in(
        |x: &Vec<f64>| {
            let mut g = vec![0.0; x.len()];
            let f = objective(x, &mut g);
            (f, g)
        },
        x0,
        cfg,
    )?;
    Ok(out)
}

/// [`lbfgs_minimize`] over any [`LbfgsVector`] representation.
pub fn lbfgs_minimize_in<V, F>(mut objective: F, x0: V, cfg: &LbfgsConfig) -> Result<LbfgsResult<V>>
where
    V: LbfgsVector,
    F: FnMut(&V) -> (f64, V),
{
    if cfg.history == 0 || cfg.max_iterations == 0 || !(cfg.gradient_tolerance > 0.0) {
        return Err(Error::InvalidConfig(
            "history, max_iterations and gradient_tolerance must be positive".into(),
        ));
    }
    let mut x = x0;
    let (mut f, mut g) = objective(&x);
    if !f.is_finite() || !g.is_finite() {
        return Err(Error::NonFiniteObjective);
    }
    let initial_value = f;
    let mut evaluations = 1;
    let mut history: VecDeque<CurvaturePair<V>> = VecDeque::with_capacity(cfg.history);
    let mut trace = Vec::new();
    let mut termination = Termination::MaxIterations;

    let mut iteration = 0;
    loop {
        if g.norm_inf_at_most(cfg.gradient_tolerance) {
            termination = Termination::Converged;
            break;
        }
        if iteration >= cfg.max_iterations {
            break;
        }
        let mut d = two_loop(&history, &g);
        let mut slope = g.dot(&d);
        if !(slope < 0.0) {
            history.clear();
            d = two_loop(&history, &g);
            slope = g.dot(&d);
        }
        let initial_step = if history.is_empty() {
            (1.0 / d.dot(&d).sqrt()).min(1.0)
        } else {
            1.0
        };

        let mut ls = LineSearch {
            objective: &mut objective,
            x0: &x,
            d: &d,
            f0: f,
            slope0: slope,
            evaluations: 0,
        };
        let found = ls.search(initial_step);
        let step_evaluations = ls.evaluations;
        evaluations += step_evaluations;
        let Some(accepted) = found else {
            if history.is_empty() {
                termination = Termination::LineSearchFailure;
                break;
            }
            // retry once along steepest descent with fresh memory
            history.clear();
            continue;
        };
        let (x_new, g_new) = accepted.point.expect("accepted probes carry their point");

        let s = difference(&x_new, &x);
        let y = difference(&g_new, &g);
        let sy = s.dot(&y);
        if sy > f64::EPSILON * y.dot(&y).sqrt() * s.dot(&s).sqrt() {
            if history.len() == cfg.history {
                history.pop_front();
            }
            history.push_back(CurvaturePair {
                s,
                y,
                rho: 1.0 / sy,
            });
        }
        iteration += 1;
        trace.push(IterationRecord {
            iteration,
            step: accepted.step,
            value_before: f,
            value: accepted.value,
            slope_before: slope,
            slope: accepted.slope,
            grad_norm: g_new.dot(&g_new).sqrt(),
            evaluations: step_evaluations,
        });
        x = x_new;
        g = g_new;
        f = accepted.value;
    }
    Ok(LbfgsResult {
        grad_inf_norm: g.norm_inf(),
        x,
        value: f,
        initial_value,
        iterations: iteration,
        evaluations,
        termination,
        trace,
    })
}
