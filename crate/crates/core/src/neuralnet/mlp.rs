//! Forward pass, penalized cross-entropy objective and its backpropagated
//! gradient for the two-hidden-layer ReLU network with a sigmoid output.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut2, Axis, Zip};

use super::params::{Layout, MlpParameters};
use crate::error::{Error, Result};

/// Probabilities are clipped to `[PROB_CLIP, 1 - PROB_CLIP]` before taking logs.
pub const PROB_CLIP: f64 = 1e-12;

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn relu(z: f64) -> f64 {
    z.max(0.0)
}

/// Single-sample forward pass.
pub fn forward(p: &MlpParameters, x: &[f64]) -> Result<f64> {
    let l = p.layout();
    if x.len() != l.input_dim {
        return Err(Error::DimensionMismatch {
            expected: l.input_dim,
            actual: x.len(),
        });
    }
    let (w1, b1, w2, b2, w3) = (p.w1(), p.b1(), p.w2(), p.b2(), p.w3());
    let h1: Vec<f64> = (0..l.hidden)
        .map(|j| {
            relu(
                b1[j]
                    + x.iter()
                        .enumerate()
                        .map(|(i, xi)| xi * w1[[i, j]])
                        .sum::<f64>(),
            )
        })
        .collect();
    let h2: Vec<f64> = (0..l.hidden)
        .map(|j| {
            relu(
                b2[j]
                    + h1.iter()
                        .enumerate()
                        .map(|(i, hi)| hi * w2[[i, j]])
                        .sum::<f64>(),
            )
        })
        .collect();
    let logit = p.b3() + h2.iter().zip(w3.iter()).map(|(h, w)| h * w).sum::<f64>();
    Ok(sigmoid(logit))
}

fn views(
    flat: &[f64],
    l: Layout,
) -> (
    ArrayView2<'_, f64>,
    ArrayView1<'_, f64>,
    ArrayView2<'_, f64>,
    ArrayView1<'_, f64>,
    ArrayView1<'_, f64>,
    f64,
) {
    (
        ArrayView2::from_shape((l.input_dim, l.hidden), &flat[l.w1()]).expect("layout"),
        ArrayView1::from(&flat[l.b1()]),
        ArrayView2::from_shape((l.hidden, l.hidden), &flat[l.w2()]).expect("layout"),
        ArrayView1::from(&flat[l.b2()]),
        ArrayView1::from(&flat[l.w3()]),
        flat[l.b3()],
    )
}

fn forward_pass(flat: &[f64], l: Layout, xs: ArrayView2<'_, f64>) -> Array1<f64> {
    let (w1, b1, w2, b2, w3, b3) = views(flat, l);
    let mut z1 = xs.dot(&w1);
    z1 += &b1;
    let h1 = z1.mapv(relu);
    let mut z2 = h1.dot(&w2);
    z2 += &b2;
    let h2 = z2.mapv(relu);
    h2.dot(&w3).mapv(|z| sigmoid(z + b3))
}

/// Batched forward pass over the rows of `xs`.
pub fn forward_batch(p: &MlpParameters, xs: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
    let l = p.layout();
    if xs.ncols() != l.input_dim {
        return Err(Error::DimensionMismatch {
            expected: l.input_dim,
            actual: xs.ncols(),
        });
    }
    Ok(forward_pass(p.as_flat(), l, xs).to_vec())
}

fn check_data(l: Layout, xs: ArrayView2<'_, f64>, ys: &[u8]) -> Result<()> {
    if xs.nrows() == 0 {
        return Err(Error::EmptyDataset);
    }
    if xs.ncols() != l.input_dim {
        return Err(Error::DimensionMismatch {
            expected: l.input_dim,
            actual: xs.ncols(),
        });
    }
    if ys.len() != xs.nrows() {
        return Err(Error::DimensionMismatch {
            expected: xs.nrows(),
            actual: ys.len(),
        });
    }
    if let Some(&bad) = ys.iter().find(|&&y| y > 1) {
        return Err(Error::NonBinaryLabel(bad));
    }
    Ok(())
}

fn cross_entropy(prob: &Array1<f64>, ys: &[u8]) -> f64 {
    let total: f64 = prob
        .iter()
        .zip(ys)
        .map(|(&p, &y)| {
            let p = p.clamp(PROB_CLIP, 1.0 - PROB_CLIP);
            if y == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    total / ys.len() as f64
}

fn penalty(flat: &[f64], l: Layout, l2_alpha: f64) -> f64 {
    if l2_alpha == 0.0 {
        return 0.0;
    }
    let sq: f64 = l
        .weight_blocks()
        .into_iter()
        .map(|r| flat[r].iter().map(|w| w * w).sum::<f64>())
        .sum();
    l2_alpha * sq
}

/// `J(θ) = -(1/N) Σ [y log h + (1-y) log(1-h)] + α Σ ‖W‖²` (biases unpenalized).
pub fn loss(p: &MlpParameters, xs: ArrayView2<'_, f64>, ys: &[u8], l2_alpha: f64) -> Result<f64> {
    let l = p.layout();
    check_data(l, xs, ys)?;
    let prob = forward_pass(p.as_flat(), l, xs);
    Ok(cross_entropy(&prob, ys) + penalty(p.as_flat(), l, l2_alpha))
}

/// Gradient of [`loss`] in the flat layout of [`Layout`].
pub fn gradient(
    p: &MlpParameters,
    xs: ArrayView2<'_, f64>,
    ys: &[u8],
    l2_alpha: f64,
) -> Result<Vec<f64>> {
    let l = p.layout();
    check_data(l, xs, ys)?;
    let mut grad = vec![0.0; l.len()];
    value_and_gradient_unchecked(p.as_flat(), l, xs, ys, l2_alpha, &mut grad);
    Ok(grad)
}

/// Gradient of the cross-entropy with respect to everything above the first
/// affine map, plus `∂/∂Z1`.
pub(crate) struct HeadGradient {
    pub cross_entropy: f64,
    pub dz1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    pub w3: Array1<f64>,
    pub b3: f64,
}

/// Forward and backward pass from the first-layer pre-activations `z1`
/// (bias included). `rest` holds `b1, W2, b2, w3, b3` in flat layout order.
pub(crate) fn head_backprop(
    z1: &Array2<f64>,
    rest: &[f64],
    hidden: usize,
    ys: &[u8],
) -> HeadGradient {
    let n = ys.len() as f64;
    let w2 = ArrayView2::from_shape((hidden, hidden), &rest[hidden..hidden + hidden * hidden])
        .expect("layout");
    let o = hidden + hidden * hidden;
    let b2 = ArrayView1::from(&rest[o..o + hidden]);
    let w3 = ArrayView1::from(&rest[o + hidden..o + 2 * hidden]);
    let b3 = rest[o + 2 * hidden];

    let h1 = z1.mapv(relu);
    let mut z2 = h1.dot(&w2);
    z2 += &b2;
    let h2 = z2.mapv(relu);
    let prob = h2.dot(&w3).mapv(|z| sigmoid(z + b3));
    let cross_entropy = cross_entropy(&prob, ys);

    // d loss / d logit
    let dz3: Array1<f64> = prob
        .iter()
        .zip(ys)
        .map(|(&p, &y)| (p - f64::from(y)) / n)
        .collect();
    let g_b3 = dz3.sum();
    let g_w3 = h2.t().dot(&dz3);

    // dh2 = dz3 w3ᵀ, masked by relu'(z2)
    let mut dz2 = Array2::zeros(z2.raw_dim());
    Zip::from(dz2.rows_mut())
        .and(&dz3)
        .for_each(|mut row, &d| row.scaled_add(d, &w3));
    Zip::from(&mut dz2).and(&z2).for_each(|d, &z| {
        if z <= 0.0 {
            *d = 0.0;
        }
    });
    let g_b2 = dz2.sum_axis(Axis(0));
    let g_w2 = h1.t().dot(&dz2);

    let mut dz1 = dz2.dot(&w2.t());
    Zip::from(&mut dz1).and(z1).for_each(|d, &z| {
        if z <= 0.0 {
            *d = 0.0;
        }
    });
    let g_b1 = dz1.sum_axis(Axis(0));
    HeadGradient {
        cross_entropy,
        dz1,
        b1: g_b1,
        w2: g_w2,
        b2: g_b2,
        w3: g_w3,
        b3: g_b3,
    }
}

impl HeadGradient {
    /// Writes the head gradient into `rest` (flat order `b1, W2, b2, w3, b3`).
    pub(crate) fn write_rest(&self, rest: &mut [f64]) {
        let h = self.b1.len();
        let mut o = 0;
        for block in [
            self.b1.as_slice().expect("contiguous"),
            self.w2.as_slice().expect("contiguous"),
            self.b2.as_slice().expect("contiguous"),
            self.w3.as_slice().expect("contiguous"),
        ] {
            rest[o..o + block.len()].copy_from_slice(block);
            o += block.len();
        }
        debug_assert_eq!(o, h + h * h + 2 * h);
        rest[o] = self.b3;
    }
}

/// Adds the gradient of `α (‖W2‖² + ‖w3‖²)` to `grad_rest` and returns the penalty.
pub(crate) fn rest_penalty(
    rest: &[f64],
    hidden: usize,
    l2_alpha: f64,
    grad_rest: &mut [f64],
) -> f64 {
    if l2_alpha == 0.0 {
        return 0.0;
    }
    let w2 = hidden..hidden + hidden * hidden;
    let w3 = w2.end + hidden..w2.end + 2 * hidden;
    let mut sq = 0.0;
    for r in [w2, w3] {
        for (g, w) in grad_rest[r.clone()].iter_mut().zip(&rest[r]) {
            sq += w * w;
            *g += 2.0 * l2_alpha * w;
        }
    }
    l2_alpha * sq
}

/// Objective value and gradient in one pass; inputs must already be validated.
pub(crate) fn value_and_gradient_unchecked(
    flat: &[f64],
    l: Layout,
    xs: ArrayView2<'_, f64>,
    ys: &[u8],
    l2_alpha: f64,
    grad: &mut [f64],
) -> f64 {
    let (w1, b1, ..) = views(flat, l);
    let mut z1 = xs.dot(&w1);
    z1 += &b1;
    let rest = &flat[l.b1().start..];
    let head = head_backprop(&z1, rest, l.hidden, ys);
    let (grad_w1, grad_rest) = grad.split_at_mut(l.b1().start);
    head.write_rest(grad_rest);
    let mut value = head.cross_entropy + rest_penalty(rest, l.hidden, l2_alpha, grad_rest);

    let mut gw1 = ArrayViewMut2::from_shape((l.input_dim, l.hidden), grad_w1).expect("layout");
    general_mat_mul(1.0, &xs.t(), &head.dz1, 0.0, &mut gw1);
    if l2_alpha != 0.0 {
        let w1 = &flat[l.w1()];
        let mut sq = 0.0;
        for (g, w) in gw1.iter_mut().zip(w1) {
            sq += w * w;
            *g += 2.0 * l2_alpha * w;
        }
        value += l2_alpha * sq;
    }
    value
}

#[cfg(test)]
mod tests {
    use super::super::params::{init_parameters, Layout};
    use super::*;
    use ndarray::array;

    #[test]
    fn zero_parameters_give_one_half() {
        let p = MlpParameters::zeros(3, 32);
        assert_eq!(forward(&p, &[1.0, -2.0, 5.0]).unwrap(), 0.5);
    }

    #[test]
    fn hand_evaluated_single_unit_network() {
        // 2 inputs, 1 hidden unit per layer
        let layout = Layout::new(2, 1);
        // W1 = [0.5, -1.0], b1 = 0.25, W2 = 2.0, b2 = -0.5, w3 = 1.5, b3 = -0.1
        let p =
            MlpParameters::from_flat(layout, vec![0.5, -1.0, 0.25, 2.0, -0.5, 1.5, -0.1]).unwrap();
        let x = [3.0, 0.5];
        let h1 = (0.5 * 3.0 - 1.0 * 0.5 + 0.25_f64).max(0.0); // 1.25
        let h2 = (2.0 * h1 - 0.5_f64).max(0.0); // 2.0
        let expected = 1.0 / (1.0 + (-(1.5 * h2 - 0.1_f64)).exp());
        assert!((forward(&p, &x).unwrap() - expected).abs() < 1e-15);
        // negative pre-activation is cut by the first relu
        let h = forward(&p, &[0.0, 10.0]).unwrap();
        let expected = 1.0 / (1.0 + (-(1.5 * (2.0 * 0.0 - 0.5_f64).max(0.0) - 0.1_f64)).exp());
        assert!((h - expected).abs() < 1e-15);
    }

    #[test]
    fn output_in_open_unit_interval() {
        let p = init_parameters(5, 32, 11).unwrap();
        for k in 0..50 {
            let x: Vec<f64> = (0..5)
                .map(|i| ((k * 7 + i * 3) % 11) as f64 / 5.0 - 1.0)
                .collect();
            let h = forward(&p, &x).unwrap();
            assert!(h > 0.0 && h < 1.0);
        }
        assert!(matches!(
            forward(&p, &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn loss_of_half_prediction_is_ln2() {
        let p = MlpParameters::zeros(2, 32);
        let xs = array![[0.3, 0.7]];
        let v = loss(&p, xs.view(), &[1], 0.0).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn saturated_correct_predictions_have_tiny_loss() {
        let mut p = MlpParameters::zeros(1, 32);
        let b3 = p.layout().b3();
        p.as_flat_mut()[b3] = 40.0;
        let xs = array![[1.0], [2.0]];
        assert!(loss(&p, xs.view(), &[1, 1], 0.0).unwrap() <= 1e-10);
        p.as_flat_mut()[b3] = -40.0;
        assert!(loss(&p, xs.view(), &[0, 0], 0.0).unwrap() <= 1e-10);
    }

    #[test]
    fn output_bias_derivative_closed_form() {
        let p = MlpParameters::zeros(3, 32);
        let xs = array![[0.1, 0.2, 0.3]];
        let g = gradient(&p, xs.view(), &[1], 0.0).unwrap();
        assert_eq!(g[p.layout().b3()], -0.5);
    }

    #[test]
    fn data_errors() {
        let p = MlpParameters::zeros(2, 32);
        let empty = Array2::<f64>::zeros((0, 2));
        assert!(matches!(
            loss(&p, empty.view(), &[], 0.0),
            Err(Error::EmptyDataset)
        ));
        let xs = array![[0.0, 1.0]];
        assert!(matches!(
            loss(&p, xs.view(), &[2], 0.0),
            Err(Error::NonBinaryLabel(2))
        ));
        assert!(matches!(
            gradient(&p, xs.view(), &[3], 0.0),
            Err(Error::NonBinaryLabel(3))
        ));
    }

    #[test]
    fn penalty_strictly_increases_loss() {
        let p = init_parameters(4, 32, 5).unwrap();
        let xs = array![[0.1, 0.9, 0.3, 0.2], [0.5, 0.5, 0.1, 0.0]];
        let plain = loss(&p, xs.view(), &[0, 1], 0.0).unwrap();
        let reg = loss(&p, xs.view(), &[0, 1], 1e-4).unwrap();
        assert!(reg > plain);
    }

    #[test]
    fn batch_matches_single_sample() {
        let p = init_parameters(6, 32, 2).unwrap();
        let xs = Array2::from_shape_fn((9, 6), |(i, j)| ((i * 13 + j * 7) % 10) as f64 / 10.0);
        let batch = forward_batch(&p, xs.view()).unwrap();
        for (i, row) in xs.rows().into_iter().enumerate() {
            let single = forward(&p, row.as_slice().unwrap()).unwrap();
            assert!((batch[i] - single).abs() <= 1e-14);
        }
    }
}
