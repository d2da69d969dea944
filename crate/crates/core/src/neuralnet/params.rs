use ndarray::{ArrayView1, ArrayView2};
use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Width of each of the two hidden layers.
pub const HIDDEN_UNITS: usize = 32;

/// Offsets of each parameter block inside the flat parameter vector.
///
/// The flat order is `W1` (`input_dim x hidden`, row-major), `b1`,
/// `W2` (`hidden x hidden`, row-major), `b2`, `w3` (`hidden`), `b3`.
/// Gradients use the same layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub input_dim: usize,
    pub hidden: usize,
}

impl Layout {
    pub fn new(input_dim: usize, hidden: usize) -> Self {
        Self { input_dim, hidden }
    }

    pub fn w1(&self) -> std::ops::Range<usize> {
        0..self.input_dim * self.hidden
    }

    pub fn b1(&self) -> std::ops::Range<usize> {
        let s = self.w1().end;
        s..s + self.hidden
    }

    pub fn w2(&self) -> std::ops::Range<usize> {
        let s = self.b1().end;
        s..s + self.hidden * self.hidden
    }

    pub fn b2(&self) -> std::ops::Range<usize> {
        let s = self.w2().end;
        s..s + self.hidden
    }

    pub fn w3(&self) -> std::ops::Range<usize> {
        let s = self.b2().end;
        s..s + self.hidden
    }

    pub fn b3(&self) -> usize {
        self.w3().end
    }

    pub fn len(&self) -> usize {
        self.b3() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Ranges of the penalized (weight, not bias) blocks.
    pub fn weight_blocks(&self) -> [std::ops::Range<usize>; 3] {
        [self.w1(), self.w2(), self.w3()]
    }
}

/// Network parameters θ stored as one flat vector (see [`Layout`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParameters {
    layout: Layout,
    flat: Vec<f64>,
}

impl MlpParameters {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        let layout = Layout::new(input_dim, hidden);
        Self {
            layout,
            flat: vec![0.0; layout.len()],
        }
    }

    pub fn from_flat(layout: Layout, flat: Vec<f64>) -> Result<Self> {
        if flat.len() != layout.len() {
            return Err(Error::DimensionMismatch {
                expected: layout.len(),
                actual: flat.len(),
            });
        }
        Ok(Self { layout, flat })
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn input_dim(&self) -> usize {
        self.layout.input_dim
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.flat
    }

    pub fn as_flat_mut(&mut self) -> &mut [f64] {
        &mut self.flat
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.flat
    }

    pub fn w1(&self) -> ArrayView2<'_, f64> {
        let l = self.layout;
        ArrayView2::from_shape((l.input_dim, l.hidden), &self.flat[l.w1()]).expect("layout")
    }

    pub fn b1(&self) -> ArrayView1<'_, f64> {
        ArrayView1::from(&self.flat[self.layout.b1()])
    }

    pub fn w2(&self) -> ArrayView2<'_, f64> {
        let l = self.layout;
        ArrayView2::from_shape((l.hidden, l.hidden), &self.flat[l.w2()]).expect("layout")
    }

    pub fn b2(&self) -> ArrayView1<'_, f64> {
        ArrayView1::from(&self.flat[self.layout.b2()])
    }

    pub fn w3(&self) -> ArrayView1<'_, f64> {
        ArrayView1::from(&self.flat[self.layout.w3()])
    }

    pub fn b3(&self) -> f64 {
        self.flat[self.layout.b3()]
    }

    pub fn is_finite(&self) -> bool {
        self.flat.iter().all(|v| v.is_finite())
    }
}

/// Half-width of the uniform initialization range for a layer.
pub fn init_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Fan-scaled uniform weights, zero biases; deterministic per seed.
pub fn init_parameters(input_dim: usize, hidden: usize, seed: u64) -> Result<MlpParameters> {
    if input_dim == 0 || hidden == 0 {
        return Err(Error::InvalidConfig(
            "input_dim and hidden must be >= 1".into(),
        ));
    }
    let mut p = MlpParameters::zeros(input_dim, hidden);
    let layout = p.layout;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let blocks = [
        (layout.w1(), input_dim, hidden),
        (layout.w2(), hidden, hidden),
        (layout.w3(), hidden, 1),
    ];
    for (range, fan_in, fan_out) in blocks {
        let b = init_bound(fan_in, fan_out);
        let dist = Uniform::new_inclusive(-b, b).expect("finite bound");
        for v in &mut p.flat[range] {
            *v = dist.sample(&mut rng);
        }
    }
    Ok(p)
}
