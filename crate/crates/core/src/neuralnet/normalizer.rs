use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-feature min-max scaling to `[0, 1]`, fitted on training rows only.
///
/// Features with `max == min` map to 0; values outside the fitted range are
/// clipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxNormalizer {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxNormalizer {
    pub fn fit(xs: ArrayView2<'_, f64>) -> Result<Self> {
        if xs.nrows() == 0 {
            return Err(Error::EmptyDataset);
        }
        let min = xs
            .fold_axis(Axis(0), f64::INFINITY, |a, &b| a.min(b))
            .to_vec();
        let max = xs
            .fold_axis(Axis(0), f64::NEG_INFINITY, |a, &b| a.max(b))
            .to_vec();
        Ok(Self { min, max })
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    fn scale(&self, j: usize, v: f64) -> f64 {
        let range = self.max[j] - self.min[j];
        if range > 0.0 {
            ((v - self.min[j]) / range).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }

    pub fn transform_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: x.len(),
            });
        }
        Ok(x.iter()
            .enumerate()
            .map(|(j, &v)| self.scale(j, v))
            .collect())
    }

    pub fn transform(&self, xs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if xs.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: xs.ncols(),
            });
        }
        let mut out = xs.to_owned();
        for mut row in out.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.scale(j, *v);
            }
        }
        Ok(out)
    }
}

pub fn fit_normalizer(xs: ArrayView2<'_, f64>) -> Result<MinMaxNormalizer> {
    MinMaxNormalizer::fit(xs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn affine_map_degenerate_and_clipping() {
        let train = array![[2.0, 3.0], [4.0, 3.0], [6.0, 3.0]];
        let n = fit_normalizer(train.view()).unwrap();
        let t = n.transform(train.view()).unwrap();
        assert_eq!(t.column(0).to_vec(), vec![0.0, 0.5, 1.0]);
        assert_eq!(t.column(1).to_vec(), vec![0.0, 0.0, 0.0]);
        assert_eq!(n.transform_row(&[10.0, 3.0]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(n.transform_row(&[-1.0, 8.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn empty_and_mismatch() {
        let empty = Array2::<f64>::zeros((0, 3));
        assert!(matches!(
            fit_normalizer(empty.view()),
            Err(Error::EmptyDataset)
        ));
        let n = fit_normalizer(array![[1.0, 2.0]].view()).unwrap();
        assert!(n.transform_row(&[1.0]).is_err());
    }
}
