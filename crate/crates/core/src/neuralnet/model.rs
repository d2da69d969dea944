use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::gram::{GramContext, GramVector};
use super::lbfgs::{lbfgs_minimize, lbfgs_minimize_in, LbfgsConfig, Termination};
use super::mlp::{forward, forward_batch, value_and_gradient_unchecked};
use super::normalizer::MinMaxNormalizer;
use super::params::{init_parameters, MlpParameters, HIDDEN_UNITS};
use crate::error::{Error, Result};

fn default_hidden() -> usize {
    HIDDEN_UNITS
}

/// Hyper-parameters shared by every network trained in an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Coefficient of the squared-weight penalty.
    pub l2_alpha: f64,
    pub lbfgs_history: usize,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub seed: u64,
    #[serde(default = "default_hidden")]
    pub hidden_units: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            l2_alpha: 1e-4,
            lbfgs_history: 10,
            max_iterations: 200,
            gradient_tolerance: 1e-5,
            seed: 0,
            hidden_units: HIDDEN_UNITS,
        }
    }
}

impl TrainConfig {
    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l2_alpha >= 0.0 && self.l2_alpha.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "l2_alpha must be >= 0, got {}",
                self.l2_alpha
            )));
        }
        if self.lbfgs_history == 0 || self.max_iterations == 0 || self.hidden_units == 0 {
            return Err(Error::InvalidConfig(
                "lbfgs_history, max_iterations and hidden_units must be >= 1".into(),
            ));
        }
        if !(self.gradient_tolerance > 0.0) {
            return Err(Error::InvalidConfig(
                "gradient_tolerance must be > 0".into(),
            ));
        }
        Ok(())
    }

    fn lbfgs(&self) -> LbfgsConfig {
        LbfgsConfig {
            history: self.lbfgs_history,
            max_iterations: self.max_iterations,
            gradient_tolerance: self.gradient_tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub initial_loss: f64,
    pub final_loss: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
}

/// A trained network together with the normalizer fitted on its training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub parameters: MlpParameters,
    pub normalizer: MinMaxNormalizer,
    pub summary: TrainingSummary,
}

impl MlpModel {
    pub fn input_dim(&self) -> usize {
        self.parameters.input_dim()
    }

    /// `forward(θ, clip01(normalize(x)))`.
    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        forward(&self.parameters, &self.normalizer.transform_row(x)?)
    }

    pub fn predict_proba_batch(&self, xs: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        let normalized = self.normalizer.transform(xs)?;
        forward_batch(&self.parameters, normalized.view())
    }
}

/// Fits the normalizer on `xs`, initializes θ from `cfg.seed` and minimizes
/// the penalized cross-entropy with L-BFGS.
pub fn train_classifier(xs: ArrayView2<'_, f64>, ys: &[u8], cfg: &TrainConfig) -> Result<MlpModel> {
    cfg.validate()?;
    if xs.nrows() == 0 || xs.ncols() == 0 {
        return Err(Error::EmptyDataset);
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
    let positives = ys.iter().filter(|&&y| y == 1).count();
    if positives == 0 || positives == ys.len() {
        return Err(Error::SingleClassTrainingSet);
    }

    let normalizer = MinMaxNormalizer::fit(xs)?;
    let normalized = normalizer.transform(xs)?;
    let init = init_parameters(xs.ncols(), cfg.hidden_units, cfg.seed)?;
    let layout = init.layout();
    let alpha = cfg.l2_alpha;
    let data = normalized.view();
    let (result, parameters) = if data.nrows() < data.ncols() {
        let ctx = GramContext::new(data, &init);
        let start = ctx.start(&init);
        let r = lbfgs_minimize_in(
            |theta: &GramVector| theta.value_and_gradient(ys, alpha),
            start,
            &cfg.lbfgs(),
        )?;
        let parameters = r.x.clone().into_parameters();
        (r.map_point(|_| ()), parameters)
    } else {
        let r = lbfgs_minimize(
            |theta, grad| value_and_gradient_unchecked(theta, layout, data, ys, alpha, grad),
            init.into_flat(),
            &cfg.lbfgs(),
        )?;
        let parameters = MlpParameters::from_flat(layout, r.x.clone())?;
        (r.map_point(|_| ()), parameters)
    };
    log::debug!(
        "trained d={} n={} iterations={} loss {:.6} -> {:.6} ({:?})",
        layout.input_dim,
        ys.len(),
        result.iterations,
        result.initial_value,
        result.value,
        result.termination
    );
    if !parameters.is_finite() {
        return Err(Error::NonFiniteObjective);
    }
    Ok(MlpModel {
        parameters,
        normalizer,
        summary: TrainingSummary {
            initial_loss: result.initial_value,
            final_loss: result.value,
            iterations: result.iterations,
            evaluations: result.evaluations,
            termination: result.termination,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn blobs(n: usize, seed: u64) -> (Array2<f64>, Vec<u8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut xs = Array2::zeros((n, 2));
        let mut ys = Vec::with_capacity(n);
        for i in 0..n {
            let y = (i % 2) as u8;
            let c = if y == 1 { 2.0 } else { -2.0 };
            xs[[i, 0]] = c + rng.sample::<f64, _>(StandardNormal) * 0.7;
            xs[[i, 1]] = c + rng.sample::<f64, _>(StandardNormal) * 0.7;
            ys.push(y);
        }
        (xs, ys)
    }

    #[test]
    fn separable_blobs_are_learned() {
        let (xs, ys) = blobs(100, 1);
        let cfg = TrainConfig::default();
        let m = train_classifier(xs.view(), &ys, &cfg).unwrap();
        let p = m.predict_proba_batch(xs.view()).unwrap();
        let correct = p
            .iter()
            .zip(&ys)
            .filter(|(p, &y)| (**p >= 0.5) == (y == 1))
            .count();
        assert!(correct as f64 / 100.0 >= 0.95);
        assert!(m.summary.final_loss <= m.summary.initial_loss);
    }

    #[test]
    fn training_is_deterministic() {
        let (xs, ys) = blobs(40, 2);
        let cfg = TrainConfig {
            max_iterations: 30,
            ..Default::default()
        };
        let a = train_classifier(xs.view(), &ys, &cfg).unwrap();
        let b = train_classifier(xs.view(), &ys, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_class_is_rejected() {
        let (xs, _) = blobs(10, 3);
        let ys = vec![1u8; 10];
        assert!(matches!(
            train_classifier(xs.view(), &ys, &TrainConfig::default()),
            Err(Error::SingleClassTrainingSet)
        ));
    }

    #[test]
    fn predict_proba_composes_normalizer_and_forward() {
        let (xs, ys) = blobs(30, 4);
        let cfg = TrainConfig {
            max_iterations: 20,
            ..Default::default()
        };
        let m = train_classifier(xs.view(), &ys, &cfg).unwrap();
        let x = [0.3, -5.0];
        let direct = forward(&m.parameters, &m.normalizer.transform_row(&x).unwrap()).unwrap();
        let p = m.predict_proba(&x).unwrap();
        assert_eq!(p, direct);
        assert!(p > 0.0 && p < 1.0);
        assert!(m.predict_proba(&[1.0]).is_err());
        let batch = m.predict_proba_batch(xs.view()).unwrap();
        for (i, row) in xs.rows().into_iter().enumerate() {
            assert!((batch[i] - m.predict_proba(row.as_slice().unwrap()).unwrap()).abs() < 1e-14);
        }
    }
}
