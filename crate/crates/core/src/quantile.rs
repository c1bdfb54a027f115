//! Two-headed quantile regression over edge embeddings.
//!
//! A three-layer ReLU network with a shared trunk and a two-wide output
//! estimates the `alpha/2` and `1 - alpha/2` conditional quantiles of the
//! link label. It is fit by minimizing the summed pinball loss.

use std::cell::RefCell;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, ClpError, Result};
use crate::linalg::Matrix;
use crate::model::EdgeEmbedding;
use crate::nn::{self, GradCheck, Mlp, Momentum};
use crate::rng::{derived_rng, rng_from_seed};

/// Quantile (pinball) loss of `prediction` for `target` at level `gamma`.
pub fn pinball_loss(prediction: f64, target: f64, gamma: f64) -> Result<f64> {
    check_level(gamma)?;
    Ok(pinball(prediction, target, gamma))
}

fn pinball(prediction: f64, target: f64, gamma: f64) -> f64 {
    if target >= prediction {
        gamma * (target - prediction)
    } else {
        (1.0 - gamma) * (prediction - target)
    }
}

/// Derivative with respect to the prediction; the kink takes the `gamma` branch.
fn pinball_grad(prediction: f64, target: f64, gamma: f64) -> f64 {
    if target >= prediction {
        -gamma
    } else {
        1.0 - gamma
    }
}

fn check_level(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("quantile level must lie in (0, 1), got {gamma}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileConfig {
    pub hidden_dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
}

impl Default for QuantileConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 64,
            epochs: 200,
            learning_rate: 5e-4,
            momentum: 0.9,
            batch_size: 64,
        }
    }
}

impl QuantileConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_dim == 0 || self.batch_size == 0 {
            return Err(invalid("quantile network widths and batch size must be positive"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid("learning rate must be finite and >= 0"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(invalid("momentum must lie in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileModel {
    pub lower_level: f64,
    pub upper_level: f64,
    /// Per-feature standardization fitted on the training inputs.
    pub input_mean: Vec<f64>,
    pub input_scale: Vec<f64>,
    pub net: Mlp,
}

impl QuantileModel {
    /// Fresh network for inputs of width `dim` at levels `alpha/2`, `1 - alpha/2`.
    pub fn init(dim: usize, alpha: f64, hidden: usize, seed: u64) -> Result<Self> {
        check_level(alpha)?;
        let mut rng = rng_from_seed(seed);
        Ok(Self {
            lower_level: alpha / 2.0,
            upper_level: 1.0 - alpha / 2.0,
            input_mean: vec![0.0; dim],
            input_scale: vec![1.0; dim],
            net: Mlp::new(&[dim, hidden, hidden, 2], &mut rng),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_mean.len()
    }

    fn standardize(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.input_dim() {
            return Err(ClpError::Dimension {
                expected: self.input_dim(),
                actual: x.cols(),
            });
        }
        let mut out = x.clone();
        for r in 0..out.rows() {
            for ((v, m), s) in out.row_mut(r).iter_mut().zip(&self.input_mean).zip(&self.input_scale) {
                *v = (*v - m) / s;
            }
        }
        Ok(out)
    }

    /// Raw head outputs `(lower, upper)` per row, without crossing repair.
    pub fn raw_heads(&self, x: &Matrix) -> Result<Vec<(f64, f64)>> {
        let out = self.net.predict(&self.standardize(x)?);
        Ok((0..out.rows()).map(|r| (out.get(r, 0), out.get(r, 1))).collect())
    }

    /// `(lower, upper)` per row with `lower <= upper`.
    pub fn predict_batch(&self, x: &Matrix) -> Result<Vec<(f64, f64)>> {
        Ok(self
            .raw_heads(x)?
            .into_iter()
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect())
    }

    pub fn predict_quantiles(&self, z: &EdgeEmbedding) -> Result<(f64, f64)> {
        let x = Matrix::from_vec(1, z.dim(), z.0.clone());
        Ok(self.predict_batch(&x)?[0])
    }

    /// Mean over rows of the summed pinball losses of both heads.
    pub fn loss(&self, x: &Matrix, targets: &[f64]) -> Result<f64> {
        let heads = self.raw_heads(x)?;
        let total: f64 = heads
            .iter()
            .zip(targets)
            .map(|(&(lo, hi), &t)| pinball(lo, t, self.lower_level) + pinball(hi, t, self.upper_level))
            .sum();
        Ok(total / targets.len().max(1) as f64)
    }

    /// Loss and gradients for every network tensor, in [`Mlp::tensors`] order.
    pub fn loss_and_gradient(&self, x: &Matrix, targets: &[f64]) -> Result<(f64, Vec<Vec<f64>>)> {
        let xs = self.standardize(x)?;
        let (grads, loss) = self.gradient_standardized(&xs, targets);
        Ok((loss, grads.tensors().iter().map(|t| t.to_vec()).collect()))
    }

    fn gradient_standardized(&self, xs: &Matrix, targets: &[f64]) -> (Mlp, f64) {
        let (out, cache) = self.net.forward(xs);
        let n = targets.len() as f64;
        let mut d_out = Matrix::zeros(out.rows(), 2);
        let mut loss = 0.0;
        for (r, &t) in targets.iter().enumerate() {
            let (lo, hi) = (out.get(r, 0), out.get(r, 1));
            loss += pinball(lo, t, self.lower_level) + pinball(hi, t, self.upper_level);
            d_out.set(r, 0, pinball_grad(lo, t, self.lower_level) / n);
            d_out.set(r, 1, pinball_grad(hi, t, self.upper_level) / n);
        }
        let (grads, _) = self.net.backward(&cache, &d_out);
        (grads, loss / n)
    }
}

/// Empirical `gamma`-quantile (lower interpolation-free order statistic).
fn empirical_quantile(sorted: &[f64], gamma: f64) -> f64 {
    let k = ((gamma * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[k - 1]
}

/// Fits both quantile heads on `(embeddings, targets)` with mini-batch
/// momentum SGD for a fixed number of epochs. The output layer starts with
/// zero weights and biases at the unconditional empirical quantiles of the
/// targets.
pub fn fit_quantile_functions(
    embeddings: &Matrix,
    targets: &[f64],
    alpha: f64,
    config: &QuantileConfig,
    seed: u64,
) -> Result<QuantileModel> {
    config.validate()?;
    check_level(alpha)?;
    if embeddings.rows() == 0 {
        return Err(invalid("quantile regression needs at least one example"));
    }
    if embeddings.rows() != targets.len() {
        return Err(ClpError::Dimension {
            expected: embeddings.rows(),
            actual: targets.len(),
        });
    }
    if targets.iter().any(|t| !t.is_finite()) {
        return Err(invalid("targets must be finite"));
    }
    let dim = embeddings.cols();
    let mut model = QuantileModel::init(dim, alpha, config.hidden_dim, seed)?;

    let n = embeddings.rows() as f64;
    for j in 0..dim {
        let mean = (0..embeddings.rows()).map(|r| embeddings.get(r, j)).sum::<f64>() / n;
        let var = (0..embeddings.rows())
            .map(|r| (embeddings.get(r, j) - mean).powi(2))
            .sum::<f64>()
            / n;
        model.input_mean[j] = mean;
        model.input_scale[j] = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
    }
    let mut sorted = targets.to_vec();
    sorted.sort_by(f64::total_cmp);
    if let Some(out) = model.net.layers.last_mut() {
        out.weight.as_mut_slice().fill(0.0);
        out.bias[0] = empirical_quantile(&sorted, model.lower_level);
        out.bias[1] = empirical_quantile(&sorted, model.upper_level);
    }

    let xs = model.standardize(embeddings)?;
    let mut rng = derived_rng(seed, "quantile-batches", 0);
    let mut opt = Momentum::new(config.learning_rate, config.momentum);
    let mut order: Vec<usize> = (0..targets.len()).collect();
    let mut batch_t = Vec::with_capacity(config.batch_size);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let bx = xs.select_rows(chunk);
            batch_t.clear();
            batch_t.extend(chunk.iter().map(|&i| targets[i]));
            let (grads, _) = model.gradient_standardized(&bx, &batch_t);
            opt.step(model.net.tensors_mut(), grads.tensors());
        }
    }
    if !model.net.is_finite() {
        return Err(invalid("quantile regression diverged"));
    }
    Ok(model)
}

/// Convenience wrapper over a list of [`EdgeEmbedding`]s.
pub fn fit_on_embeddings(
    embeddings: &[EdgeEmbedding],
    targets: &[f64],
    alpha: f64,
    config: &QuantileConfig,
    seed: u64,
) -> Result<QuantileModel> {
    let dim = embeddings.first().map_or(0, EdgeEmbedding::dim);
    let mut data = Vec::with_capacity(embeddings.len() * dim);
    for z in embeddings {
        if z.dim() != dim {
            return Err(ClpError::Dimension {
                expected: dim,
                actual: z.dim(),
            });
        }
        data.extend_from_slice(z.as_slice());
    }
    fit_quantile_functions(&Matrix::from_vec(embeddings.len(), dim, data), targets, alpha, config, seed)
}

/// Finite-difference check of the summed pinball-loss gradient.
pub fn gradient_check(
    model: &QuantileModel,
    x: &Matrix,
    targets: &[f64],
    step: f64,
    coordinates: usize,
    seed: u64,
) -> Result<GradCheck> {
    let (_, analytic) = model.loss_and_gradient(x, targets)?;
    let cell = RefCell::new(model.clone());
    let mut rng = rng_from_seed(seed);
    nn::finite_difference_check(
        &analytic,
        coordinates,
        step,
        &mut rng,
        |t, i| cell.borrow().net.tensors()[t][i],
        |t, i, v| cell.borrow_mut().net.tensors_mut()[t][i] = v,
        || cell.borrow().loss(x, targets).unwrap_or(f64::NAN),
    )
}
