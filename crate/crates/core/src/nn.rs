//! Fully connected networks with hand-written backpropagation, plus the
//! momentum optimizer and the finite-difference checker shared by the link
//! scorer and the quantile regressor.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::Matrix;
use crate::rng::Rng;

/// Uniform `(-1/sqrt(fan_in), 1/sqrt(fan_in))` initialization.
pub fn init_uniform(rng: &mut Rng, fan_in: usize, rows: usize, cols: usize) -> Matrix {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.gen_range(-bound..bound))
        .collect();
    Matrix::from_vec(rows, cols, data)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// `in x out`
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

/// Dense layers with ReLU between them and a linear output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

pub struct MlpCache {
    inputs: Vec<Matrix>,
    pre_activations: Vec<Matrix>,
}

impl Mlp {
    /// `widths = [input, hidden..., output]`
    pub fn new(widths: &[usize], rng: &mut Rng) -> Self {
        assert!(widths.len() >= 2, "an mlp needs input and output widths");
        let layers = widths
            .windows(2)
            .map(|w| Dense {
                weight: init_uniform(rng, w[0], w[0], w[1]),
                bias: init_uniform(rng, w[0], 1, w[1]).as_slice().to_vec(),
            })
            .collect();
        Self { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.weight.cols())
    }

    pub fn forward(&self, x: &Matrix) -> (Matrix, MlpCache) {
        let mut cache = MlpCache {
            inputs: Vec::with_capacity(self.layers.len()),
            pre_activations: Vec::with_capacity(self.layers.len()),
        };
        let mut h = x.clone();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = h.matmul(&layer.weight);
            for r in 0..z.rows() {
                for (v, b) in z.row_mut(r).iter_mut().zip(&layer.bias) {
                    *v += b;
                }
            }
            cache.inputs.push(h);
            h = z.clone();
            if i < last {
                h.map_inplace(|v| v.max(0.0));
            }
            cache.pre_activations.push(z);
        }
        (h, cache)
    }

    pub fn predict(&self, x: &Matrix) -> Matrix {
        self.forward(x).0
    }

    /// Returns parameter gradients and the gradient with respect to the input.
    pub fn backward(&self, cache: &MlpCache, grad_out: &Matrix) -> (Mlp, Matrix) {
        let mut grads: Vec<Dense> = Vec::with_capacity(self.layers.len());
        let mut g = grad_out.clone();
        let last = self.layers.len() - 1;
        for i in (0..self.layers.len()).rev() {
            if i < last {
                let z = &cache.pre_activations[i];
                for (gv, zv) in g.as_mut_slice().iter_mut().zip(z.as_slice()) {
                    if *zv <= 0.0 {
                        *gv = 0.0;
                    }
                }
            }
            let weight = cache.inputs[i].t_matmul(&g);
            let mut bias = vec![0.0; g.cols()];
            for r in 0..g.rows() {
                for (b, v) in bias.iter_mut().zip(g.row(r)) {
                    *b += v;
                }
            }
            let next = g.matmul_t(&self.layers[i].weight);
            grads.push(Dense { weight, bias });
            g = next;
        }
        grads.reverse();
        (Mlp { layers: grads }, g)
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()])
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    pub fn zeroed(&self) -> Self {
        let mut out = self.clone();
        for t in out.tensors_mut() {
            t.fill(0.0);
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

/// Gradient descent with heavy-ball momentum over a list of tensors.
#[derive(Debug, Clone)]
pub struct Momentum {
    lr: f64,
    beta: f64,
    velocity: Vec<Vec<f64>>,
}

impl Momentum {
    pub fn new(lr: f64, beta: f64) -> Self {
        Self {
            lr,
            beta,
            velocity: Vec::new(),
        }
    }

    pub fn step(&mut self, params: Vec<&mut [f64]>, grads: Vec<&[f64]>) {
        assert_eq!(params.len(), grads.len());
        if self.velocity.is_empty() {
            self.velocity = grads.iter().map(|g| vec![0.0; g.len()]).collect();
        }
        for ((p, g), vel) in params.into_iter().zip(grads).zip(&mut self.velocity) {
            for ((pv, gv), vv) in p.iter_mut().zip(g).zip(vel.iter_mut()) {
                *vv = self.beta * *vv + gv;
                *pv -= self.lr * *vv;
            }
        }
    }
}

/// Gradients smaller than this are compared in absolute terms.
pub const ABS_FLOOR: f64 = 1e-5;

/// Result of comparing analytic and central-difference gradients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_relative_error: f64,
    pub coordinates: usize,
}

/// Compares `analytic` with central differences of `loss` on a random
/// subsample of `(tensor, index)` coordinates. `perturb` must set the
/// coordinate to the given value. Relative error uses an absolute floor so
/// that coordinates with near-zero gradients do not blow up.
pub fn finite_difference_check(
    analytic: &[Vec<f64>],
    coordinates: usize,
    step: f64,
    rng: &mut Rng,
    mut read: impl FnMut(usize, usize) -> f64,
    mut write: impl FnMut(usize, usize, f64),
    mut loss: impl FnMut() -> f64,
) -> Result<GradCheck> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(invalid(format!("finite-difference step must be positive, got {step}")));
    }
    let total: usize = analytic.iter().map(Vec::len).sum();
    if total == 0 {
        return Err(invalid("no parameters to check"));
    }
    let mut worst = 0.0f64;
    let count = coordinates.min(total);
    for flat in rand::seq::index::sample(rng, total, count) {
        let (mut t, mut i) = (0, flat);
        while i >= analytic[t].len() {
            i -= analytic[t].len();
            t += 1;
        }
        let original = read(t, i);
        write(t, i, original + step);
        let up = loss();
        write(t, i, original - step);
        let down = loss();
        write(t, i, original);
        let numeric = (up - down) / (2.0 * step);
        let exact = analytic[t][i];
        let denom = exact.abs().max(numeric.abs()).max(ABS_FLOOR);
        worst = worst.max((exact - numeric).abs() / denom);
    }
    Ok(GradCheck {
        max_relative_error: worst,
        coordinates: count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn sq_loss(net: &Mlp, x: &Matrix, y: &Matrix) -> f64 {
        let out = net.predict(x);
        out.as_slice()
            .iter()
            .zip(y.as_slice())
            .map(|(a, b)| 0.5 * (a - b) * (a - b))
            .sum()
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = rng_from_seed(3);
        let net = Mlp::new(&[4, 6, 5, 2], &mut rng);
        let x = init_uniform(&mut rng, 1, 7, 4);
        let y = init_uniform(&mut rng, 1, 7, 2);
        let (out, cache) = net.forward(&x);
        let mut diff = out.clone();
        for (d, t) in diff.as_mut_slice().iter_mut().zip(y.as_slice()) {
            *d -= t;
        }
        let (grads, _) = net.backward(&cache, &diff);
        let analytic: Vec<Vec<f64>> = grads.tensors().iter().map(|t| t.to_vec()).collect();

        let cell = std::cell::RefCell::new(net);
        let check = finite_difference_check(
            &analytic,
            60,
            1e-6,
            &mut rng,
            |t, i| cell.borrow().tensors()[t][i],
            |t, i, v| cell.borrow_mut().tensors_mut()[t][i] = v,
            || sq_loss(&cell.borrow(), &x, &y),
        )
        .unwrap();
        assert!(check.max_relative_error < 1e-5, "{check:?}");
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let mut rng = rng_from_seed(8);
        let net = Mlp::new(&[3, 4, 1], &mut rng);
        let x = init_uniform(&mut rng, 1, 2, 3);
        let (_, cache) = net.forward(&x);
        let ones = Matrix::from_vec(2, 1, vec![1.0, 1.0]);
        let (_, gx) = net.backward(&cache, &ones);
        let h = 1e-6;
        for k in 0..6 {
            let mut up = x.clone();
            up.as_mut_slice()[k] += h;
            let mut down = x.clone();
            down.as_mut_slice()[k] -= h;
            let sum = |m: &Matrix| net.predict(m).as_slice().iter().sum::<f64>();
            let numeric = (sum(&up) - sum(&down)) / (2.0 * h);
            assert!((numeric - gx.as_slice()[k]).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_lr_leaves_parameters() {
        let mut p = vec![1.0, 2.0];
        let mut opt = Momentum::new(0.0, 0.9);
        opt.step(vec![&mut p], vec![&[5.0, -3.0]]);
        assert_eq!(p, vec![1.0, 2.0]);
    }

    #[test]
    fn momentum_accumulates() {
        let mut p = vec![0.0];
        let mut opt = Momentum::new(0.1, 0.9);
        opt.step(vec![&mut p], vec![&[1.0]]);
        opt.step(vec![&mut p], vec![&[1.0]]);
        assert!((p[0] - (-0.1 - 0.19)).abs() < 1e-12);
    }

    #[test]
    fn step_must_be_positive() {
        let mut rng = rng_from_seed(0);
        let r = finite_difference_check(&[vec![0.0]], 1, 0.0, &mut rng, |_, _| 0.0, |_, _, _| {}, || 0.0);
        assert!(r.is_err());
    }
}
