//! Discrete power-law fitting over degree sequences.
//!
//! The model is `Pr(d) = d^-beta / zeta(beta, d_min)` for `d >= d_min`. The
//! exponent is estimated with the continuous-approximation MLE
//! `1 + n / sum(ln(d_i / (d_min - 1/2)))` over the tail, and `d_min` is the
//! observed degree that minimizes the Kolmogorov-Smirnov distance between
//! the tail's empirical CDF and the fitted model CDF.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, ClpError, Result};
use crate::graph::DegreeSequence;

/// Candidate `d_min` values need at least this many tail observations.
pub const MIN_TAIL_SIZE: usize = 10;

const DIRECT_TERMS: usize = 20;

// B_2, B_4, ..., B_16
const BERNOULLI: [f64; 8] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
];

/// Hurwitz zeta `sum_{i>=0} (i + a)^-beta` for integer `a >= 1`.
///
/// The first terms are summed directly; the remainder is the integral
/// `(a+N)^(1-beta) / (beta-1)` plus Euler-Maclaurin boundary corrections,
/// which keeps the absolute error near machine precision for `beta > 1`.
pub fn hurwitz_zeta(beta: f64, a: usize) -> Result<f64> {
    if beta.is_nan() || beta <= 1.0 {
        return Err(ClpError::Divergence(beta));
    }
    if a == 0 {
        return Err(invalid("hurwitz zeta offset must be >= 1"));
    }
    let a = a as f64;
    let mut sum = 0.0;
    for k in 0..DIRECT_TERMS {
        sum += (a + k as f64).powf(-beta);
    }
    let x = a + DIRECT_TERMS as f64;
    let x_pow = x.powf(-beta);
    sum += x * x_pow / (beta - 1.0) + 0.5 * x_pow;

    // Term j carries B_2j / (2j)! * beta (beta+1) ... (beta+2j-2) * x^(-beta-2j+1).
    let mut rising = beta;
    let mut factorial = 2.0;
    let mut x_term = x_pow / x;
    for (j, b) in BERNOULLI.iter().enumerate() {
        let term = b / factorial * rising * x_term;
        sum += term;
        if term.abs() < 1e-17 * sum {
            break;
        }
        let k = 2.0 * (j as f64 + 1.0);
        rising *= (beta + k - 1.0) * (beta + k);
        factorial *= (k + 1.0) * (k + 2.0);
        x_term /= x * x;
    }
    Ok(sum)
}

/// Probability of degree `d` under the power law above `d_min`.
pub fn powerlaw_pmf(d: usize, beta: f64, d_min: usize) -> Result<f64> {
    if d < d_min {
        return Err(ClpError::Domain { degree: d, d_min });
    }
    Ok((d as f64).powf(-beta) / hurwitz_zeta(beta, d_min)?)
}

/// `Pr(D <= d)` for the power law above `d_min`.
pub fn powerlaw_cdf(d: usize, beta: f64, d_min: usize) -> Result<f64> {
    if d < d_min {
        return Ok(0.0);
    }
    let tail = hurwitz_zeta(beta, d + 1)? / hurwitz_zeta(beta, d_min)?;
    Ok((1.0 - tail).clamp(0.0, 1.0))
}

/// Inverse-CDF sampler for the power law truncated to `[d_min, d_max]`.
#[derive(Debug, Clone)]
pub struct DiscretePowerLaw {
    d_min: usize,
    cumulative: Vec<f64>,
}

impl DiscretePowerLaw {
    pub fn new(beta: f64, d_min: usize, d_max: usize) -> Result<Self> {
        if beta.is_nan() || beta <= 1.0 {
            return Err(ClpError::Divergence(beta));
        }
        if d_min == 0 || d_max < d_min {
            return Err(invalid(format!("bad support [{d_min}, {d_max}]")));
        }
        let mut acc = 0.0;
        let cumulative = (d_min..=d_max)
            .map(|d| {
                acc += (d as f64).powf(-beta);
                acc
            })
            .collect();
        Ok(Self { d_min, cumulative })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().expect("non-empty support");
        let u: f64 = rng.gen::<f64>() * total;
        let idx = self.cumulative.partition_point(|&c| c < u);
        self.d_min + idx.min(self.cumulative.len() - 1)
    }
}

fn tail_of(degrees: &DegreeSequence, d_min: usize) -> Vec<usize> {
    let mut tail: Vec<usize> = degrees
        .as_slice()
        .iter()
        .copied()
        .filter(|&d| d >= d_min && d > 0)
        .collect();
    tail.sort_unstable();
    tail
}

/// Continuous-approximation MLE of the exponent over degrees `>= d_min`.
pub fn estimate_beta(degrees: &DegreeSequence, d_min: usize) -> Result<f64> {
    if d_min == 0 {
        return Err(invalid("d_min must be >= 1"));
    }
    let tail = tail_of(degrees, d_min);
    beta_from_sorted_tail(&tail, d_min)
}

fn beta_from_sorted_tail(tail: &[usize], d_min: usize) -> Result<f64> {
    if tail.is_empty() {
        return Err(invalid(format!("no degrees at or above d_min = {d_min}")));
    }
    let shift = d_min as f64 - 0.5;
    let log_sum: f64 = tail.iter().map(|&d| (d as f64 / shift).ln()).sum();
    Ok(1.0 + tail.len() as f64 / log_sum)
}

/// Largest gap between the empirical CDF of `sorted_tail` and `model_cdf`,
/// checked at every distinct observed value.
pub fn ks_against(sorted_tail: &[usize], mut model_cdf: impl FnMut(usize) -> f64) -> f64 {
    let n = sorted_tail.len() as f64;
    let mut ks = 0.0f64;
    let mut i = 0;
    while i < sorted_tail.len() {
        let d = sorted_tail[i];
        while i < sorted_tail.len() && sorted_tail[i] == d {
            i += 1;
        }
        let empirical = i as f64 / n;
        ks = ks.max((empirical - model_cdf(d)).abs());
    }
    ks.clamp(0.0, 1.0)
}

/// KS distance between the tail (degrees `>= d_min`) and the power law.
pub fn ks_statistic(degrees: &DegreeSequence, beta: f64, d_min: usize) -> Result<f64> {
    let tail = tail_of(degrees, d_min);
    ks_from_sorted_tail(&tail, beta, d_min)
}

fn ks_from_sorted_tail(tail: &[usize], beta: f64, d_min: usize) -> Result<f64> {
    if tail.is_empty() {
        return Err(invalid(format!("no degrees at or above d_min = {d_min}")));
    }
    let norm = hurwitz_zeta(beta, d_min)?;
    let mut err = None;
    let ks = ks_against(tail, |d| match hurwitz_zeta(beta, d + 1) {
        Ok(z) => (1.0 - z / norm).clamp(0.0, 1.0),
        Err(e) => {
            err = Some(e);
            0.0
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(ks),
    }
}

/// Best-fitting discrete power law for a degree sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub beta_hat: f64,
    pub d_min: usize,
    pub ks: f64,
    pub tail_size: usize,
}

/// Scans candidate `d_min` values and keeps the one with the smallest KS
/// distance (ties go to the smaller `d_min`). Zero degrees are ignored.
pub fn fit_power_law(degrees: &DegreeSequence) -> Result<PowerLawFit> {
    let mut sorted: Vec<usize> = degrees.as_slice().iter().copied().filter(|&d| d > 0).collect();
    if sorted.is_empty() {
        return Err(invalid("cannot fit a power law without positive degrees"));
    }
    sorted.sort_unstable();

    let mut candidates: Vec<usize> = Vec::new();
    for (i, &d) in sorted.iter().enumerate() {
        if i > 0 && sorted[i - 1] == d {
            continue;
        }
        if sorted.len() - i >= MIN_TAIL_SIZE {
            candidates.push(d);
        }
    }
    if candidates.is_empty() {
        candidates.push(sorted[0]);
    }

    let mut best: Option<PowerLawFit> = None;
    for d_min in candidates {
        let start = sorted.partition_point(|&d| d < d_min);
        let tail = &sorted[start..];
        let beta_hat = beta_from_sorted_tail(tail, d_min)?;
        let ks = ks_from_sorted_tail(tail, beta_hat, d_min)?;
        let fit = PowerLawFit {
            beta_hat,
            d_min,
            ks,
            tail_size: tail.len(),
        };
        if best.map_or(true, |b| fit.ks < b.ks) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one candidate"))
}
