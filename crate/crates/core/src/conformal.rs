//! Split-conformal calibration of quantile bands (CQR).
//!
//! Scores are `max(lo - y, y - hi)`. The calibrated threshold is the
//! `ceil((K + 1)(1 - alpha))`-th smallest of the `K` calibration scores, and
//! each test band `[lo, hi]` widens to `[lo - q, hi + q]`. Under
//! exchangeability of calibration and test scores the band covers a fresh
//! label with probability at least `1 - alpha`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, ClpError, Result};
use crate::linalg::Matrix;
use crate::quantile::QuantileModel;

/// Non-conformity of label `y` against the band `[lower, upper]`. Negative
/// exactly when `y` lies strictly inside.
pub fn nonconformity(lower: f64, upper: f64, y: f64) -> Result<f64> {
    if lower > upper {
        return Err(invalid(format!("band [{lower}, {upper}] is inverted")));
    }
    Ok((lower - y).max(y - upper))
}

/// 1-based rank of the calibration score used as the threshold.
pub fn conformal_rank(k: usize, alpha: f64) -> usize {
    let raw = (k as f64 + 1.0) * (1.0 - alpha);
    // Absorb representation error so that exact integers do not round up.
    (raw - 1e-9).ceil().max(1.0) as usize
}

/// The `ceil((K+1)(1-alpha))`-th smallest score, or `+inf` past the end.
pub fn conformal_quantile(scores: &[f64], alpha: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(invalid("conformal quantile needs at least one score"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(invalid("scores must not be NaN"));
    }
    let rank = conformal_rank(scores.len(), alpha);
    if rank > scores.len() {
        return Ok(f64::INFINITY);
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[rank - 1])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionInterval {
    pub lower: f64,
    pub upper: f64,
}

impl PredictionInterval {
    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }

    /// Closed-interval membership.
    pub fn contains(&self, y: f64) -> bool {
        self.lower <= y && y <= self.upper
    }
}

/// `[lower - q_hat, upper + q_hat]`. A negative `q_hat` that would invert
/// the band collapses it to the midpoint.
pub fn prediction_interval(lower: f64, upper: f64, q_hat: f64) -> PredictionInterval {
    if q_hat == f64::INFINITY {
        return PredictionInterval {
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
        };
    }
    let lo = lower - q_hat;
    let hi = upper + q_hat;
    if lo > hi {
        let mid = 0.5 * (lower + upper);
        PredictionInterval { lower: mid, upper: mid }
    } else {
        PredictionInterval { lower: lo, upper: hi }
    }
}

/// Coverage and efficiency of a set of intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub coverage: f64,
    pub avg_length: f64,
    pub covered: usize,
    pub size: usize,
}

pub fn evaluate(intervals: &[PredictionInterval], labels: &[f64]) -> Result<Evaluation> {
    if intervals.len() != labels.len() {
        return Err(ClpError::Dimension {
            expected: intervals.len(),
            actual: labels.len(),
        });
    }
    if intervals.is_empty() {
        return Err(invalid("cannot evaluate an empty test set"));
    }
    let covered = intervals
        .iter()
        .zip(labels)
        .filter(|(iv, &y)| iv.contains(y))
        .count();
    let n = intervals.len() as f64;
    let total_length: f64 = intervals.iter().map(PredictionInterval::length).sum();
    Ok(Evaluation {
        coverage: covered as f64 / n,
        avg_length: total_length / n,
        covered,
        size: intervals.len(),
    })
}

/// Summary of one conformal run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConformalReport {
    pub empirical_coverage: f64,
    pub avg_interval_length: f64,
    pub q_hat: f64,
    pub alpha: f64,
    pub calib_size: usize,
    pub test_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conformalized {
    pub calib_scores: Vec<f64>,
    pub q_hat: f64,
    pub intervals: Vec<PredictionInterval>,
}

/// Scores `calib`, derives `q_hat` and builds one interval per test row.
pub fn conformalize(
    qmodel: &QuantileModel,
    calib_x: &Matrix,
    calib_y: &[f64],
    test_x: &Matrix,
    alpha: f64,
) -> Result<Conformalized> {
    if calib_x.rows() != calib_y.len() {
        return Err(ClpError::Dimension {
            expected: calib_x.rows(),
            actual: calib_y.len(),
        });
    }
    let bands = qmodel.predict_batch(calib_x)?;
    let calib_scores = bands
        .iter()
        .zip(calib_y)
        .map(|(&(lo, hi), &y)| nonconformity(lo, hi, y))
        .collect::<Result<Vec<f64>>>()?;
    let q_hat = conformal_quantile(&calib_scores, alpha)?;
    let intervals = qmodel
        .predict_batch(test_x)?
        .into_iter()
        .map(|(lo, hi)| prediction_interval(lo, hi, q_hat))
        .collect();
    Ok(Conformalized {
        calib_scores,
        q_hat,
        intervals,
    })
}

/// Conformalizes and evaluates against `test_y` in one step.
pub fn conformal_report(
    qmodel: &QuantileModel,
    calib_x: &Matrix,
    calib_y: &[f64],
    test_x: &Matrix,
    test_y: &[f64],
    alpha: f64,
) -> Result<(ConformalReport, Conformalized)> {
    let out = conformalize(qmodel, calib_x, calib_y, test_x, alpha)?;
    let eval = evaluate(&out.intervals, test_y)?;
    let report = ConformalReport {
        empirical_coverage: eval.coverage,
        avg_interval_length: eval.avg_length,
        q_hat: out.q_hat,
        alpha,
        calib_size: calib_y.len(),
        test_size: test_y.len(),
    };
    Ok((report, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn score_cases() {
        assert_eq!(nonconformity(0.0, 1.0, 0.5).unwrap(), -0.5);
        assert_eq!(nonconformity(0.2, 0.8, 0.8).unwrap(), 0.0);
        assert_abs_diff_eq!(nonconformity(0.2, 0.8, 0.9).unwrap(), 0.1, epsilon = 1e-15);
        assert!(nonconformity(0.8, 0.2, 0.5).is_err());
    }

    #[test]
    fn quantile_cases() {
        let scores: Vec<f64> = (1..=9).map(f64::from).collect();
        assert_eq!(conformal_quantile(&scores, 0.1).unwrap(), 9.0);
        assert_eq!(conformal_quantile(&[3.5], 0.5).unwrap(), 3.5);
        assert_eq!(conformal_quantile(&[1.0, 2.0, 3.0, 4.0], 0.1).unwrap(), f64::INFINITY);
        assert!(conformal_quantile(&[], 0.1).is_err());
        assert!(conformal_quantile(&[1.0], 0.0).is_err());
    }

    #[test]
    fn interval_cases() {
        let iv = prediction_interval(0.2, 0.8, 0.05);
        assert_abs_diff_eq!(iv.lower, 0.15, epsilon = 1e-15);
        assert_abs_diff_eq!(iv.upper, 0.85, epsilon = 1e-15);
        assert_eq!(
            prediction_interval(0.2, 0.8, 0.0),
            PredictionInterval { lower: 0.2, upper: 0.8 }
        );
        assert_eq!(
            prediction_interval(0.4, 0.6, -0.2),
            PredictionInterval { lower: 0.5, upper: 0.5 }
        );
        let inf = prediction_interval(0.4, 0.6, f64::INFINITY);
        assert!(inf.contains(1e300) && inf.length().is_infinite());
    }

    #[test]
    fn evaluation_cases() {
        let unit = vec![PredictionInterval { lower: 0.0, upper: 1.0 }; 4];
        let e = evaluate(&unit, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!((e.coverage, e.avg_length), (1.0, 1.0));

        let mixed = [
            PredictionInterval { lower: 0.5, upper: 0.5 },
            PredictionInterval { lower: -0.1, upper: 0.3 },
        ];
        let e = evaluate(&mixed, &[1.0, 0.0]).unwrap();
        assert_eq!(e.coverage, 0.5);
        assert_abs_diff_eq!(e.avg_length, 0.2, epsilon = 1e-15);
        assert!(evaluate(&mixed, &[1.0]).is_err());
        assert!(evaluate(&[], &[]).is_err());

        let inf = [prediction_interval(0.0, 1.0, f64::INFINITY)];
        assert!(evaluate(&inf, &[0.0]).unwrap().avg_length.is_infinite());
    }

    proptest! {
        #[test]
        fn quantile_is_monotone_in_alpha(
            scores in prop::collection::vec(-5.0f64..5.0, 1..60),
            a in 0.01f64..0.99,
            b in 0.01f64..0.99,
        ) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(conformal_quantile(&scores, hi).unwrap() <= conformal_quantile(&scores, lo).unwrap());
        }

        #[test]
        fn infinite_score_never_lowers_threshold(
            scores in prop::collection::vec(-5.0f64..5.0, 1..60),
            alpha in 0.01f64..0.99,
        ) {
            let mut more = scores.clone();
            more.push(f64::INFINITY);
            prop_assert!(conformal_quantile(&more, alpha).unwrap() >= conformal_quantile(&scores, alpha).unwrap());
        }

        #[test]
        fn coverage_ignores_pair_order(
            pairs in prop::collection::vec((-1.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0), 1..40),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            let ivs: Vec<_> = pairs.iter().map(|&(lo, w, _)| PredictionInterval { lower: lo, upper: lo + w }).collect();
            let ys: Vec<f64> = pairs.iter().map(|p| p.2).collect();
            let mut idx: Vec<usize> = (0..ivs.len()).collect();
            idx.shuffle(&mut crate::rng::rng_from_seed(seed));
            let ivs2: Vec<_> = idx.iter().map(|&i| ivs[i]).collect();
            let ys2: Vec<_> = idx.iter().map(|&i| ys[i]).collect();
            prop_assert_eq!(evaluate(&ivs, &ys).unwrap().covered, evaluate(&ivs2, &ys2).unwrap().covered);
        }

        #[test]
        fn intervals_are_ordered(lo in -2.0f64..2.0, w in 0.0f64..2.0, q in -3.0f64..3.0) {
            let iv = prediction_interval(lo, lo + w, q);
            prop_assert!(iv.lower <= iv.upper);
        }
    }
}
