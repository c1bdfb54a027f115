//! Degree-guided edge sampling.
//!
//! The degree sequence of the training graph is compared against an ideal
//! sequence drawn from a Pareto law with the fitted exponent. The gap
//! between the two empirical CDFs at each endpoint degree sets the
//! probability that a labeled edge survives.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, ClpError, Result};
use crate::graph::{degree_sequence, DegreeSequence, Graph, LabeledEdge};
use crate::powerlaw::{fit_power_law, PowerLawFit};
use crate::rng::{derive_seed, rng_from_seed};

/// `x_m (1 - u)^(-1/beta)`: the Pareto inverse CDF.
pub fn pareto_inverse_cdf(x_m: f64, beta: f64, u: f64) -> f64 {
    x_m * (1.0 - u).powf(-1.0 / beta)
}

/// Continuous Pareto draws, before discretization.
pub fn pareto_draws(x_m: f64, beta: f64, count: usize, seed: u64) -> Result<Vec<f64>> {
    if !(x_m > 0.0 && beta > 0.0) {
        return Err(invalid(format!("pareto needs x_m > 0 and beta > 0, got {x_m}, {beta}")));
    }
    let mut rng = rng_from_seed(seed);
    Ok((0..count)
        .map(|_| pareto_inverse_cdf(x_m, beta, rng.gen::<f64>()))
        .collect())
}

/// Ideal degree sequence: Pareto draws rounded to the nearest integer, at least 1.
pub fn pareto_sequence(x_m: f64, beta: f64, count: usize, seed: u64) -> Result<DegreeSequence> {
    if count == 0 {
        return Err(invalid("ideal sequence must have at least one entry"));
    }
    let draws = pareto_draws(x_m, beta, count, seed)?;
    Ok(DegreeSequence::new(
        draws
            .into_iter()
            .map(|x| {
                let r = x.round();
                if r >= usize::MAX as f64 {
                    usize::MAX
                } else {
                    (r as usize).max(1)
                }
            })
            .collect(),
    ))
}

/// Empirical CDF of a degree sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Ecdf {
    sorted: Vec<usize>,
}

impl Ecdf {
    pub fn new(degrees: &DegreeSequence) -> Result<Self> {
        if degrees.is_empty() {
            return Err(invalid("empirical CDF of an empty sequence"));
        }
        let mut sorted = degrees.as_slice().to_vec();
        sorted.sort_unstable();
        Ok(Self { sorted })
    }

    /// Fraction of the sequence `<= d`.
    pub fn eval(&self, d: usize) -> f64 {
        self.sorted.partition_point(|&x| x <= d) as f64 / self.sorted.len() as f64
    }

    pub fn max(&self) -> usize {
        *self.sorted.last().expect("non-empty")
    }

    pub fn min(&self) -> usize {
        self.sorted[0]
    }
}

pub fn ecdf(degrees: &DegreeSequence) -> Result<Ecdf> {
    Ecdf::new(degrees)
}

/// `|eCDF_orig(d) - eCDF_ideal(d)|`
pub fn deviation(d: usize, original: &Ecdf, ideal: &Ecdf) -> f64 {
    signed_deviation(d, original, ideal).abs()
}

/// `eCDF_orig(d) - eCDF_ideal(d)`
pub fn signed_deviation(d: usize, original: &Ecdf, ideal: &Ecdf) -> f64 {
    original.eval(d) - ideal.eval(d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeviationAggregate {
    Sum,
    Max,
}

impl DeviationAggregate {
    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            Self::Sum => a + b,
            Self::Max => a.max(b),
        }
    }
}

impl FromStr for DeviationAggregate {
    type Err = ClpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(Self::Sum),
            "max" => Ok(Self::Max),
            other => Err(invalid(format!("unknown sampler aggregate {other:?}"))),
        }
    }
}

impl fmt::Display for DeviationAggregate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Sum => "sum",
            Self::Max => "max",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerMode {
    /// Keep with probability `min(lambda * S(dvia_u, dvia_v), 1)`.
    Literal,
    /// Remove with probability `min(lambda * S(o_u, o_v), 1)` where
    /// `o(d) = max(0, eCDF_ideal(d) - eCDF_orig(d))`.
    Directional,
}

impl FromStr for SamplerMode {
    type Err = ClpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(Self::Literal),
            "directional" => Ok(Self::Directional),
            other => Err(invalid(format!("unknown sampler mode {other:?}"))),
        }
    }
}

impl fmt::Display for SamplerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Literal => "literal",
            Self::Directional => "directional",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub lambda: f64,
    pub aggregation: DeviationAggregate,
    pub mode: SamplerMode,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            lambda: 3.0,
            aggregation: DeviationAggregate::Sum,
            mode: SamplerMode::Directional,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(invalid(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        Ok(())
    }
}

/// The two eCDFs an edge's keep probability is computed from.
#[derive(Debug, Clone)]
pub struct EcdfPair {
    pub original: Ecdf,
    pub ideal: Ecdf,
}

pub fn edge_keep_probability(d_u: usize, d_v: usize, cfg: &SamplerConfig, ecdfs: &EcdfPair) -> f64 {
    let (o, i) = (&ecdfs.original, &ecdfs.ideal);
    match cfg.mode {
        SamplerMode::Literal => {
            let s = cfg.aggregation.apply(deviation(d_u, o, i), deviation(d_v, o, i));
            (cfg.lambda * s).min(1.0)
        }
        SamplerMode::Directional => {
            let over = |d| (-signed_deviation(d, o, i)).max(0.0);
            let s = cfg.aggregation.apply(over(d_u), over(d_v));
            1.0 - (cfg.lambda * s).min(1.0)
        }
    }
}

/// Degrees of the source graph together with its fitted and ideal eCDFs.
#[derive(Debug, Clone)]
pub struct DegreeGuide {
    pub degrees: Vec<usize>,
    pub fit: PowerLawFit,
    pub ecdfs: EcdfPair,
}

impl DegreeGuide {
    /// Fits the power law to the non-isolated degrees of `source` and draws
    /// an ideal sequence of the same length with `x_m = d_min`.
    pub fn from_graph(source: &Graph, seed: u64) -> Result<Self> {
        let observed = degree_sequence(source, true);
        let fit = fit_power_law(&observed)?;
        let ideal = pareto_sequence(fit.d_min as f64, fit.beta_hat, observed.len(), seed)?;
        Ok(Self {
            degrees: source.degrees(),
            fit,
            ecdfs: EcdfPair {
                original: Ecdf::new(&observed)?,
                ideal: Ecdf::new(&ideal)?,
            },
        })
    }

    pub fn keep_probability(&self, edge: &LabeledEdge, cfg: &SamplerConfig) -> f64 {
        edge_keep_probability(self.degrees[edge.u], self.degrees[edge.v], cfg, &self.ecdfs)
    }

    /// Expected number of survivors among `edges`.
    pub fn expected_retained(&self, edges: &[LabeledEdge], cfg: &SamplerConfig) -> f64 {
        edges.iter().map(|e| self.keep_probability(e, cfg)).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledSets {
    pub train: Vec<LabeledEdge>,
    pub val: Vec<LabeledEdge>,
    pub calib: Vec<LabeledEdge>,
}

/// Uniform draw for edge `index` of subset `stream`, independent of the
/// order in which edges are visited.
fn edge_uniform(seed: u64, stream: u64, index: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos(2 * index as u128);
    rng.gen::<f64>()
}

fn thin(edges: &[LabeledEdge], guide: &DegreeGuide, cfg: &SamplerConfig, stream: u64) -> Vec<LabeledEdge> {
    let kept: Vec<LabeledEdge> = edges
        .iter()
        .enumerate()
        .filter(|(i, e)| edge_uniform(cfg.seed, stream, *i) <= guide.keep_probability(e, cfg))
        .map(|(_, e)| *e)
        .collect();
    rebalance(kept, derive_seed(cfg.seed, "rebalance", stream))
}

/// Uniformly drops surplus edges of the majority label.
fn rebalance(edges: Vec<LabeledEdge>, seed: u64) -> Vec<LabeledEdge> {
    let (pos, neg): (Vec<LabeledEdge>, Vec<LabeledEdge>) = edges.into_iter().partition(|e| e.label);
    let target = pos.len().min(neg.len());
    let mut rng = rng_from_seed(seed);
    let mut pick = |mut v: Vec<LabeledEdge>| {
        if v.len() > target {
            let mut keep = index::sample(&mut rng, v.len(), target).into_vec();
            keep.sort_unstable();
            v = keep.into_iter().map(|i| v[i]).collect();
        }
        v
    };
    let mut out = pick(pos);
    out.extend(pick(neg));
    out
}

/// Thins train, val and calib by their keep probabilities under the degrees
/// of `degree_source`. Each subset is rebalanced to equal class counts.
pub fn sample_edges(
    train: &[LabeledEdge],
    val: &[LabeledEdge],
    calib: &[LabeledEdge],
    degree_source: &Graph,
    cfg: &SamplerConfig,
) -> Result<SampledSets> {
    cfg.validate()?;
    let guide = DegreeGuide::from_graph(degree_source, derive_seed(cfg.seed, "ideal", 0))?;
    sample_with_guide(train, val, calib, &guide, cfg)
}

pub fn sample_with_guide(
    train: &[LabeledEdge],
    val: &[LabeledEdge],
    calib: &[LabeledEdge],
    guide: &DegreeGuide,
    cfg: &SamplerConfig,
) -> Result<SampledSets> {
    cfg.validate()?;
    let out = SampledSets {
        train: thin(train, guide, cfg, 0),
        val: thin(val, guide, cfg, 1),
        calib: thin(calib, guide, cfg, 2),
    };
    if out.calib.is_empty() {
        return Err(ClpError::DegenerateCalibration);
    }
    Ok(out)
}
