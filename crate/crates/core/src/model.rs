//! Base link predictor: a message-passing node encoder `f`, the Hadamard
//! edge combiner `g` and a one-hidden-layer sigmoid scorer `h`, trained with
//! binary cross-entropy and momentum SGD.

use std::cell::RefCell;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, ClpError, Result};
use crate::graph::{Graph, LabeledEdge};
use crate::linalg::{CsrMatrix, Matrix};
use crate::nn::{self, GradCheck, Mlp, Momentum};
use crate::rng::{derived_rng, rng_from_seed};

/// Neighborhood aggregation used by every encoder layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    /// `D^-1/2 (A + I) D^-1/2`
    GcnNormalized,
    /// `D^-1 (A + I)`
    MeanNeighbor,
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregation::GcnNormalized => "gcn",
            Aggregation::MeanNeighbor => "mean",
        })
    }
}

impl FromStr for Aggregation {
    type Err = ClpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gcn" | "gcn-normalized" => Ok(Self::GcnNormalized),
            "mean" | "mean-neighbor" | "sage" => Ok(Self::MeanNeighbor),
            other => Err(invalid(format!("unknown aggregation {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub layers: usize,
    pub hidden_dim: usize,
    pub scorer_hidden: usize,
    pub aggregation: Aggregation,
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
}

impl Default for ModelConfig {
    /// Small social-graph settings: 500 epochs, lr 1e-2, batch 2048,
    /// hidden 128, three layers.
    fn default() -> Self {
        Self {
            layers: 3,
            hidden_dim: 128,
            scorer_hidden: 128,
            aggregation: Aggregation::GcnNormalized,
            epochs: 500,
            learning_rate: 1e-2,
            momentum: 0.9,
            batch_size: 2048,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.hidden_dim == 0 || self.scorer_hidden == 0 {
            return Err(invalid("layer count and widths must be positive"));
        }
        if self.batch_size == 0 {
            return Err(invalid("batch size must be positive"));
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

/// Propagation operator for `graph` under `aggregation`, self-loops included.
pub fn propagation_matrix(graph: &Graph, aggregation: Aggregation) -> CsrMatrix {
    let n = graph.num_nodes();
    let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (u, v) in graph.edges() {
        neighbors[u].push(v);
        neighbors[v].push(u);
    }
    let deg: Vec<f64> = neighbors.iter().map(|nb| nb.len() as f64 + 1.0).collect();
    let rows = (0..n)
        .map(|i| {
            let weight = |j: usize| match aggregation {
                Aggregation::GcnNormalized => 1.0 / (deg[i] * deg[j]).sqrt(),
                Aggregation::MeanNeighbor => 1.0 / deg[i],
            };
            std::iter::once(i)
                .chain(neighbors[i].iter().copied())
                .map(|j| (j, weight(j)))
                .collect()
        })
        .collect();
    CsrMatrix::from_rows(rows)
}

/// A graph with its features and propagation operator ready for encoding.
#[derive(Debug, Clone)]
pub struct PreparedGraph {
    propagation: CsrMatrix,
    features: Matrix,
}

impl PreparedGraph {
    pub fn new(graph: &Graph, aggregation: Aggregation) -> Result<Self> {
        let features = graph
            .features()
            .ok_or_else(|| invalid("graph has no node features"))?
            .clone();
        Ok(Self {
            propagation: propagation_matrix(graph, aggregation),
            features,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.features.rows()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }
}

/// `g(h_u, h_v)`: elementwise product, symmetric in its arguments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeEmbedding(pub Vec<f64>);

impl EdgeEmbedding {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

pub fn edge_embedding(h_u: &[f64], h_v: &[f64]) -> Result<EdgeEmbedding> {
    if h_u.len() != h_v.len() {
        return Err(ClpError::Dimension {
            expected: h_u.len(),
            actual: h_v.len(),
        });
    }
    Ok(EdgeEmbedding(
        h_u.iter().zip(h_v).map(|(a, b)| a * b).collect(),
    ))
}

/// Stacks the embeddings of `edges` as rows, given node embeddings `h`.
pub fn edge_embedding_matrix(h: &Matrix, edges: &[LabeledEdge]) -> Matrix {
    let dim = h.cols();
    let mut data = Vec::with_capacity(edges.len() * dim);
    for e in edges {
        data.extend(h.row(e.u).iter().zip(h.row(e.v)).map(|(a, b)| a * b));
    }
    Matrix::from_vec(edges.len(), dim, data)
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy on a logit, computed without overflow.
pub fn bce_with_logit(logit: f64, target: f64) -> f64 {
    logit.max(0.0) - logit * target + (-logit.abs()).exp().ln_1p()
}

/// Weights of the encoder and scorer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub aggregation: Aggregation,
    /// `W^(l)`, each `in x out`.
    pub encoder: Vec<Matrix>,
    pub scorer: Mlp,
}

struct EncoderCache {
    propagated: Vec<Matrix>,
    pre_activations: Vec<Matrix>,
}

impl ModelParams {
    pub fn init(feature_dim: usize, config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = rng_from_seed(seed);
        let mut encoder = Vec::with_capacity(config.layers);
        let mut fan_in = feature_dim;
        for _ in 0..config.layers {
            encoder.push(nn::init_uniform(&mut rng, fan_in, fan_in, config.hidden_dim));
            fan_in = config.hidden_dim;
        }
        let scorer = Mlp::new(&[config.hidden_dim, config.scorer_hidden, 1], &mut rng);
        Ok(Self {
            aggregation: config.aggregation,
            encoder,
            scorer,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.encoder[0].rows()
    }

    pub fn embedding_dim(&self) -> usize {
        self.encoder.last().map_or(0, Matrix::cols)
    }

    pub fn is_finite(&self) -> bool {
        self.encoder.iter().all(Matrix::is_finite) && self.scorer.is_finite()
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = self.encoder.iter().map(Matrix::as_slice).collect();
        out.extend(self.scorer.tensors());
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = self.encoder.iter_mut().map(Matrix::as_mut_slice).collect();
        out.extend(self.scorer.tensors_mut());
        out
    }

    fn check_input(&self, graph: &PreparedGraph) -> Result<()> {
        if graph.feature_dim() != self.input_dim() {
            return Err(ClpError::Dimension {
                expected: self.input_dim(),
                actual: graph.feature_dim(),
            });
        }
        Ok(())
    }

    fn encode_cached(&self, graph: &PreparedGraph) -> (Matrix, EncoderCache) {
        let mut cache = EncoderCache {
            propagated: Vec::with_capacity(self.encoder.len()),
            pre_activations: Vec::with_capacity(self.encoder.len()),
        };
        let mut h = graph.features.clone();
        let last = self.encoder.len() - 1;
        for (l, w) in self.encoder.iter().enumerate() {
            let px = graph.propagation.apply(&h);
            let s = px.matmul(w);
            h = s.clone();
            if l < last {
                h.map_inplace(|v| v.max(0.0));
            }
            cache.propagated.push(px);
            cache.pre_activations.push(s);
        }
        (h, cache)
    }

    /// Node embedding matrix `H` (one row per node).
    pub fn encode_nodes(&self, graph: &PreparedGraph) -> Result<Matrix> {
        self.check_input(graph)?;
        Ok(self.encode_cached(graph).0)
    }

    pub fn edge_logit(&self, z: &EdgeEmbedding) -> Result<f64> {
        if z.dim() != self.embedding_dim() {
            return Err(ClpError::Dimension {
                expected: self.embedding_dim(),
                actual: z.dim(),
            });
        }
        let x = Matrix::from_vec(1, z.dim(), z.0.clone());
        Ok(self.scorer.predict(&x).get(0, 0))
    }

    /// `h(z)`: link probability in `(0, 1)`.
    pub fn edge_score(&self, z: &EdgeEmbedding) -> Result<f64> {
        self.edge_logit(z).map(sigmoid)
    }

    /// Mean BCE over `edges`.
    pub fn loss(&self, graph: &PreparedGraph, edges: &[LabeledEdge]) -> Result<f64> {
        self.check_input(graph)?;
        if edges.is_empty() {
            return Ok(0.0);
        }
        let h = self.encode_cached(graph).0;
        Ok(self.loss_from_embeddings(&h, edges))
    }

    fn loss_from_embeddings(&self, h: &Matrix, edges: &[LabeledEdge]) -> f64 {
        let z = edge_embedding_matrix(h, edges);
        let logits = self.scorer.predict(&z);
        let total: f64 = logits
            .as_slice()
            .iter()
            .zip(edges)
            .map(|(&x, e)| bce_with_logit(x, e.target()))
            .sum();
        total / edges.len() as f64
    }

    /// Mean BCE over `edges` and its gradient with respect to every tensor,
    /// in the same order as [`ModelParams::tensors`].
    pub fn loss_and_gradient(
        &self,
        graph: &PreparedGraph,
        edges: &[LabeledEdge],
    ) -> Result<(f64, Vec<Vec<f64>>)> {
        self.check_input(graph)?;
        if edges.is_empty() {
            return Err(invalid("cannot differentiate an empty batch"));
        }
        let (h, enc_cache) = self.encode_cached(graph);
        let z = edge_embedding_matrix(&h, edges);
        let (logits, mlp_cache) = self.scorer.forward(&z);
        let n = edges.len() as f64;
        let mut loss = 0.0;
        let mut d_logits = Matrix::zeros(edges.len(), 1);
        for (i, e) in edges.iter().enumerate() {
            let x = logits.get(i, 0);
            loss += bce_with_logit(x, e.target());
            d_logits.set(i, 0, (sigmoid(x) - e.target()) / n);
        }
        let (scorer_grads, dz) = self.scorer.backward(&mlp_cache, &d_logits);

        let mut g = Matrix::zeros(h.rows(), h.cols());
        for (i, e) in edges.iter().enumerate() {
            let dz_row = dz.row(i);
            let hv: Vec<f64> = h.row(e.v).to_vec();
            let hu: Vec<f64> = h.row(e.u).to_vec();
            for ((gu, d), b) in g.row_mut(e.u).iter_mut().zip(dz_row).zip(&hv) {
                *gu += d * b;
            }
            for ((gv, d), a) in g.row_mut(e.v).iter_mut().zip(dz_row).zip(&hu) {
                *gv += d * a;
            }
        }

        let layers = self.encoder.len();
        let mut enc_grads = vec![Matrix::zeros(0, 0); layers];
        for l in (0..layers).rev() {
            if l + 1 < layers {
                let s = &enc_cache.pre_activations[l];
                for (gv, sv) in g.as_mut_slice().iter_mut().zip(s.as_slice()) {
                    if *sv <= 0.0 {
                        *gv = 0.0;
                    }
                }
            }
            enc_grads[l] = enc_cache.propagated[l].t_matmul(&g);
            if l > 0 {
                let back = g.matmul_t(&self.encoder[l]);
                g = graph.propagation.apply_transpose(&back);
            }
        }

        let mut grads: Vec<Vec<f64>> = enc_grads.iter().map(|m| m.as_slice().to_vec()).collect();
        grads.extend(scorer_grads.tensors().iter().map(|t| t.to_vec()));
        Ok((loss / n, grads))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    /// Snapshot with the lowest validation loss.
    pub params: ModelParams,
    pub initial_train_loss: f64,
    pub best_epoch: Option<usize>,
    pub history: Vec<EpochStats>,
}

fn require_both_labels(edges: &[LabeledEdge]) -> Result<()> {
    let pos = edges.iter().filter(|e| e.label).count();
    if edges.is_empty() || pos == 0 || pos == edges.len() {
        return Err(invalid("training edges must contain both labels"));
    }
    Ok(())
}

/// Trains on `train`, keeping the parameters with the best validation loss
/// (training loss stands in when `val` is empty).
pub fn train_with_history(
    subgraph: &Graph,
    train: &[LabeledEdge],
    val: &[LabeledEdge],
    config: &ModelConfig,
    seed: u64,
) -> Result<TrainingOutcome> {
    config.validate()?;
    require_both_labels(train)?;
    let prepared = PreparedGraph::new(subgraph, config.aggregation)?;
    let mut params = ModelParams::init(prepared.feature_dim(), config, seed)?;
    let mut rng = derived_rng(seed, "batches", 0);
    let mut opt = Momentum::new(config.learning_rate, config.momentum);

    let eval = |p: &ModelParams| -> (f64, f64) {
        let h = p.encode_cached(&prepared).0;
        let tl = p.loss_from_embeddings(&h, train);
        let vl = if val.is_empty() {
            tl
        } else {
            p.loss_from_embeddings(&h, val)
        };
        (tl, vl)
    };

    let (initial_train_loss, initial_val) = eval(&params);
    let mut best = (initial_val, params.clone(), None);
    let mut history = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut batch = Vec::with_capacity(config.batch_size);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| train[i]));
            let (_, grads) = params.loss_and_gradient(&prepared, &batch)?;
            opt.step(params.tensors_mut(), grads.iter().map(Vec::as_slice).collect());
        }
        let (train_loss, val_loss) = eval(&params);
        history.push(EpochStats {
            train_loss,
            val_loss,
        });
        if val_loss < best.0 {
            best = (val_loss, params.clone(), Some(epoch));
        }
    }
    let (_, params, best_epoch) = best;
    if !params.is_finite() {
        return Err(invalid("training diverged to non-finite weights"));
    }
    Ok(TrainingOutcome {
        params,
        initial_train_loss,
        best_epoch,
        history,
    })
}

pub fn train_link_predictor(
    subgraph: &Graph,
    train: &[LabeledEdge],
    val: &[LabeledEdge],
    config: &ModelConfig,
    seed: u64,
) -> Result<ModelParams> {
    train_with_history(subgraph, train, val, config, seed).map(|o| o.params)
}

/// Max relative error between the analytic BCE gradient and central
/// differences over `coordinates` randomly chosen weights.
pub fn gradient_check(
    params: &ModelParams,
    graph: &PreparedGraph,
    batch: &[LabeledEdge],
    step: f64,
    coordinates: usize,
    seed: u64,
) -> Result<GradCheck> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(invalid(format!("finite-difference step must be positive, got {step}")));
    }
    let (_, analytic) = params.loss_and_gradient(graph, batch)?;
    let cell = RefCell::new(params.clone());
    let mut rng = rng_from_seed(seed);
    nn::finite_difference_check(
        &analytic,
        coordinates,
        step,
        &mut rng,
        |t, i| cell.borrow().tensors()[t][i],
        |t, i, v| cell.borrow_mut().tensors_mut()[t][i] = v,
        || cell.borrow().loss(graph, batch).unwrap_or(f64::NAN),
    )
}

pub const PARAM_FORMAT: &str = "clp-params";
pub const PARAM_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Dump<T> {
    format: String,
    version: u32,
    kind: String,
    params: T,
}

/// Versioned JSON dump shared by the link predictor and the quantile model.
pub fn dump_params<T: Serialize>(kind: &str, params: &T) -> Result<String> {
    let dump = Dump {
        format: PARAM_FORMAT.to_string(),
        version: PARAM_VERSION,
        kind: kind.to_string(),
        params,
    };
    Ok(serde_json::to_string(&dump)?)
}

pub fn load_params<T: for<'de> Deserialize<'de>>(kind: &str, text: &str) -> Result<T> {
    let dump: Dump<T> = serde_json::from_str(text)?;
    if dump.format != PARAM_FORMAT || dump.version != PARAM_VERSION {
        return Err(invalid(format!(
            "unsupported parameter dump {} v{}",
            dump.format, dump.version
        )));
    }
    if dump.kind != kind {
        return Err(invalid(format!("expected {kind} parameters, found {}", dump.kind)));
    }
    Ok(dump.params)
}

pub fn save_params<T: Serialize>(kind: &str, params: &T, path: &Path) -> Result<()> {
    let text = dump_params(kind, params)?;
    std::fs::write(path, text).map_err(|source| ClpError::Io {
        path: path.to_path_buf(),
        source,
    })
}
