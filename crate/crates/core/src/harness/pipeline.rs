//! End-to-end trials: split, train, optionally sample, fit quantiles,
//! calibrate, evaluate.

use log::{info, warn};

use super::config::{DataSource, RunConfig, SynthSpec};
use super::report::{fnv_digest, Arm, ExperimentReport, TrialRecord, TrialStatus};
use crate::conformal::{conformal_report, ConformalReport};
use crate::error::{invalid, ClpError, Result};
use crate::graph::{
    degree_sequence, generate_powerlaw_graph, inject_cliques, negative_sample, parse_features,
    split_edges, training_subgraph, EdgeSplit, Graph, LabeledEdge, NodePair,
};
use crate::linalg::Matrix;
use crate::model::{edge_embedding_matrix, train_link_predictor, PreparedGraph};
use crate::powerlaw::fit_power_law;
use crate::quantile::fit_quantile_functions;
use crate::rng::derive_seed;
use crate::sampler::{sample_with_guide, DegreeGuide, SamplerConfig};

/// A graph with features and a fixed pool of negative pairs, one per edge.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub graph: Graph,
    pub negatives: Vec<NodePair>,
}

impl Dataset {
    pub fn positives(&self) -> Vec<NodePair> {
        self.graph.edges().collect()
    }
}

/// Base power-law graph for `variant`, with `spec`'s cliques injected.
pub fn synthetic_graph(spec: &SynthSpec, seed: u64, variant: u64) -> Result<Graph> {
    let base = generate_powerlaw_graph(
        spec.nodes,
        spec.beta,
        spec.d_min,
        derive_seed(seed, "synth", variant),
    )?;
    if spec.clique_count == 0 || spec.clique_size < 2 {
        return Ok(base);
    }
    inject_cliques(
        &base,
        spec.clique_size,
        spec.clique_count,
        derive_seed(seed, "cliques", variant),
    )
}

fn read(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| ClpError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads or generates the graph, attaches features and draws negatives.
pub fn prepare_dataset(cfg: &RunConfig) -> Result<Dataset> {
    let graph = match &cfg.data {
        DataSource::Synthetic(spec) => synthetic_graph(spec, cfg.seed, 0)?,
        DataSource::EdgeList {
            edges,
            features,
            num_nodes,
        } => {
            let g = Graph::from_edge_list(&read(edges)?, *num_nodes)?;
            match features {
                Some(path) => {
                    let m = parse_features(&read(path)?, g.num_nodes())?;
                    g.with_features(m)?
                }
                None => g,
            }
        }
    };
    dataset_from_graph(graph, cfg.feature_dim, cfg.seed)
}

pub fn dataset_from_graph(graph: Graph, feature_dim: usize, seed: u64) -> Result<Dataset> {
    if graph.num_edges() == 0 {
        return Err(invalid("graph has no edges"));
    }
    let graph = graph.ensure_features(feature_dim, derive_seed(seed, "features", 0));
    let negatives = negative_sample(&graph, graph.num_edges(), derive_seed(seed, "negatives", 0))?;
    Ok(Dataset { graph, negatives })
}

fn targets(edges: &[LabeledEdge]) -> Vec<f64> {
    edges.iter().map(LabeledEdge::target).collect()
}

fn edge_digest(edges: &[LabeledEdge]) -> String {
    fnv_digest(edges.iter().flat_map(|e| {
        let mut b = Vec::with_capacity(17);
        b.extend_from_slice(&(e.u as u64).to_le_bytes());
        b.extend_from_slice(&(e.v as u64).to_le_bytes());
        b.push(u8::from(e.label));
        b
    }))
}

fn positive_graph(template: &Graph, edges: &[&[LabeledEdge]]) -> Result<Graph> {
    let pos = edges
        .iter()
        .flat_map(|s| s.iter())
        .filter(|e| e.label)
        .map(|e| (e.u, e.v));
    Graph::new(template.num_nodes(), pos)
}

fn ks_of(graph: &Graph) -> f64 {
    fit_power_law(&degree_sequence(graph, true)).map_or(f64::NAN, |f| f.ks)
}

/// Everything in one trial that does not depend on the sampler: the split,
/// the trained base model and its node embeddings.
pub struct TrialState {
    pub index: usize,
    pub split_index: usize,
    pub repetition: usize,
    pub seed: u64,
    pub split: EdgeSplit,
    pub subgraph: Graph,
    pub embeddings: Matrix,
    pub ks_before: f64,
    test_x: Matrix,
    test_y: Vec<f64>,
    test_digest: String,
}

impl TrialState {
    /// Splits, builds the training subgraph and trains the base model.
    pub fn build(cfg: &RunConfig, data: &Dataset, index: usize) -> Result<Self> {
        let split_index = index / cfg.repetitions;
        let repetition = index % cfg.repetitions;
        let seed = derive_seed(cfg.seed, "trial", index as u64);
        let split = split_edges(
            &data.positives(),
            &data.negatives,
            cfg.ratios,
            derive_seed(cfg.seed, "split", split_index as u64),
        )?;
        let subgraph = training_subgraph(&data.graph, &split);
        let params = train_link_predictor(
            &subgraph,
            &split.train,
            &split.val,
            &cfg.model,
            derive_seed(seed, "model", 0),
        )?;
        let prepared = PreparedGraph::new(&subgraph, cfg.model.aggregation)?;
        let embeddings = params.encode_nodes(&prepared)?;
        let test_x = edge_embedding_matrix(&embeddings, &split.test);
        let test_y = targets(&split.test);
        let test_digest = edge_digest(&split.test);
        let ks_before = ks_of(&subgraph);
        Ok(Self {
            index,
            split_index,
            repetition,
            seed,
            split,
            subgraph,
            embeddings,
            ks_before,
            test_x,
            test_y,
            test_digest,
        })
    }

    fn record(&self, arm: Arm) -> TrialRecord {
        TrialRecord {
            arm,
            coverage: f64::NAN,
            avg_length: f64::NAN,
            q_hat: f64::NAN,
            ks_before: self.ks_before,
            ks_after: f64::NAN,
            seed: self.seed,
            trial: self.index,
            split: self.split_index,
            repetition: self.repetition,
            train_size: 0,
            calib_size: 0,
            test_size: self.split.test.len(),
            density: f64::NAN,
            test_digest: self.test_digest.clone(),
            status: TrialStatus::Ok,
        }
    }

    fn conformal(
        &self,
        cfg: &RunConfig,
        fit: &[LabeledEdge],
        calib: &[LabeledEdge],
    ) -> Result<ConformalReport> {
        if calib.is_empty() {
            return Err(ClpError::DegenerateCalibration);
        }
        let x = edge_embedding_matrix(&self.embeddings, fit);
        let qmodel = fit_quantile_functions(
            &x,
            &targets(fit),
            cfg.alpha,
            &cfg.quantile,
            derive_seed(self.seed, "quantile", 0),
        )?;
        let calib_x = edge_embedding_matrix(&self.embeddings, calib);
        let (report, _) = conformal_report(
            &qmodel,
            &calib_x,
            &targets(calib),
            &self.test_x,
            &self.test_y,
            cfg.alpha,
        )?;
        Ok(report)
    }

    fn finish(mut rec: TrialRecord, outcome: Result<ConformalReport>) -> TrialRecord {
        match outcome {
            Ok(r) => {
                rec.coverage = r.empirical_coverage;
                rec.avg_length = r.avg_interval_length;
                rec.q_hat = r.q_hat;
                if !r.q_hat.is_finite() {
                    rec.status = TrialStatus::DegenerateCalibration;
                }
            }
            Err(ClpError::DegenerateCalibration) => rec.status = TrialStatus::DegenerateCalibration,
            Err(e) => rec.status = TrialStatus::Failed(e.to_string()),
        }
        if !rec.is_ok() {
            warn!("trial {} {}: {:?}", rec.trial, rec.arm, rec.status);
        }
        rec
    }

    /// Plain CQR on the full train, val and calib sets.
    pub fn cqr_arm(&self, cfg: &RunConfig) -> TrialRecord {
        let mut rec = self.record(Arm::Cqr);
        let fit: Vec<LabeledEdge> = self.split.train.iter().chain(&self.split.val).copied().collect();
        rec.train_size = fit.len();
        rec.calib_size = self.split.calib.len();
        rec.ks_after = self.ks_before;
        rec.density = self.subgraph.density();
        Self::finish(rec, self.conformal(cfg, &fit, &self.split.calib))
    }

    /// The degree guide every sampled arm of this trial shares.
    pub fn guide(&self) -> Result<DegreeGuide> {
        DegreeGuide::from_graph(&self.subgraph, derive_seed(self.seed, "ideal", 0))
    }

    pub fn sampler_config(&self, cfg: &RunConfig) -> SamplerConfig {
        SamplerConfig {
            seed: derive_seed(self.seed, "sampler", 0),
            ..cfg.sampler
        }
    }

    /// S-CQR: quantile fit and calibration on degree-guided samples; the
    /// test set is the same as the CQR arm's.
    pub fn sampled_arm(&self, cfg: &RunConfig, guide: &DegreeGuide, sampler: &SamplerConfig) -> TrialRecord {
        let mut rec = self.record(Arm::SampledCqr);
        let split = &self.split;
        let outcome = sample_with_guide(&split.train, &split.val, &split.calib, guide, sampler).and_then(|s| {
            let fit: Vec<LabeledEdge> = s.train.iter().chain(&s.val).copied().collect();
            rec.train_size = fit.len();
            rec.calib_size = s.calib.len();
            let kept = positive_graph(&self.subgraph, &[&s.train, &s.val])?;
            rec.density = kept.density();
            rec.ks_after = ks_of(&kept);
            self.conformal(cfg, &fit, &s.calib)
        });
        Self::finish(rec, outcome)
    }
}

/// Runs both arms of one trial.
pub fn run_trial(cfg: &RunConfig, data: &Dataset, index: usize) -> Vec<TrialRecord> {
    let state = match TrialState::build(cfg, data, index) {
        Ok(s) => s,
        Err(e) => {
            warn!("trial {index} failed before calibration: {e}");
            let arms = if cfg.run_sampled_arm {
                vec![Arm::Cqr, Arm::SampledCqr]
            } else {
                vec![Arm::Cqr]
            };
            return arms
                .into_iter()
                .map(|arm| TrialRecord {
                    arm,
                    coverage: f64::NAN,
                    avg_length: f64::NAN,
                    q_hat: f64::NAN,
                    ks_before: f64::NAN,
                    ks_after: f64::NAN,
                    seed: derive_seed(cfg.seed, "trial", index as u64),
                    trial: index,
                    split: index / cfg.repetitions,
                    repetition: index % cfg.repetitions,
                    train_size: 0,
                    calib_size: 0,
                    test_size: 0,
                    density: f64::NAN,
                    test_digest: String::new(),
                    status: TrialStatus::Failed(e.to_string()),
                })
                .collect();
        }
    };
    let mut out = vec![state.cqr_arm(cfg)];
    if cfg.run_sampled_arm {
        let sampler = state.sampler_config(cfg);
        let rec = match state.guide() {
            Ok(guide) => state.sampled_arm(cfg, &guide, &sampler),
            Err(e) => TrialState::finish(state.record(Arm::SampledCqr), Err(e)),
        };
        out.push(rec);
    }
    out
}

/// Runs every trial of `cfg` on an already prepared dataset.
pub fn run_on_dataset(cfg: &RunConfig, data: &Dataset) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut trials = Vec::with_capacity(2 * cfg.trials());
    for index in 0..cfg.trials() {
        let records = run_trial(cfg, data, index);
        for r in &records {
            info!(
                "trial {index} {}: coverage {:.4} length {:.4}",
                r.arm, r.coverage, r.avg_length
            );
        }
        trials.extend(records);
    }
    Ok(ExperimentReport::new(cfg.echo(), trials))
}

pub fn run_pipeline(cfg: &RunConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let data = prepare_dataset(cfg)?;
    run_on_dataset(cfg, &data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> RunConfig {
        let mut cfg = RunConfig::desk();
        cfg.data = DataSource::Synthetic(SynthSpec {
            nodes: 300,
            clique_size: 8,
            clique_count: 2,
            ..SynthSpec::default()
        });
        cfg.feature_dim = 8;
        cfg.model.hidden_dim = 8;
        cfg.model.scorer_hidden = 8;
        cfg.model.epochs = 5;
        cfg.quantile.hidden_dim = 8;
        cfg.quantile.epochs = 5;
        cfg.splits = 1;
        cfg.repetitions = 1;
        cfg.sampler.lambda = 5.0;
        cfg
    }

    #[test]
    fn single_trial_is_deterministic() {
        let cfg = tiny();
        let a = run_pipeline(&cfg).unwrap().to_json().unwrap();
        let b = run_pipeline(&cfg).unwrap().to_json().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn arms_share_the_test_set() {
        let report = run_pipeline(&tiny()).unwrap();
        assert_eq!(report.trials.len(), 2);
        let (a, b) = (&report.trials[0], &report.trials[1]);
        assert_eq!(a.test_digest, b.test_digest);
        assert_eq!(a.test_size, b.test_size);
        assert_eq!(a.seed, b.seed);
        assert!(a.coverage.is_finite());
    }

    #[test]
    fn sampled_arm_can_be_disabled() {
        let mut cfg = tiny();
        cfg.run_sampled_arm = false;
        let report = run_pipeline(&cfg).unwrap();
        assert_eq!(report.trials.len(), 1);
        assert_eq!(report.summary.improvement_pct, None);
    }

    #[test]
    fn zero_lambda_is_reported_not_fatal() {
        let mut cfg = tiny();
        cfg.sampler.lambda = 0.0;
        cfg.sampler.mode = crate::sampler::SamplerMode::Literal;
        let report = run_pipeline(&cfg).unwrap();
        assert!(!report.trials[1].is_ok());
        assert!(report.trials[0].is_ok());
    }

    #[test]
    fn trial_indices_map_to_splits_and_repetitions() {
        let mut cfg = tiny();
        cfg.splits = 2;
        cfg.repetitions = 2;
        cfg.run_sampled_arm = false;
        let report = run_pipeline(&cfg).unwrap();
        let idx: Vec<(usize, usize)> = report.trials.iter().map(|t| (t.split, t.repetition)).collect();
        assert_eq!(idx, [(0, 0), (0, 1), (1, 0), (1, 1)]);
        // same split, same test edges
        assert_eq!(report.trials[0].test_digest, report.trials[1].test_digest);
        assert_ne!(report.trials[0].test_digest, report.trials[2].test_digest);
    }
}
