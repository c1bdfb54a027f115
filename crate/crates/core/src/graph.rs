//! Undirected simple graphs, edge-list I/O, labeled edge splits and the
//! synthetic generators used by the simulation studies.

use std::collections::{BTreeSet, HashSet};

use log::warn;
use rand::seq::{index, SliceRandom};
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{invalid, ClpError, Result};
use crate::linalg::Matrix;
use crate::powerlaw;
use crate::rng::rng_from_seed;

/// Unordered node pair stored as `(min, max)`.
pub type NodePair = (usize, usize);

pub fn normalize_pair(u: usize, v: usize) -> NodePair {
    if u <= v {
        (u, v)
    } else {
        (v, u)
    }
}

/// Undirected simple graph with optional node features.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    num_nodes: usize,
    edges: BTreeSet<NodePair>,
    features: Option<Matrix>,
}

impl Graph {
    /// Builds a graph, collapsing duplicate undirected pairs.
    pub fn new(num_nodes: usize, edges: impl IntoIterator<Item = NodePair>) -> Result<Self> {
        if num_nodes == 0 {
            return Err(invalid("graph must have at least one node"));
        }
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            if u == v {
                return Err(invalid(format!("self-loop on node {u}")));
            }
            if u >= num_nodes || v >= num_nodes {
                return Err(invalid(format!(
                    "edge ({u}, {v}) out of range for {num_nodes} nodes"
                )));
            }
            set.insert(normalize_pair(u, v));
        }
        Ok(Self {
            num_nodes,
            edges: set,
            features: None,
        })
    }

    pub fn empty(num_nodes: usize) -> Result<Self> {
        Self::new(num_nodes, std::iter::empty())
    }

    /// Parses a whitespace-separated edge list. Lines starting with `#` and
    /// blank lines are skipped. Self-loops are dropped with a warning.
    pub fn from_edge_list(text: &str, num_nodes_hint: Option<usize>) -> Result<Self> {
        let mut raw = Vec::new();
        let mut max_id = None::<usize>;
        let mut self_loops = 0usize;
        for (lineno, line) in text.lines().enumerate() {
            let line_no = lineno + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let tokens: Vec<&str> = trimmed.split_whitespace().collect();
            if tokens.len() != 2 {
                return Err(ClpError::Parse {
                    line: line_no,
                    message: format!("expected two node ids, found {} tokens", tokens.len()),
                });
            }
            let mut ids = [0usize; 2];
            for (slot, tok) in ids.iter_mut().zip(&tokens) {
                let parsed: i64 = tok.parse().map_err(|_| ClpError::Parse {
                    line: line_no,
                    message: format!("invalid node id {tok:?}"),
                })?;
                if parsed < 0 {
                    return Err(invalid(format!(
                        "negative node id {parsed} on line {line_no}"
                    )));
                }
                *slot = parsed as usize;
            }
            max_id = Some(max_id.map_or(ids[0].max(ids[1]), |m| m.max(ids[0]).max(ids[1])));
            if ids[0] == ids[1] {
                self_loops += 1;
                continue;
            }
            raw.push((ids[0], ids[1]));
        }
        if self_loops > 0 {
            warn!("dropped {self_loops} self-loops from edge list");
        }
        let implied = max_id.map_or(0, |m| m + 1);
        let num_nodes = implied.max(num_nodes_hint.unwrap_or(0));
        let graph = Self::new(num_nodes, raw.iter().copied())?;
        if graph.num_edges() < raw.len() {
            warn!(
                "collapsed {} duplicate or reversed edges to undirected pairs",
                raw.len() - graph.num_edges()
            );
        }
        Ok(graph)
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = NodePair> + '_ {
        self.edges.iter().copied()
    }

    pub fn contains_edge(&self, u: usize, v: usize) -> bool {
        self.edges.contains(&normalize_pair(u, v))
    }

    /// Number of non-edges available to negative sampling.
    pub fn non_edge_count(&self) -> usize {
        let n = self.num_nodes;
        n * (n - 1) / 2 - self.edges.len()
    }

    pub fn density(&self) -> f64 {
        let n = self.num_nodes as f64;
        if self.num_nodes < 2 {
            return 0.0;
        }
        self.edges.len() as f64 / (n * (n - 1.0) / 2.0)
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.num_nodes];
        for &(u, v) in &self.edges {
            deg[u] += 1;
            deg[v] += 1;
        }
        deg
    }

    pub fn features(&self) -> Option<&Matrix> {
        self.features.as_ref()
    }

    pub fn with_features(mut self, features: Matrix) -> Result<Self> {
        if features.rows() != self.num_nodes {
            return Err(ClpError::Dimension {
                expected: self.num_nodes,
                actual: features.rows(),
            });
        }
        if !features.is_finite() {
            return Err(invalid("node features must be finite"));
        }
        self.features = Some(features);
        Ok(self)
    }

    /// Attaches seeded standard-normal features unless features are present.
    pub fn ensure_features(self, dim: usize, seed: u64) -> Self {
        if self.features.is_some() {
            return self;
        }
        let mut rng = rng_from_seed(seed);
        let data = (0..self.num_nodes * dim)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let m = Matrix::from_vec(self.num_nodes, dim, data);
        Self {
            features: Some(m),
            ..self
        }
    }

    fn with_edges(&self, edges: BTreeSet<NodePair>) -> Self {
        Self {
            num_nodes: self.num_nodes,
            edges,
            features: self.features.clone(),
        }
    }
}

/// Parses a feature file: one line per node, `id f_1 ... f_d`.
pub fn parse_features(text: &str, num_nodes: usize) -> Result<Matrix> {
    let mut rows: Vec<Option<Vec<f64>>> = vec![None; num_nodes];
    let mut dim = None;
    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        let id_tok = tokens.next().unwrap_or_default();
        let id: usize = id_tok.parse().map_err(|_| ClpError::Parse {
            line: line_no,
            message: format!("invalid node id {id_tok:?}"),
        })?;
        let values = tokens
            .map(|t| {
                t.parse::<f64>().map_err(|_| ClpError::Parse {
                    line: line_no,
                    message: format!("invalid feature value {t:?}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(ClpError::Parse {
                    line: line_no,
                    message: format!("expected {d} feature values, found {}", values.len()),
                })
            }
            _ => {}
        }
        let slot = rows.get_mut(id).ok_or_else(|| {
            invalid(format!("feature row for node {id} but graph has {num_nodes} nodes"))
        })?;
        *slot = Some(values);
    }
    let dim = dim.ok_or_else(|| invalid("feature file has no rows"))?;
    let mut data = Vec::with_capacity(num_nodes * dim);
    for (node, row) in rows.into_iter().enumerate() {
        let row = row.ok_or_else(|| invalid(format!("missing features for node {node}")))?;
        data.extend(row);
    }
    Ok(Matrix::from_vec(num_nodes, dim, data))
}

/// A node pair tagged as an observed link (`label = true`) or a non-link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LabeledEdge {
    pub u: usize,
    pub v: usize,
    pub label: bool,
}

impl LabeledEdge {
    pub fn new(u: usize, v: usize, label: bool) -> Self {
        let (u, v) = normalize_pair(u, v);
        Self { u, v, label }
    }

    /// Regression target: 1.0 for positives, 0.0 for negatives.
    pub fn target(&self) -> f64 {
        if self.label {
            1.0
        } else {
            0.0
        }
    }
}

/// Uniformly samples `count` distinct non-edges without replacement.
pub fn negative_sample(graph: &Graph, count: usize, seed: u64) -> Result<Vec<NodePair>> {
    let available = graph.non_edge_count();
    if count > available {
        return Err(ClpError::Capacity {
            requested: count,
            available,
        });
    }
    let mut rng = rng_from_seed(seed);
    let n = graph.num_nodes();
    let total_pairs = n * (n - 1) / 2;
    // Dense regime: enumerate every non-edge and draw a prefix of a shuffle.
    if count * 4 > available || total_pairs <= 200_000 {
        let mut candidates = Vec::with_capacity(available);
        for u in 0..n {
            for v in u + 1..n {
                if !graph.contains_edge(u, v) {
                    candidates.push((u, v));
                }
            }
        }
        let picked = index::sample(&mut rng, candidates.len(), count);
        return Ok(picked.into_iter().map(|i| candidates[i]).collect());
    }
    let mut seen = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let u = rng.gen_range(0..n);
        let v = rng.gen_range(0..n);
        if u == v {
            continue;
        }
        let pair = normalize_pair(u, v);
        if graph.contains_edge(pair.0, pair.1) || !seen.insert(pair) {
            continue;
        }
        out.push(pair);
    }
    Ok(out)
}

/// Fractions of labeled edges assigned to train/val/calib/test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub calib: f64,
    pub test: f64,
}

impl SplitRatios {
    pub fn new(train: f64, val: f64, calib: f64, test: f64) -> Result<Self> {
        let r = Self {
            train,
            val,
            calib,
            test,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = self.as_array();
        if parts.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(invalid(format!("split ratios must be non-negative: {parts:?}")));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("split ratios sum to {sum}, expected 1")));
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.train, self.val, self.calib, self.test]
    }

    /// Per-subset sizes for `n` items: floor each quota, then hand the
    /// leftovers out one at a time in train, val, calib, test order,
    /// skipping subsets with a zero ratio.
    pub fn quotas(&self, n: usize) -> [usize; 4] {
        let parts = self.as_array();
        let mut sizes = parts.map(|r| ((r * n as f64) + 1e-9).floor() as usize);
        let assigned: usize = sizes.iter().sum();
        let mut leftover = n.saturating_sub(assigned);
        while leftover > 0 {
            for (size, ratio) in sizes.iter_mut().zip(parts) {
                if leftover == 0 {
                    break;
                }
                if ratio > 0.0 {
                    *size += 1;
                    leftover -= 1;
                }
            }
        }
        sizes
    }
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.5,
            val: 0.1,
            calib: 0.2,
            test: 0.2,
        }
    }
}

/// Disjoint, class-balanced train/val/calib/test link sets.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EdgeSplit {
    pub train: Vec<LabeledEdge>,
    pub val: Vec<LabeledEdge>,
    pub calib: Vec<LabeledEdge>,
    pub test: Vec<LabeledEdge>,
}

impl EdgeSplit {
    pub fn subsets(&self) -> [&[LabeledEdge]; 4] {
        [&self.train, &self.val, &self.calib, &self.test]
    }

    pub fn len(&self) -> usize {
        self.subsets().iter().map(|s| s.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Shuffles positives and negatives independently and partitions each by
/// `ratios`, so every subset receives the same number of each class.
pub fn split_edges(
    positives: &[NodePair],
    negatives: &[NodePair],
    ratios: SplitRatios,
    seed: u64,
) -> Result<EdgeSplit> {
    ratios.validate()?;
    if positives.len() != negatives.len() {
        return Err(invalid(format!(
            "need equal positive and negative counts, got {} and {}",
            positives.len(),
            negatives.len()
        )));
    }
    let mut rng = rng_from_seed(seed);
    let mut pos: Vec<LabeledEdge> = positives
        .iter()
        .map(|&(u, v)| LabeledEdge::new(u, v, true))
        .collect();
    let mut neg: Vec<LabeledEdge> = negatives
        .iter()
        .map(|&(u, v)| LabeledEdge::new(u, v, false))
        .collect();
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);

    let quotas = ratios.quotas(pos.len());
    let mut split = EdgeSplit::default();
    let mut start = 0;
    let targets = [
        &mut split.train,
        &mut split.val,
        &mut split.calib,
        &mut split.test,
    ];
    for (subset, q) in targets.into_iter().zip(quotas) {
        subset.extend_from_slice(&pos[start..start + q]);
        subset.extend_from_slice(&neg[start..start + q]);
        start += q;
    }
    Ok(split)
}

/// The graph the base model is allowed to see: positive train and val links.
pub fn training_subgraph(graph: &Graph, split: &EdgeSplit) -> Graph {
    let edges: BTreeSet<NodePair> = split
        .train
        .iter()
        .chain(&split.val)
        .filter(|e| e.label)
        .map(|e| (e.u, e.v))
        .collect();
    if edges.is_empty() {
        warn!("training subgraph has no edges");
    }
    graph.with_edges(edges)
}

/// Degree multiset of a graph, optionally without isolated nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeSequence(Vec<usize>);

impl DegreeSequence {
    pub fn new(degrees: Vec<usize>) -> Self {
        Self(degrees)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }
}

impl From<Vec<usize>> for DegreeSequence {
    fn from(v: Vec<usize>) -> Self {
        Self(v)
    }
}

pub fn degree_sequence(graph: &Graph, drop_isolated: bool) -> DegreeSequence {
    let mut deg = graph.degrees();
    if drop_isolated {
        deg.retain(|&d| d > 0);
    }
    DegreeSequence(deg)
}

/// Adds `count` cliques, each over `size` distinct uniformly chosen nodes.
pub fn inject_cliques(graph: &Graph, size: usize, count: usize, seed: u64) -> Result<Graph> {
    if size < 2 {
        return Err(invalid(format!("clique size must be at least 2, got {size}")));
    }
    if size > graph.num_nodes() {
        return Err(invalid(format!(
            "clique size {size} exceeds node count {}",
            graph.num_nodes()
        )));
    }
    let mut rng = rng_from_seed(seed);
    let mut edges = graph.edges.clone();
    for _ in 0..count {
        let members = index::sample(&mut rng, graph.num_nodes(), size).into_vec();
        for (i, &a) in members.iter().enumerate() {
            for &b in &members[i + 1..] {
                edges.insert(normalize_pair(a, b));
            }
        }
    }
    Ok(graph.with_edges(edges))
}

/// Configuration-model wiring of a degree sequence. Stubs are shuffled and
/// paired; self-loops and repeated pairs are discarded.
pub fn configuration_model(degrees: &[usize], seed: u64) -> Result<Graph> {
    let mut rng = rng_from_seed(seed);
    let mut stubs: Vec<usize> = degrees
        .iter()
        .enumerate()
        .flat_map(|(node, &d)| std::iter::repeat(node).take(d))
        .collect();
    stubs.shuffle(&mut rng);
    let edges = stubs
        .chunks_exact(2)
        .filter(|p| p[0] != p[1])
        .map(|p| normalize_pair(p[0], p[1]));
    Graph::new(degrees.len(), edges)
}

/// Synthetic graph whose degree sequence is drawn from the discrete power
/// law with exponent `beta` above `d_min`. An infinite `beta` puts every
/// node at exactly `d_min`.
pub fn generate_powerlaw_graph(
    num_nodes: usize,
    beta: f64,
    d_min: usize,
    seed: u64,
) -> Result<Graph> {
    if num_nodes < 10 {
        return Err(invalid(format!("need at least 10 nodes, got {num_nodes}")));
    }
    if d_min == 0 || d_min >= num_nodes {
        return Err(invalid(format!("d_min must lie in [1, {num_nodes}), got {d_min}")));
    }
    let mut rng = rng_from_seed(seed);
    let mut degrees = if beta.is_infinite() && beta > 0.0 {
        vec![d_min; num_nodes]
    } else {
        let sampler = powerlaw::DiscretePowerLaw::new(beta, d_min, num_nodes - 1)?;
        (0..num_nodes).map(|_| sampler.sample(&mut rng)).collect()
    };
    if degrees.iter().sum::<usize>() % 2 == 1 {
        let node = rng.gen_range(0..num_nodes);
        if degrees[node] + 1 < num_nodes {
            degrees[node] += 1;
        } else {
            degrees[node] -= 1;
        }
    }
    configuration_model(&degrees, rng.gen())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> Graph {
        Graph::new(3, [(0, 1), (1, 2)]).unwrap()
    }

    #[test]
    fn edge_list_parses_and_dedups() {
        let g = Graph::from_edge_list("0 1\n1 2", None).unwrap();
        assert_eq!(g.num_nodes(), 3);
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1), (1, 2)]);

        let g = Graph::from_edge_list("0 1\n1 0", None).unwrap();
        assert_eq!(g.num_edges(), 1);

        let g = Graph::from_edge_list("# header\n\n0 1\n", Some(10)).unwrap();
        assert_eq!(g.num_nodes(), 10);
    }

    #[test]
    fn edge_list_errors() {
        match Graph::from_edge_list("0 a", None) {
            Err(ClpError::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
        match Graph::from_edge_list("0 1\n2", None) {
            Err(ClpError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(matches!(
            Graph::from_edge_list("0 -1", None),
            Err(ClpError::Validation(_))
        ));
    }

    #[test]
    fn features_file_round() {
        let m = parse_features("1 0.5 1.5\n0 -1 2\n", 2).unwrap();
        assert_eq!(m.row(0), &[-1.0, 2.0]);
        assert_eq!(m.row(1), &[0.5, 1.5]);
        assert!(parse_features("0 1 2\n", 2).is_err());
        assert!(parse_features("0 1 2\n1 3\n", 2).is_err());
    }

    #[test]
    fn negative_sampling_cases() {
        let k3 = Graph::new(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        assert!(matches!(
            negative_sample(&k3, 1, 0),
            Err(ClpError::Capacity { .. })
        ));
        assert_eq!(negative_sample(&path3(), 1, 5).unwrap(), vec![(0, 2)]);

        let edges: Vec<NodePair> = (0..50).map(|i| (i, i + 1)).collect();
        let g = Graph::new(100, edges).unwrap();
        let a = negative_sample(&g, 50, 42).unwrap();
        let b = negative_sample(&g, 50, 42).unwrap();
        assert_eq!(a, b);
        let distinct: HashSet<_> = a.iter().collect();
        assert_eq!(distinct.len(), 50);
        assert!(a.iter().all(|&(u, v)| u < v && !g.contains_edge(u, v)));
    }

    #[test]
    fn negative_sampling_sparse_regime() {
        let g = generate_powerlaw_graph(1000, 2.5, 1, 3).unwrap();
        let negs = negative_sample(&g, g.num_edges(), 9).unwrap();
        let distinct: HashSet<_> = negs.iter().collect();
        assert_eq!(distinct.len(), negs.len());
        assert!(negs.iter().all(|&(u, v)| u < v && !g.contains_edge(u, v)));
    }

    fn pairs(n: usize, offset: usize) -> Vec<NodePair> {
        (0..n).map(|i| (offset + i, offset + i + 1)).collect()
    }

    #[test]
    fn split_sizes_follow_quota_rule() {
        let split = split_edges(
            &pairs(10, 0),
            &pairs(10, 100),
            SplitRatios::default(),
            1,
        )
        .unwrap();
        let sizes: Vec<usize> = split.subsets().iter().map(|s| s.len()).collect();
        assert_eq!(sizes, vec![10, 2, 4, 4]);

        let all_train = split_edges(
            &pairs(7, 0),
            &pairs(7, 100),
            SplitRatios::new(1.0, 0.0, 0.0, 0.0).unwrap(),
            1,
        )
        .unwrap();
        assert_eq!(all_train.train.len(), 14);
        assert!(all_train.val.is_empty() && all_train.calib.is_empty() && all_train.test.is_empty());
    }

    #[test]
    fn split_leftovers_go_to_train_first() {
        let r = SplitRatios::new(0.25, 0.25, 0.25, 0.25).unwrap();
        assert_eq!(r.quotas(7), [2, 2, 2, 1]);
        let r = SplitRatios::new(0.5, 0.5, 0.0, 0.0).unwrap();
        assert_eq!(r.quotas(3), [2, 1, 0, 0]);
    }

    #[test]
    fn split_rejects_bad_ratios() {
        assert!(SplitRatios::new(0.5, 0.1, 0.2, 0.3).is_err());
        assert!(SplitRatios::new(1.2, -0.2, 0.0, 0.0).is_err());
        assert!(split_edges(&pairs(3, 0), &pairs(2, 100), SplitRatios::default(), 0).is_err());
    }

    #[test]
    fn training_subgraph_keeps_train_and_val_positives() {
        let mk = |u, v, l| LabeledEdge::new(u, v, l);
        let split = EdgeSplit {
            train: vec![mk(0, 1, true), mk(1, 2, true), mk(2, 3, true), mk(3, 4, true), mk(0, 9, false)],
            val: vec![mk(4, 5, true), mk(1, 9, false)],
            calib: vec![mk(5, 6, true), mk(6, 7, true)],
            test: vec![mk(7, 8, true)],
        };
        let g = Graph::empty(10).unwrap();
        let sub = training_subgraph(&g, &split);
        assert_eq!(sub.num_edges(), 5);
        assert!(!sub.contains_edge(5, 6) && !sub.contains_edge(7, 8));
        assert!(!sub.contains_edge(0, 9));

        let none = training_subgraph(&g, &EdgeSplit::default());
        assert_eq!(none.num_edges(), 0);
    }

    #[test]
    fn degree_sequences() {
        let tri = Graph::new(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        assert_eq!(degree_sequence(&tri, false).into_vec(), vec![2, 2, 2]);
        let star = Graph::new(4, [(0, 1), (0, 2), (0, 3)]).unwrap();
        assert_eq!(degree_sequence(&star, false).into_vec(), vec![3, 1, 1, 1]);
        let single = Graph::new(5, [(0, 1)]).unwrap();
        assert_eq!(degree_sequence(&single, true).into_vec(), vec![1, 1]);
        assert_eq!(degree_sequence(&single, false).total(), 2);
    }

    #[test]
    fn clique_injection() {
        let g = Graph::empty(5).unwrap();
        let out = inject_cliques(&g, 3, 1, 0).unwrap();
        assert_eq!(out.num_edges(), 3);

        let base = path3();
        assert_eq!(inject_cliques(&base, 2, 0, 0).unwrap(), base);
        assert!(inject_cliques(&base, 4, 1, 0).is_err());
        assert!(inject_cliques(&base, 1, 1, 0).is_err());

        let big = generate_powerlaw_graph(300, 2.5, 1, 1).unwrap();
        let a = inject_cliques(&big, 10, 3, 7).unwrap();
        assert_eq!(a, inject_cliques(&big, 10, 3, 7).unwrap());
        assert!(a.num_edges() >= big.num_edges());
    }

    #[test]
    fn infinite_exponent_yields_perfect_matching() {
        let g = generate_powerlaw_graph(10, f64::INFINITY, 1, 4).unwrap();
        assert_eq!(g.num_edges(), 5);
        assert!(g.degrees().iter().all(|&d| d == 1));
    }

    #[test]
    fn powerlaw_graph_is_deterministic_and_simple() {
        let a = generate_powerlaw_graph(500, 2.5, 1, 11).unwrap();
        let b = generate_powerlaw_graph(500, 2.5, 1, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(degree_sequence(&a, false).total(), 2 * a.num_edges());
        assert!(a.edges().all(|(u, v)| u < v && v < 500));
        assert_ne!(a, generate_powerlaw_graph(500, 2.5, 1, 12).unwrap());
    }

    #[test]
    fn synthesized_features_are_seeded() {
        let g = path3().ensure_features(4, 3);
        let h = path3().ensure_features(4, 3);
        assert_eq!(g.features(), h.features());
        assert_eq!(g.features().unwrap().cols(), 4);
        let kept = g.clone().ensure_features(8, 99);
        assert_eq!(kept.features().unwrap().cols(), 4);
    }
}
