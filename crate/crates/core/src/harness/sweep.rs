//! λ and clique-grid sweeps.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::config::{DataSource, RunConfig};
use super::pipeline::{dataset_from_graph, synthetic_graph, Dataset, TrialState};
use super::report::{mean_std, TrialRecord};
use crate::error::{invalid, Result};
use crate::graph::{degree_sequence, LabeledEdge};
use crate::powerlaw::fit_power_law;
use crate::sampler::SamplerConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaRow {
    pub lambda: f64,
    pub density: f64,
    /// Σ P_keep over positive train and val links, per node pair.
    pub expected_density: f64,
    pub ks: f64,
    pub coverage: f64,
    pub avg_length: f64,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaTable {
    pub rows: Vec<LambdaRow>,
    pub records: Vec<Vec<TrialRecord>>,
}

fn ok_mean(records: &[TrialRecord], f: fn(&TrialRecord) -> f64) -> f64 {
    let xs: Vec<f64> = records.iter().filter(|r| r.is_ok()).map(f).collect();
    mean_std(&xs).0
}

/// Runs the sampled arm for every λ, training the base model once per trial.
pub fn sweep_lambda(cfg: &RunConfig, data: &Dataset, lambdas: &[f64]) -> Result<LambdaTable> {
    cfg.validate()?;
    if lambdas.is_empty() {
        return Err(invalid("sweep needs at least one lambda"));
    }
    for &l in lambdas {
        SamplerConfig { lambda: l, ..cfg.sampler }.validate()?;
    }
    let mut records = vec![Vec::new(); lambdas.len()];
    let mut expected = vec![Vec::new(); lambdas.len()];
    for index in 0..cfg.trials() {
        let state = TrialState::build(cfg, data, index)?;
        let guide = state.guide()?;
        let base = state.sampler_config(cfg);
        let positives: Vec<LabeledEdge> = state
            .split
            .train
            .iter()
            .chain(&state.split.val)
            .filter(|e| e.label)
            .copied()
            .collect();
        let n = state.subgraph.num_nodes() as f64;
        let pairs = n * (n - 1.0) / 2.0;
        for (i, &lambda) in lambdas.iter().enumerate() {
            let sampler = SamplerConfig { lambda, ..base };
            records[i].push(state.sampled_arm(cfg, &guide, &sampler));
            expected[i].push(guide.expected_retained(&positives, &sampler) / pairs);
        }
    }
    let rows = lambdas
        .iter()
        .zip(&records)
        .zip(&expected)
        .map(|((&lambda, recs), exp)| LambdaRow {
            lambda,
            density: ok_mean(recs, |r| r.density),
            expected_density: mean_std(exp).0,
            ks: ok_mean(recs, |r| r.ks_after),
            coverage: ok_mean(recs, |r| r.coverage),
            avg_length: ok_mean(recs, |r| r.avg_length),
            failed: recs.iter().filter(|r| !r.is_ok()).count(),
        })
        .collect();
    Ok(LambdaTable { rows, records })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CliquePoint {
    pub variant: u64,
    pub ks: f64,
    pub avg_length: f64,
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CliqueRow {
    pub clique_size: usize,
    pub clique_count: usize,
    pub mean_ks: f64,
    pub mean_length: f64,
    pub mean_coverage: f64,
    pub points: Vec<CliquePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CliqueTable {
    pub rows: Vec<CliqueRow>,
}

impl CliqueTable {
    /// Rank correlation of KS against interval length over every variant.
    pub fn spearman_points(&self) -> f64 {
        let pts: Vec<&CliquePoint> = self.rows.iter().flat_map(|r| &r.points).collect();
        let ks: Vec<f64> = pts.iter().map(|p| p.ks).collect();
        let len: Vec<f64> = pts.iter().map(|p| p.avg_length).collect();
        spearman(&ks, &len)
    }

    /// Rank correlation of the per-row means.
    pub fn spearman_rows(&self) -> f64 {
        let ks: Vec<f64> = self.rows.iter().map(|r| r.mean_ks).collect();
        let len: Vec<f64> = self.rows.iter().map(|r| r.mean_length).collect();
        spearman(&ks, &len)
    }
}

/// For each `(clique_size, clique_count)` builds `variants` injected graphs
/// and runs the CQR arm on each.
pub fn sweep_cliques(cfg: &RunConfig, grid: &[(usize, usize)], variants: u64) -> Result<CliqueTable> {
    cfg.validate()?;
    if grid.is_empty() || variants == 0 {
        return Err(invalid("clique sweep needs a non-empty grid and at least one variant"));
    }
    let DataSource::Synthetic(base) = cfg.data else {
        return Err(invalid("clique sweep needs a synthetic data source"));
    };
    let mut rows = Vec::with_capacity(grid.len());
    for &(size, count) in grid {
        let spec = super::config::SynthSpec {
            clique_size: size,
            clique_count: count,
            ..base
        };
        let mut points = Vec::with_capacity(variants as usize);
        for variant in 0..variants {
            let graph = synthetic_graph(&spec, cfg.seed, variant)?;
            let ks = fit_power_law(&degree_sequence(&graph, true))?.ks;
            let data = dataset_from_graph(graph, cfg.feature_dim, cfg.seed)?;
            let mut recs = Vec::with_capacity(cfg.trials());
            for index in 0..cfg.trials() {
                recs.push(TrialState::build(cfg, &data, index)?.cqr_arm(cfg));
            }
            points.push(CliquePoint {
                variant,
                ks,
                avg_length: ok_mean(&recs, |r| r.avg_length),
                coverage: ok_mean(&recs, |r| r.coverage),
            });
        }
        let col = |f: fn(&CliquePoint) -> f64| mean_std(&points.iter().map(f).collect::<Vec<_>>()).0;
        rows.push(CliqueRow {
            clique_size: size,
            clique_count: count,
            mean_ks: col(|p| p.ks),
            mean_length: col(|p| p.avg_length),
            mean_coverage: col(|p| p.coverage),
            points,
        });
    }
    Ok(CliqueTable { rows })
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// Spearman rank correlation; NaN when either side is constant or the
/// inputs differ in length or have fewer than two points.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() || a.len() < 2 {
        return f64::NAN;
    }
    pearson(&average_ranks(a), &average_ranks(b))
}

fn csv(header: &str, lines: impl Iterator<Item = String>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for l in lines {
        out.push_str(&l);
        out.push('\n');
    }
    out
}

impl LambdaTable {
    pub fn to_csv(&self) -> String {
        csv(
            "lambda,density,expected_density,ks,coverage,avg_length,failed",
            self.rows.iter().map(|r| {
                let mut s = String::new();
                let _ = write!(
                    s,
                    "{},{},{},{},{},{},{}",
                    r.lambda, r.density, r.expected_density, r.ks, r.coverage, r.avg_length, r.failed
                );
                s
            }),
        )
    }
}

impl CliqueTable {
    pub fn to_csv(&self) -> String {
        csv(
            "clique_size,clique_count,mean_ks,mean_length,mean_coverage",
            self.rows.iter().map(|r| {
                format!(
                    "{},{},{},{},{}",
                    r.clique_size, r.clique_count, r.mean_ks, r.mean_length, r.mean_coverage
                )
            }),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::SynthSpec;
    use crate::harness::pipeline::prepare_dataset;
    use crate::harness::report::Arm;
    use crate::harness::run_on_dataset;

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 20.0, 5.0]), [2.0, 3.5, 3.5, 1.0]);
    }

    #[test]
    fn spearman_cases() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 40.0, 90.0]) - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
        // textbook example with a tie: rho = 0.5
        let r = spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 2.0]);
        let ra = [1.0, 2.0, 3.0, 4.0];
        let rb = [1.0, 4.0, 2.5, 2.5];
        assert!((r - pearson(&ra, &rb)).abs() < 1e-15);
        assert!(spearman(&[1.0, 1.0], &[1.0, 2.0]).is_nan());
        assert!(spearman(&[1.0], &[1.0]).is_nan());
    }

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
    fn single_lambda_matches_pipeline() {
        let cfg = tiny();
        let data = prepare_dataset(&cfg).unwrap();
        let table = sweep_lambda(&cfg, &data, &[cfg.sampler.lambda]).unwrap();
        let report = run_on_dataset(&cfg, &data).unwrap();
        let s = report.arm(Arm::SampledCqr).unwrap();
        assert_eq!(table.rows.len(), 1);
        assert_eq!(table.rows[0].coverage, s.mean_coverage);
        assert_eq!(table.rows[0].avg_length, s.mean_length);
        assert_eq!(table.records[0][0], report.trials[1]);
    }

    #[test]
    fn literal_density_shrinks_with_lambda() {
        let mut cfg = tiny();
        cfg.sampler.mode = crate::sampler::SamplerMode::Literal;
        let data = prepare_dataset(&cfg).unwrap();
        let table = sweep_lambda(&cfg, &data, &[0.45, 0.3, 0.15]).unwrap();
        for w in table.rows.windows(2) {
            assert!(w[1].expected_density <= w[0].expected_density);
        }
        assert!(table.to_csv().starts_with("lambda,density"));
        assert_eq!(table.to_csv().lines().count(), 4);
        assert!(sweep_lambda(&cfg, &data, &[]).is_err());
    }

    #[test]
    fn empty_injection_row_equals_base_cqr() {
        let mut cfg = tiny();
        cfg.run_sampled_arm = false;
        let DataSource::Synthetic(spec) = &mut cfg.data else { unreachable!() };
        spec.clique_count = 0;
        let report = crate::harness::run_pipeline(&cfg).unwrap();
        let table = sweep_cliques(&cfg, &[(8, 0)], 1).unwrap();
        assert_eq!(table.rows[0].mean_length, report.arm(Arm::Cqr).unwrap().mean_length);
        assert!(table.to_csv().starts_with("clique_size,"));
    }
}
