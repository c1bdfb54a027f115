use clp::conformal::{conformal_quantile, conformalize, evaluate, prediction_interval};
use clp::graph::LabeledEdge;
use clp::harness::{prepare_dataset, DataSource, RunConfig, SynthSpec, TrialState};
use clp::model::edge_embedding_matrix;
use clp::quantile::fit_quantile_functions;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_config() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.data = DataSource::Synthetic(SynthSpec {
        nodes: 400,
        clique_size: 10,
        clique_count: 3,
        ..SynthSpec::default()
    });
    cfg.model.epochs = 20;
    cfg.quantile.epochs = 20;
    cfg.splits = 1;
    cfg.repetitions = 1;
    cfg
}

#[test]
fn evaluation_order_does_not_matter() {
    let cfg = small_config();
    let data = prepare_dataset(&cfg).unwrap();
    let state = TrialState::build(&cfg, &data, 0).unwrap();
    let fit: Vec<LabeledEdge> = state.split.train.iter().chain(&state.split.val).copied().collect();
    let x = edge_embedding_matrix(&state.embeddings, &fit);
    let y: Vec<f64> = fit.iter().map(LabeledEdge::target).collect();
    let qmodel = fit_quantile_functions(&x, &y, cfg.alpha, &cfg.quantile, 1).unwrap();

    let run = |calib: &[LabeledEdge], test: &[LabeledEdge]| {
        let cx = edge_embedding_matrix(&state.embeddings, calib);
        let cy: Vec<f64> = calib.iter().map(LabeledEdge::target).collect();
        let tx = edge_embedding_matrix(&state.embeddings, test);
        conformalize(&qmodel, &cx, &cy, &tx, cfg.alpha).unwrap()
    };
    let reference = run(&state.split.calib, &state.split.test);
    let mut ref_scores = reference.calib_scores.clone();
    ref_scores.sort_by(f64::total_cmp);

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let mut calib = state.split.calib.clone();
        let mut order: Vec<usize> = (0..state.split.test.len()).collect();
        calib.shuffle(&mut rng);
        order.shuffle(&mut rng);
        let test: Vec<LabeledEdge> = order.iter().map(|&i| state.split.test[i]).collect();
        let out = run(&calib, &test);
        let mut scores = out.calib_scores.clone();
        scores.sort_by(f64::total_cmp);
        assert_eq!(scores, ref_scores);
        assert_eq!(out.q_hat.to_bits(), reference.q_hat.to_bits());
        for (k, &i) in order.iter().enumerate() {
            assert_eq!(out.intervals[k], reference.intervals[i]);
        }
    }
}

/// Exchangeable calibration and test points with an arbitrary fixed band:
/// the conformal guarantee gives coverage ceil((K+1)(1-a))/(K+1) on average.
#[test]
fn monte_carlo_coverage_matches_rank_formula() {
    let k = 49;
    let alpha = 0.1;
    let reps = 4000;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut covered = 0usize;
    for _ in 0..reps {
        let mut draw = || -> (f64, f64) {
            let x: f64 = rng.gen_range(-1.0..1.0);
            let noise: f64 = rng.gen_range(-1.0..1.0) * (0.2 + x.abs());
            (x, 0.5 * x + noise)
        };
        let band = |x: f64| (0.5 * x - 0.3, 0.5 * x + 0.3);
        let scores: Vec<f64> = (0..k)
            .map(|_| {
                let (x, y) = draw();
                let (lo, hi) = band(x);
                (lo - y).max(y - hi)
            })
            .collect();
        let q = conformal_quantile(&scores, alpha).unwrap();
        let (x, y) = draw();
        let (lo, hi) = band(x);
        let interval = prediction_interval(lo, hi, q);
        let eval = evaluate(&[interval], &[y]).unwrap();
        covered += eval.covered;
    }
    let expected = ((k + 1) as f64 * (1.0 - alpha)).ceil() / (k + 1) as f64;
    let rate = covered as f64 / reps as f64;
    let se = (expected * (1.0 - expected) / reps as f64).sqrt();
    assert!((rate - expected).abs() < 4.0 * se, "{rate} vs {expected}");
}

#[test]
fn too_few_scores_give_unbounded_intervals() {
    let q = conformal_quantile(&[0.1, 0.2, 0.3], 0.1).unwrap();
    assert_eq!(q, f64::INFINITY);
    let iv = prediction_interval(0.2, 0.4, q);
    assert!(iv.contains(1e300) && iv.contains(-1e300));
}
