use distreg::eval::{Summary, TrialResult};
use distreg::synth::{mean_task, variance_task, TaskParams};
use distreg::{
    compute_metrics, grid_search_cv, median_heuristic, run_protocol, Bag, BagDataset, Grid, ModelKind, ProtocolParams,
};

fn small_variance(bags: usize, seed: u64) -> BagDataset {
    let params = TaskParams {
        bags,
        instances: 20,
        ..TaskParams::default()
    };
    variance_task(&params, seed).unwrap()
}

fn quick_grid() -> Grid {
    Grid {
        lambdas: vec![1e-4, 1e-2, 1.0],
        sigma_scales: vec![0.5, 1.0, 2.0],
        features: vec![32, 64],
    }
}

/// Replaces the instances and targets of `victims` with absurd values.
fn poison(data: &BagDataset, victims: &[usize]) -> BagDataset {
    let mut bags: Vec<Bag> = data.bags().to_vec();
    let mut targets = data.targets().to_vec();
    for &i in victims {
        let rows: Vec<Vec<f64>> = (0..7).map(|r| vec![1e6 + r as f64, -3e5, 42.0 * r as f64]).collect();
        bags[i] = Bag::from_rows(bags[i].id(), &rows).unwrap();
        targets[i] = -1e9;
    }
    BagDataset::new(bags, targets).unwrap()
}

#[test]
fn held_out_bags_never_influence_model_selection() {
    let data = small_variance(36, 2);
    let params = ProtocolParams {
        test_fraction: 0.25,
        trials: 3,
        folds: 3,
        seed: 11,
    };
    for kind in [ModelKind::Lr, ModelKind::Kr, ModelKind::Kdr, ModelKind::Rdr] {
        let clean = run_protocol(&data, kind, &quick_grid(), &params).unwrap();
        for trial in &clean.trials {
            let spied = poison(&data, &trial.test_indices);
            let single = ProtocolParams {
                trials: 1,
                seed: trial.seed,
                ..params.clone()
            };
            let rerun = run_protocol(&spied, kind, &quick_grid(), &single).unwrap();
            let other = &rerun.trials[0];
            assert_eq!(other.test_indices, trial.test_indices);
            assert_eq!(other.chosen, trial.chosen, "{kind} trial {}", trial.trial);
            assert_eq!(other.cv_rmse, trial.cv_rmse, "{kind} trial {}", trial.trial);
            assert_ne!(other.predictions, trial.predictions, "poisoned test bags should change predictions");
        }
    }
}

fn recompute(trials: &[TrialResult], data: &BagDataset) -> [Summary; 3] {
    let metrics: Vec<_> = trials
        .iter()
        .map(|t| {
            let y: Vec<f64> = t.test_indices.iter().map(|&i| data.targets()[i]).collect();
            compute_metrics(&y, &t.predictions).unwrap()
        })
        .collect();
    let summary = |f: fn(&distreg::Metrics) -> f64| {
        let v: Vec<f64> = metrics.iter().map(f).collect();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
        Summary { mean, std: var.sqrt() }
    };
    [summary(|m| m.me), summary(|m| m.rmse), summary(|m| m.r2)]
}

#[test]
fn aggregate_matches_per_trial_recomputation() {
    let data = small_variance(30, 5);
    let params = ProtocolParams {
        test_fraction: 0.3,
        trials: 4,
        folds: 3,
        seed: 0,
    };
    let report = run_protocol(&data, ModelKind::Kdr, &quick_grid(), &params).unwrap();
    let expected = recompute(&report.trials, &data);
    let got = [report.aggregate.me, report.aggregate.rmse, report.aggregate.r2];
    for (g, e) in got.iter().zip(&expected) {
        assert!((g.mean - e.mean).abs() <= 1e-12 * e.mean.abs().max(1.0), "{g:?} vs {e:?}");
        assert!((g.std - e.std).abs() <= 1e-12 * e.std.abs().max(1.0), "{g:?} vs {e:?}");
    }
    for (t, trial) in report.trials.iter().enumerate() {
        assert_eq!(trial.seed, t as u64);
        assert_eq!(trial.test_bags, 9);
    }
}

#[test]
fn single_trial_with_one_test_bag_is_legal() {
    let data = small_variance(4, 1);
    let params = ProtocolParams {
        test_fraction: 0.25,
        trials: 1,
        folds: 3,
        seed: 3,
    };
    let report = run_protocol(&data, ModelKind::Kdr, &quick_grid(), &params).unwrap();
    assert_eq!(report.trials[0].test_bags, 1);
    assert_eq!(report.aggregate.rmse.std, 0.0);
    assert!(report.aggregate.r2.mean.is_nan());
}

#[test]
fn protocol_rejects_too_few_bags() {
    let data = small_variance(5, 1);
    let params = ProtocolParams {
        test_fraction: 0.4,
        trials: 1,
        folds: 5,
        seed: 0,
    };
    assert!(run_protocol(&data, ModelKind::Lr, &quick_grid(), &params).is_err());
}

#[test]
fn linear_task_prefers_small_penalty() {
    let params = TaskParams {
        bags: 60,
        instances: 10,
        noise: 0.01,
        ..TaskParams::default()
    };
    let data = mean_task(&params, 8).unwrap();
    let grid = Grid {
        lambdas: vec![1e-6, 1e3],
        ..Grid::default()
    };
    let cv = grid_search_cv(&data, ModelKind::Lr, &grid, 5, 1).unwrap();
    assert_eq!(cv.best.lambda, 1e-6);
    assert_eq!(cv.table.len(), 2);
}

#[test]
fn selected_bandwidth_is_near_the_median_heuristic() {
    let data = small_variance(80, 13);
    let grid = Grid {
        lambdas: (-6..=0).map(|e| 10f64.powi(e)).collect(),
        ..Grid::default()
    };
    let cv = grid_search_cv(&data, ModelKind::Kdr, &grid, 5, 0).unwrap();
    let scale = cv.best.sigma_scale.unwrap();
    assert!((0.5..=2.0).contains(&scale), "selected scale {scale}");

    let norm = distreg::fit_normalizer(&data).unwrap();
    let normalized = distreg::apply_normalizer(&data, &norm).unwrap();
    let median = median_heuristic(normalized.bags().iter().flat_map(|b| b.instances().rows()));
    assert!((cv.reference_sigma[0] - median).abs() <= 1e-12 * median);
}

#[test]
fn linear_baseline_recovers_noiseless_linear_task() {
    let params = TaskParams {
        bags: 60,
        instances: 10,
        noise: 0.0,
        ..TaskParams::default()
    };
    let data = mean_task(&params, 21).unwrap();
    let protocol = ProtocolParams {
        trials: 3,
        ..ProtocolParams::default()
    };
    let report = run_protocol(&data, ModelKind::Lr, &Grid::default(), &protocol).unwrap();
    for trial in &report.trials {
        assert!((trial.metrics.r2 - 1.0).abs() <= 1e-8, "R² {}", trial.metrics.r2);
    }
}

#[test]
fn protocol_is_deterministic() {
    let data = small_variance(30, 9);
    let params = ProtocolParams {
        trials: 2,
        folds: 3,
        ..ProtocolParams::default()
    };
    let a = run_protocol(&data, ModelKind::Rdr, &quick_grid(), &params).unwrap();
    let b = run_protocol(&data, ModelKind::Rdr, &quick_grid(), &params).unwrap();
    assert_eq!(a.trials, b.trials);
}
