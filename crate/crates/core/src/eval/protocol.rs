use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::DataRef;
use crate::error::{Error, Result};
use crate::parallel;
use crate::regress::{fit_model, ModelKind};

use super::cv::{grid_search_cv, Grid, GridPoint};
use super::metrics::{lenient_metrics, Metrics};
use super::split::train_test_split;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolParams {
    pub test_fraction: f64,
    pub trials: usize,
    pub folds: usize,
    pub seed: u64,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        Self {
            test_fraction: 0.33,
            trials: 10,
            folds: 5,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub train_bags: usize,
    pub test_bags: usize,
    pub chosen: GridPoint,
    pub cv_rmse: f64,
    pub metrics: Metrics,
    pub predictions: Vec<f64>,
    pub test_indices: Vec<usize>,
}

/// Wall-clock seconds per phase of one trial. Not part of the deterministic
/// report.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub grid_search: f64,
    pub refit: f64,
    pub predict: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation over trials; 0 for a single trial.
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Self { mean, std }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub me: Summary,
    pub rmse: Summary,
    pub r2: Summary,
}

impl Aggregate {
    pub fn from_trials(trials: &[TrialResult]) -> Self {
        let pick = |f: fn(&Metrics) -> f64| Summary::of(&trials.iter().map(|t| f(&t.metrics)).collect::<Vec<_>>());
        Self {
            me: pick(|m| m.me),
            rmse: pick(|m| m.rmse),
            r2: pick(|m| m.r2),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub kind: ModelKind,
    pub params: ProtocolParams,
    pub grid: Grid,
    pub trials: Vec<TrialResult>,
    pub aggregate: Aggregate,
    #[serde(skip)]
    pub timings: Vec<PhaseTimings>,
}

/// Repeated hold-out evaluation. Each trial splits bags into train and test
/// with seed `seed + t`, grid-searches on train only, refits the winner on
/// all training bags, and scores the held-out bags.
pub fn run_protocol<'a>(
    data: impl Into<DataRef<'a>>,
    kind: ModelKind,
    grid: &Grid,
    params: &ProtocolParams,
) -> Result<EvalReport> {
    let data = data.into();
    if params.trials == 0 {
        return Err(Error::InvalidParameter("at least one trial is required".into()));
    }
    if params.folds < 2 {
        return Err(Error::InvalidParameter("at least 2 folds are required".into()));
    }
    let (probe_train, _) = train_test_split(data.len(), params.test_fraction, params.seed)?;
    if probe_train.len() < params.folds {
        return Err(Error::InsufficientBags(format!(
            "{} training bags cannot support {} folds",
            probe_train.len(),
            params.folds
        )));
    }

    let outcomes = parallel::map_range(params.trials, |t| -> Result<(TrialResult, PhaseTimings)> {
        let seed = params.seed.wrapping_add(t as u64);
        let (train_idx, test_idx) = train_test_split(data.len(), params.test_fraction, seed)?;
        let train = data.subset(&train_idx);

        let clock = Instant::now();
        let cv = grid_search_cv(train.as_ref(), kind, grid, params.folds, seed)?;
        let grid_search = clock.elapsed().as_secs_f64();

        let clock = Instant::now();
        let model = fit_model(&cv.best.spec(kind, seed), train.as_ref())?;
        let refit = clock.elapsed().as_secs_f64();

        // Held-out bags are touched only from here on.
        let clock = Instant::now();
        let test = data.subset(&test_idx);
        let predictions = model.predict(test.as_ref())?;
        let predict = clock.elapsed().as_secs_f64();
        let metrics = lenient_metrics(test.as_ref().targets(), &predictions)?;

        Ok((
            TrialResult {
                trial: t,
                seed,
                train_bags: train_idx.len(),
                test_bags: test_idx.len(),
                chosen: cv.best,
                cv_rmse: cv.best_rmse,
                metrics,
                predictions,
                test_indices: test_idx,
            },
            PhaseTimings {
                grid_search,
                refit,
                predict,
            },
        ))
    });

    let mut trials = Vec::with_capacity(params.trials);
    let mut timings = Vec::with_capacity(params.trials);
    for outcome in outcomes {
        let (trial, timing) = outcome?;
        trials.push(trial);
        timings.push(timing);
    }
    Ok(EvalReport {
        kind,
        params: params.clone(),
        grid: grid.clone(),
        aggregate: Aggregate::from_trials(&trials),
        trials,
        timings,
    })
}
