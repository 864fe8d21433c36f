use serde::{Deserialize, Serialize};

use crate::data::DataRef;
use crate::error::{Error, Result};
use crate::parallel;
use crate::regress::{reference_sigmas, ModelKind, ModelSpec, Prepared};

use super::metrics::error_metrics;
use super::split::kfold_split;

/// Hyperparameter grid. Bandwidths are multiples of a per-dataset reference
/// (the median heuristic); kinds that do not use a bandwidth or a feature
/// count ignore those axes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grid {
    pub lambdas: Vec<f64>,
    pub sigma_scales: Vec<f64>,
    pub features: Vec<usize>,
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            lambdas: (-6..=2).map(|e| 10f64.powi(e)).collect(),
            sigma_scales: (-3..=3).map(|e| 2f64.powi(e)).collect(),
            features: vec![128, 512, 2048],
        }
    }
}

impl Grid {
    fn validate(&self, kind: ModelKind) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(format!("grid has no valid {what}")));
        if self.lambdas.is_empty() || self.lambdas.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return bad("lambdas");
        }
        if kind.uses_sigma() && (self.sigma_scales.is_empty() || self.sigma_scales.iter().any(|s| !(s.is_finite() && *s > 0.0))) {
            return bad("sigma scales");
        }
        if kind.uses_features() && (self.features.is_empty() || self.features.contains(&0)) {
            return bad("feature counts");
        }
        Ok(())
    }

    fn scales(&self, kind: ModelKind) -> Vec<Option<f64>> {
        if kind.uses_sigma() {
            self.sigma_scales.iter().copied().map(Some).collect()
        } else {
            vec![None]
        }
    }

    fn feature_counts(&self, kind: ModelKind) -> Vec<Option<usize>> {
        if kind.uses_features() {
            self.features.iter().copied().map(Some).collect()
        } else {
            vec![None]
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub lambda: f64,
    pub sigma_scale: Option<f64>,
    /// Absolute bandwidths: `sigma_scale` times the reference, per source
    /// for MDR.
    pub sigma: Vec<f64>,
    pub features: Option<usize>,
}

impl GridPoint {
    pub fn spec(&self, kind: ModelKind, seed: u64) -> ModelSpec {
        ModelSpec {
            kind,
            lambda: self.lambda,
            sigma: self.sigma.clone(),
            features: self.features,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvEntry {
    pub point: GridPoint,
    /// Mean validation RMSE over folds; `None` when any fold failed.
    pub mean_rmse: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub best: GridPoint,
    pub best_rmse: f64,
    pub reference_sigma: Vec<f64>,
    pub table: Vec<CvEntry>,
}

/// Relative slack under which two mean RMSEs count as tied.
const TIE_TOLERANCE: f64 = 1e-12;

/// k-fold grid search at the bag level. Normalizers are refit on each fold's
/// training bags; kernel or feature matrices are built once per
/// (fold, bandwidth, feature count) and reused for every λ.
pub fn grid_search_cv<'a>(
    train: impl Into<DataRef<'a>>,
    kind: ModelKind,
    grid: &Grid,
    k: usize,
    seed: u64,
) -> Result<CvResult> {
    let train = train.into();
    grid.validate(kind)?;
    let folds = kfold_split(train.len(), k, seed)?;
    if k < 2 {
        return Err(Error::InvalidParameter("cross-validation needs at least 2 folds".into()));
    }

    let normalized = train.normalized(&train.fit_normalizers()?)?;
    let reference = reference_sigmas(kind, normalized.as_ref())?;
    drop(normalized);

    let scales = grid.scales(kind);
    let counts = grid.feature_counts(kind);
    let mut tasks = Vec::with_capacity(k * scales.len() * counts.len());
    for fold in 0..k {
        for &s in &scales {
            for &d in &counts {
                tasks.push((fold, s, d));
            }
        }
    }

    let fold_data: Vec<(Vec<usize>, &[usize])> = folds
        .iter()
        .map(|val| {
            let train_idx = folds.iter().filter(|other| !std::ptr::eq(*other, val)).flatten().copied().collect();
            (train_idx, val.as_slice())
        })
        .collect();

    // One vector of per-λ RMSEs (or one error) per task.
    let outcomes: Vec<std::result::Result<Vec<std::result::Result<f64, String>>, String>> =
        parallel::map_slice(&tasks, |&(fold, scale, features)| {
            let (train_idx, val_idx) = &fold_data[fold];
            let sigma: Vec<f64> = scale.map(|s| reference.iter().map(|r| r * s).collect()).unwrap_or_default();
            let spec = ModelSpec {
                kind,
                lambda: grid.lambdas[0],
                sigma,
                features,
                seed,
            };
            let run = || -> Result<Vec<std::result::Result<f64, String>>> {
                let fit_part = train.subset(train_idx);
                let val_part = train.subset(val_idx);
                let norms = fit_part.as_ref().fit_normalizers()?;
                let fit_part = fit_part.as_ref().normalized(&norms)?;
                let val_part = val_part.as_ref().normalized(&norms)?;
                let prepared = Prepared::new(kind, fit_part.as_ref(), &spec)?;
                let design = prepared.test_design(val_part.as_ref())?;
                let y_val = val_part.as_ref().targets();
                Ok(grid
                    .lambdas
                    .iter()
                    .map(|&lambda| {
                        prepared
                            .solve(lambda)
                            .and_then(|s| error_metrics(y_val, &Prepared::predict_with(&design, &s)))
                            .map(|m| m.rmse)
                            .map_err(|e| format!("fold {fold}: {e}"))
                    })
                    .collect())
            };
            run().map_err(|e| format!("fold {fold}: {e}"))
        });

    let mut table = Vec::with_capacity(scales.len() * counts.len() * grid.lambdas.len());
    for (si, &scale) in scales.iter().enumerate() {
        for (di, &features) in counts.iter().enumerate() {
            for (li, &lambda) in grid.lambdas.iter().enumerate() {
                let mut rmses = Vec::with_capacity(k);
                let mut failure = None;
                for fold in 0..k {
                    let task = (fold * scales.len() + si) * counts.len() + di;
                    match &outcomes[task] {
                        Ok(per_lambda) => match &per_lambda[li] {
                            Ok(r) if r.is_finite() => rmses.push(*r),
                            Ok(r) => failure = Some(format!("fold {fold}: non-finite RMSE {r}")),
                            Err(e) => failure = Some(e.clone()),
                        },
                        Err(e) => failure = Some(e.clone()),
                    }
                    if failure.is_some() {
                        break;
                    }
                }
                let point = GridPoint {
                    lambda,
                    sigma_scale: scale,
                    sigma: scale.map(|s| reference.iter().map(|r| r * s).collect()).unwrap_or_default(),
                    features,
                };
                table.push(CvEntry {
                    point,
                    mean_rmse: failure.is_none().then(|| rmses.iter().sum::<f64>() / k as f64),
                    failure,
                });
            }
        }
    }

    let (best, best_rmse) = select(&table).ok_or_else(|| {
        let reasons: Vec<&str> = table.iter().filter_map(|e| e.failure.as_deref()).take(3).collect();
        Error::AllGridPointsFailed(reasons.join("; "))
    })?;
    Ok(CvResult {
        best: best.clone(),
        best_rmse,
        reference_sigma: reference,
        table,
    })
}

/// Lowest mean RMSE; near-ties go to larger λ, then larger σ, then fewer
/// features.
fn select(table: &[CvEntry]) -> Option<(&GridPoint, f64)> {
    let min = table.iter().filter_map(|e| e.mean_rmse).fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return None;
    }
    let limit = min + TIE_TOLERANCE * min.abs();
    table
        .iter()
        .filter(|e| e.mean_rmse.is_some_and(|r| r <= limit))
        .max_by(|a, b| {
            let (p, q) = (&a.point, &b.point);
            p.lambda
                .total_cmp(&q.lambda)
                .then(p.sigma_scale.unwrap_or(0.0).total_cmp(&q.sigma_scale.unwrap_or(0.0)))
                .then(q.features.cmp(&p.features))
        })
        .map(|e| (&e.point, e.mean_rmse.unwrap_or(min)))
}
