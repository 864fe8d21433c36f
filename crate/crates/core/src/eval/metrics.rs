use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::pairwise_sum;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Mean of `ŷ − y`.
    pub me: f64,
    pub rmse: f64,
    pub r2: f64,
}

fn check_lengths(y_true: &[f64], y_pred: &[f64]) -> Result<()> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch {
            expected: y_true.len(),
            got: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(Error::InvalidParameter("metrics need at least one value".into()));
    }
    Ok(())
}

/// ME and RMSE only; R² is left as NaN. Used where a test split can
/// legitimately hold a single bag.
pub(crate) fn error_metrics(y_true: &[f64], y_pred: &[f64]) -> Result<Metrics> {
    check_lengths(y_true, y_pred)?;
    let n = y_true.len() as f64;
    let diff: Vec<f64> = y_pred.iter().zip(y_true).map(|(p, t)| p - t).collect();
    let sq: Vec<f64> = diff.iter().map(|d| d * d).collect();
    Ok(Metrics {
        me: pairwise_sum(&diff) / n,
        rmse: (pairwise_sum(&sq) / n).sqrt(),
        r2: f64::NAN,
    })
}

/// Like [`compute_metrics`] but R² is NaN instead of an error on constant
/// targets.
pub(crate) fn lenient_metrics(y_true: &[f64], y_pred: &[f64]) -> Result<Metrics> {
    match compute_metrics(y_true, y_pred) {
        Err(Error::ConstantTargets) => error_metrics(y_true, y_pred),
        other => other,
    }
}

pub fn compute_metrics(y_true: &[f64], y_pred: &[f64]) -> Result<Metrics> {
    let mut m = error_metrics(y_true, y_pred)?;
    let n = y_true.len() as f64;
    let y_mean = pairwise_sum(y_true) / n;
    let tot: Vec<f64> = y_true.iter().map(|t| (t - y_mean).powi(2)).collect();
    let ss_tot = pairwise_sum(&tot);
    if ss_tot == 0.0 {
        return Err(Error::ConstantTargets);
    }
    let ss_res = m.rmse * m.rmse * n;
    m.r2 = 1.0 - ss_res / ss_tot;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let y = [1.0, 2.0, 5.0];
        let m = compute_metrics(&y, &y).unwrap();
        assert_eq!((m.me, m.rmse, m.r2), (0.0, 0.0, 1.0));
    }

    #[test]
    fn constant_mean_prediction_scores_zero() {
        let y = [1.0, 2.0, 6.0];
        let m = compute_metrics(&y, &[3.0; 3]).unwrap();
        assert!(m.r2.abs() <= 1e-15);
        let m = compute_metrics(&[0.0, 2.0], &[1.0, 1.0]).unwrap();
        assert_eq!((m.me, m.rmse, m.r2), (0.0, 1.0, 0.0));
    }

    #[test]
    fn errors() {
        assert!(matches!(compute_metrics(&[1.0], &[1.0, 2.0]), Err(Error::LengthMismatch { .. })));
        assert!(matches!(compute_metrics(&[2.0, 2.0], &[1.0, 2.0]), Err(Error::ConstantTargets)));
        assert!(compute_metrics(&[], &[]).is_err());
        let m = lenient_metrics(&[2.0], &[1.0]).unwrap();
        assert_eq!(m.me, -1.0);
        assert!(m.r2.is_nan());
    }
}
