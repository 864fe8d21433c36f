//! Regularized least-squares solves shared by every regressor.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::BagGram;

/// Diagonal jitter multipliers (relative to `trace / n`) tried in order when
/// the plain factorization fails.
pub const JITTERS: [f64; 3] = [1e-10, 1e-8, 1e-6];

const REFINEMENT_STEPS: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RidgeSolution {
    /// Dual weights over training bags, or primal weights over features.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("lambda must be positive and finite, got {lambda}")))
    }
}

/// Cholesky of `a`, retrying with escalating diagonal jitter.
fn factor(a: &DMatrix<f64>, base: f64) -> Result<Cholesky<f64, Dyn>> {
    if let Some(c) = Cholesky::new(a.clone()) {
        return Ok(c);
    }
    let mut tried = Vec::with_capacity(JITTERS.len());
    for eps in JITTERS {
        let jitter = eps * base;
        tried.push(jitter);
        let mut shifted = a.clone();
        for i in 0..shifted.nrows() {
            shifted[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::new(shifted) {
            return Ok(c);
        }
    }
    Err(Error::IllConditioned { jitters: tried })
}

/// Solves `a x = b` for symmetric positive definite `a`, polishing the
/// answer with a few steps of iterative refinement against the unjittered
/// matrix.
fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>, jitter_base: f64) -> Result<DVector<f64>> {
    let chol = factor(a, jitter_base)?;
    let mut x = chol.solve(b);
    let mut residual = b - a * &x;
    let mut norm = residual.norm();
    for _ in 0..REFINEMENT_STEPS {
        if norm <= 1e-14 * b.norm() {
            break;
        }
        let candidate = &x + chol.solve(&residual);
        let next = b - a * &candidate;
        let next_norm = next.norm();
        if next_norm >= norm {
            break;
        }
        x = candidate;
        residual = next;
        norm = next_norm;
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::IllConditioned { jitters: JITTERS.iter().map(|e| e * jitter_base).collect() });
    }
    Ok(x)
}

fn trace_scale(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows().max(1) as f64;
    let t = a.trace() / n;
    if t > 0.0 && t.is_finite() {
        t
    } else {
        1.0
    }
}

pub(crate) fn dual_weights(gram: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
    check_lambda(lambda)?;
    if gram.nrows() != gram.ncols() || gram.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "ridge system",
            expected: gram.nrows(),
            got: y.len(),
        });
    }
    let base = trace_scale(gram);
    let mut a = gram.clone();
    for i in 0..a.nrows() {
        a[(i, i)] += lambda;
    }
    solve_spd(&a, y, base)
}

/// `α = (K̃ + λI)⁻¹ y`. No centering happens here; the intercept is 0.
pub fn solve_ridge_dual(gram: &BagGram, y: &[f64], lambda: f64) -> Result<RidgeSolution> {
    let alpha = dual_weights(gram.values(), &DVector::from_column_slice(y), lambda)?;
    Ok(RidgeSolution {
        coefficients: alpha.as_slice().to_vec(),
        intercept: 0.0,
        lambda,
    })
}

/// `w = (ZᵀZ + λI)⁻¹ Zᵀ y`. When there are more features than rows the
/// identical solution `w = Zᵀ (ZZᵀ + λI)⁻¹ y` is used instead, which only needs
/// a rows × rows factorization.
pub(crate) fn primal_weights(z: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
    check_lambda(lambda)?;
    if z.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "ridge design rows",
            expected: z.nrows(),
            got: y.len(),
        });
    }
    if z.ncols() <= z.nrows() {
        let zt = z.transpose();
        let mut a = &zt * z;
        let base = trace_scale(&a);
        for i in 0..a.nrows() {
            a[(i, i)] += lambda;
        }
        solve_spd(&a, &(&zt * y), base)
    } else {
        let gram = z * z.transpose();
        let alpha = dual_weights(&gram, y, lambda)?;
        Ok(z.tr_mul(&alpha))
    }
}
