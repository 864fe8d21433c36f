//! Maximum mean discrepancy between two samples and a permutation test for it.
//!
//! The statistic is the biased (V-statistic) estimate of the squared RKHS
//! distance between the two empirical mean embeddings:
//! `K̃_xx + K̃_yy − 2 K̃_xy`, where each term is a mean of kernel values.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Instances;
use crate::error::{Error, Result};
use crate::kernel::{mean_kernel, RbfParams};
use crate::parallel;

/// Negative round-off up to this magnitude is reported as 0.
pub const CLAMP_TOLERANCE: f64 = 1e-12;

/// Pooled sample size above which the permutation test refuses to build the
/// pooled Gram matrix.
pub const MAX_POOLED: usize = 16_384;

fn clamp(v: f64) -> f64 {
    if (-CLAMP_TOLERANCE..0.0).contains(&v) {
        0.0
    } else {
        v
    }
}

fn check(x: &Instances, y: &Instances) -> Result<()> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::InvalidParameter("MMD needs two nonempty samples".into()));
    }
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            context: "mmd",
            expected: x.dim(),
            got: y.dim(),
        });
    }
    Ok(())
}

pub fn mmd_squared(sample_x: &Instances, sample_y: &Instances, params: &RbfParams) -> Result<f64> {
    check(sample_x, sample_y)?;
    let xx = mean_kernel(sample_x, sample_x, params);
    let yy = mean_kernel(sample_y, sample_y, params);
    let xy = mean_kernel(sample_x, sample_y, params);
    Ok(clamp(xx + yy - 2.0 * xy))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PermutationTest {
    pub statistic: f64,
    pub null_p95: f64,
    pub null_p99: f64,
    pub p_value: f64,
    pub permutations: usize,
    pub sigma: f64,
}

/// Nearest-rank quantile of an ascending slice.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Null and observed values are compared after snapping round-off-sized
/// magnitudes to 0, so that ties at 0 count as ties.
fn snap(v: f64) -> f64 {
    if v.abs() <= CLAMP_TOLERANCE {
        0.0
    } else {
        v
    }
}

/// `wᵀ K w` over a row-major symmetric matrix.
fn quadratic_form(gram: &[f64], n: usize, w: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..n {
        let row = &gram[i * n..(i + 1) * n];
        let mut acc = 0.0;
        for (k, wj) in row.iter().zip(w) {
            acc += k * wj;
        }
        total += w[i] * acc;
    }
    total
}

/// Permutation test for equality of distributions. Labels are shuffled
/// `permutations` times (permutation `p` draws from RNG stream `p`), the null
/// distribution of the statistic is recorded, and
/// `p = (1 + #{null ≥ observed}) / (1 + permutations)`.
pub fn mmd_permutation_test(
    sample_x: &Instances,
    sample_y: &Instances,
    params: &RbfParams,
    permutations: usize,
    seed: u64,
) -> Result<PermutationTest> {
    check(sample_x, sample_y)?;
    if permutations == 0 {
        return Err(Error::InvalidParameter("need at least one permutation".into()));
    }
    let (nx, ny) = (sample_x.len(), sample_y.len());
    let n = nx + ny;
    if n > MAX_POOLED {
        return Err(Error::InvalidParameter(format!(
            "pooled sample of {n} points exceeds the permutation-test limit of {MAX_POOLED}"
        )));
    }
    let pooled: Vec<&[f64]> = sample_x.rows().chain(sample_y.rows()).collect();
    let upper = parallel::map_range(n, |i| {
        pooled[i..]
            .iter()
            .map(|y| params.eval_unchecked(pooled[i], y))
            .collect::<Vec<_>>()
    });
    let mut gram = vec![0.0; n * n];
    for (i, row) in upper.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            let j = i + off;
            gram[i * n + j] = v;
            gram[j * n + i] = v;
        }
    }

    let (wx, wy) = (1.0 / nx as f64, -1.0 / ny as f64);
    let labels: Vec<f64> = (0..n).map(|i| if i < nx { wx } else { wy }).collect();
    let observed = snap(quadratic_form(&gram, n, &labels));

    let mut null = parallel::map_range(permutations, |p| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(p as u64);
        let mut w = labels.clone();
        w.shuffle(&mut rng);
        snap(quadratic_form(&gram, n, &w))
    });
    let exceed = null.iter().filter(|&&v| v >= observed).count();
    null.sort_by(f64::total_cmp);
    Ok(PermutationTest {
        statistic: mmd_squared(sample_x, sample_y, params)?,
        null_p95: quantile(&null, 0.95),
        null_p99: quantile(&null, 0.99),
        p_value: (1 + exceed) as f64 / (1 + permutations) as f64,
        permutations,
        sigma: params.sigma(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn sample(seed: u64, n: usize, shift: f64) -> Instances {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Instances::new(2, (0..2 * n).map(|_| rng.random_range(-1.0..1.0) + shift).collect()).unwrap()
    }

    #[test]
    fn identical_samples_give_zero() {
        let x = sample(1, 40, 0.0);
        let p = RbfParams::new(0.5).unwrap();
        assert!(mmd_squared(&x, &x, &p).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn symmetric_and_nonnegative() {
        let p = RbfParams::new(0.7).unwrap();
        for s in 0..10 {
            let x = sample(s, 20, 0.0);
            let y = sample(100 + s, 15, 0.1 * s as f64);
            let a = mmd_squared(&x, &y, &p).unwrap();
            let b = mmd_squared(&y, &x, &p).unwrap();
            assert!(a >= 0.0);
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn quadratic_form_agrees_with_direct_statistic() {
        let p = RbfParams::new(0.9).unwrap();
        let x = sample(3, 30, 0.0);
        let y = sample(4, 25, 0.4);
        let direct = mmd_squared(&x, &y, &p).unwrap();
        let t = mmd_permutation_test(&x, &y, &p, 20, 0).unwrap();
        assert!((direct - t.statistic).abs() <= 1e-10);
    }

    #[test]
    fn permutation_test_is_seed_deterministic() {
        let p = RbfParams::new(0.9).unwrap();
        let x = sample(5, 30, 0.0);
        let y = sample(6, 30, 0.2);
        let a = mmd_permutation_test(&x, &y, &p, 50, 9).unwrap();
        let b = mmd_permutation_test(&x, &y, &p, 50, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.null_p95 <= a.null_p99);
    }

    #[test]
    fn identical_samples_have_unit_p_value() {
        let p = RbfParams::new(0.9).unwrap();
        let x = sample(7, 25, 0.0);
        let t = mmd_permutation_test(&x, &x, &p, 30, 1).unwrap();
        assert_eq!(t.statistic, 0.0);
        assert_eq!(t.p_value, 1.0);
    }

    #[test]
    fn rejects_bad_input() {
        let p = RbfParams::new(1.0).unwrap();
        let x = sample(1, 5, 0.0);
        let y = Instances::new(3, vec![0.0; 3]).unwrap();
        assert!(mmd_squared(&x, &y, &p).is_err());
        assert!(mmd_permutation_test(&x, &x, &p, 0, 0).is_err());
    }
}
