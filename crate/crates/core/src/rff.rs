//! Random Fourier features for the RBF kernel.
//!
//! Projection directions `w_i ~ N(0, σ⁻² I)` give the explicit map
//! `z(x) = D^{-1/2} [cos(w_1ᵀx), sin(w_1ᵀx), …, cos(w_Dᵀx), sin(w_Dᵀx)]`
//! whose dot products approximate `exp(-‖x - x'‖² / (2σ²))`. The cos/sin pair
//! for one direction sits in adjacent slots and `‖z(x)‖ = 1`.
//!
//! Column `i` of the basis is drawn from ChaCha stream `i` of the seed, so a
//! basis is rebuilt bit-exactly from `(dim, features, sigma, seed)` no matter
//! how many threads sample it, and the first `D` columns of a larger basis
//! equal the basis with `D` features.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::Bag;
use crate::error::{Error, Result};
use crate::parallel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BasisRecipe", into = "BasisRecipe")]
pub struct FourierBasis {
    dim: usize,
    features: usize,
    sigma: f64,
    seed: u64,
    /// `features` columns of length `dim`, each contiguous.
    weights: Vec<f64>,
}

/// What gets persisted: the basis is resampled on load.
#[derive(Serialize, Deserialize)]
struct BasisRecipe {
    dim: usize,
    features: usize,
    sigma: f64,
    seed: u64,
}

impl TryFrom<BasisRecipe> for FourierBasis {
    type Error = Error;
    fn try_from(r: BasisRecipe) -> Result<Self> {
        sample_basis(r.dim, r.features, r.sigma, r.seed)
    }
}

impl From<FourierBasis> for BasisRecipe {
    fn from(b: FourierBasis) -> Self {
        BasisRecipe {
            dim: b.dim,
            features: b.features,
            sigma: b.sigma,
            seed: b.seed,
        }
    }
}

pub fn sample_basis(dim: usize, features: usize, sigma: f64, seed: u64) -> Result<FourierBasis> {
    if dim == 0 || features == 0 {
        return Err(Error::InvalidParameter("basis needs dim ≥ 1 and features ≥ 1".into()));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("basis sigma must be positive, got {sigma}")));
    }
    let columns = parallel::map_range(features, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        (0..dim)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z / sigma
            })
            .collect::<Vec<_>>()
    });
    Ok(FourierBasis {
        dim,
        features,
        sigma,
        seed,
        weights: columns.concat(),
    })
}

impl FourierBasis {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of random directions `D`; feature vectors have length `2D`.
    pub fn features(&self) -> usize {
        self.features
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn direction(&self, i: usize) -> &[f64] {
        &self.weights[i * self.dim..(i + 1) * self.dim]
    }

    fn scale(&self) -> f64 {
        1.0 / (self.features as f64).sqrt()
    }

    /// Mean of `[cos, sin]` of the projections of `bag` onto rows
    /// `offset..offset + bag.dim()` of every direction, interleaved and
    /// unscaled.
    pub(crate) fn mean_phases(&self, bag: &Bag, offset: usize) -> Vec<f64> {
        let d = bag.dim();
        debug_assert!(offset + d <= self.dim);
        let mut sums = vec![0.0; 2 * self.features];
        for x in bag.instances().rows() {
            for i in 0..self.features {
                let w = &self.direction(i)[offset..offset + d];
                let mut t = 0.0;
                for (a, b) in w.iter().zip(x) {
                    t += a * b;
                }
                let (s, c) = t.sin_cos();
                sums[2 * i] += c;
                sums[2 * i + 1] += s;
            }
        }
        let n = bag.len() as f64;
        for v in sums.iter_mut() {
            *v /= n;
        }
        sums
    }

    pub(crate) fn scale_phases(&self, mut phases: Vec<f64>) -> Vec<f64> {
        let s = self.scale();
        for v in phases.iter_mut() {
            *v *= s;
        }
        phases
    }
}

fn check_dim(basis: &FourierBasis, got: usize) -> Result<()> {
    if basis.dim == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context: "Fourier basis",
            expected: basis.dim,
            got,
        })
    }
}

pub fn feature_map(x: &[f64], basis: &FourierBasis) -> Result<Vec<f64>> {
    check_dim(basis, x.len())?;
    let s = basis.scale();
    let mut z = Vec::with_capacity(2 * basis.features);
    for i in 0..basis.features {
        let mut t = 0.0;
        for (a, b) in basis.direction(i).iter().zip(x) {
            t += a * b;
        }
        let (sin, cos) = t.sin_cos();
        z.push(cos * s);
        z.push(sin * s);
    }
    Ok(z)
}

/// Explicit mean embedding of a bag: the average of `z(x)` over its instances.
pub fn bag_mean_features(bag: &Bag, basis: &FourierBasis) -> Result<Vec<f64>> {
    check_dim(basis, bag.dim())?;
    Ok(basis.scale_phases(basis.mean_phases(bag, 0)))
}

/// Mean features for many bags, one row per bag.
pub fn bag_mean_feature_rows(bags: &[Bag], basis: &FourierBasis) -> Result<Vec<Vec<f64>>> {
    for b in bags {
        check_dim(basis, b.dim())?;
    }
    Ok(parallel::map_slice(bags, |b| basis.scale_phases(basis.mean_phases(b, 0))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{bag_mean_kernel_entry, rbf_kernel, RbfParams};
    use rand::Rng;

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn sampling_is_deterministic_and_nested() {
        let a = sample_basis(3, 64, 1.3, 11).unwrap();
        let b = sample_basis(3, 64, 1.3, 11).unwrap();
        assert_eq!(a.weights().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                   b.weights().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        let big = sample_basis(3, 256, 1.3, 11).unwrap();
        assert_eq!(&big.weights()[..3 * 64], a.weights());
        assert_ne!(sample_basis(3, 64, 1.3, 12).unwrap().weights(), a.weights());
    }

    #[test]
    fn entry_variance_matches_inverse_sigma_squared() {
        let basis = sample_basis(1, 100_000, 1.0, 5).unwrap();
        let w = basis.weights();
        let n = w.len() as f64;
        let mean = w.iter().sum::<f64>() / n;
        let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!((var - 1.0).abs() <= 0.02, "variance {var}");
    }

    #[test]
    fn large_sigma_concentrates_entries() {
        let sigma = 50.0;
        let basis = sample_basis(2, 5000, sigma, 5).unwrap();
        let w = basis.weights();
        let std = (w.iter().map(|v| v * v).sum::<f64>() / w.len() as f64).sqrt();
        assert!(std <= 1.05 / sigma);
    }

    #[test]
    fn feature_map_has_unit_norm_and_zero_layout() {
        let basis = sample_basis(4, 37, 0.8, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-5.0..5.0)).collect();
            let z = feature_map(&x, &basis).unwrap();
            assert_eq!(z.len(), 74);
            assert!((dot(&z, &z) - 1.0).abs() <= 1e-12);
        }
        let z0 = feature_map(&[0.0; 4], &basis).unwrap();
        let s = 1.0 / 37f64.sqrt();
        for pair in z0.chunks(2) {
            assert_eq!(pair[0], s);
            assert_eq!(pair[1], 0.0);
        }
        assert!(feature_map(&[0.0; 3], &basis).is_err());
    }

    #[test]
    fn feature_dot_approximates_kernel() {
        let sigma = 1.2;
        let basis = sample_basis(3, 4096, sigma, 21).unwrap();
        let p = RbfParams::new(sigma).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.5..1.5)).collect();
            let y: Vec<f64> = (0..3).map(|_| rng.random_range(-1.5..1.5)).collect();
            let approx = dot(&feature_map(&x, &basis).unwrap(), &feature_map(&y, &basis).unwrap());
            assert!((approx - rbf_kernel(&x, &y, &p).unwrap()).abs() <= 0.05);
        }
    }

    #[test]
    fn bag_means() {
        let basis = sample_basis(2, 128, 1.0, 2).unwrap();
        let single = Bag::from_rows("s", &[[0.3, -0.7]]).unwrap();
        assert_eq!(
            bag_mean_features(&single, &basis).unwrap(),
            feature_map(&[0.3, -0.7], &basis).unwrap()
        );
        let repeated = Bag::from_rows("r", &[[0.3, -0.7]; 7]).unwrap();
        let m = bag_mean_features(&repeated, &basis).unwrap();
        let z = feature_map(&[0.3, -0.7], &basis).unwrap();
        assert!(m.iter().zip(&z).all(|(a, b)| (a - b).abs() <= 1e-12));

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<[f64; 2]> = (0..9).map(|_| [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]).collect();
        let bag = Bag::from_rows("b", &rows).unwrap();
        let m = bag_mean_features(&bag, &basis).unwrap();
        assert!(dot(&m, &m).sqrt() <= 1.0 + 1e-12);
    }

    #[test]
    fn bag_mean_dot_approximates_mean_kernel() {
        let sigma = 1.0;
        let basis = sample_basis(2, 4096, sigma, 8).unwrap();
        let p = RbfParams::new(sigma).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut mk = |n: usize| {
            let rows: Vec<[f64; 2]> = (0..n).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
            Bag::from_rows("b", &rows).unwrap()
        };
        let (a, b) = (mk(5), mk(8));
        let approx = dot(&bag_mean_features(&a, &basis).unwrap(), &bag_mean_features(&b, &basis).unwrap());
        let exact = bag_mean_kernel_entry(&a, &b, &p).unwrap();
        assert!((approx - exact).abs() <= 0.05);
    }

    #[test]
    fn recipe_round_trip_rebuilds_basis() {
        let basis = sample_basis(3, 16, 0.5, 77).unwrap();
        let json = serde_json::to_string(&basis).unwrap();
        assert!(!json.contains("weights"));
        let back: FourierBasis = serde_json::from_str(&json).unwrap();
        assert_eq!(back, basis);
    }
}
