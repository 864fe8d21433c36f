//! RBF kernel evaluation and mean-embedding Gram matrices.
//!
//! The kernel is `k(x, x') = exp(-‖x - x'‖² / (2σ²))`; [`RbfParams::gamma`]
//! gives the equivalent `γ = 1/(2σ²)` form. The dot product between the
//! empirical mean embeddings of two bags is the average of all instance kernel
//! values between them, so bag-level Gram matrices never need the (infinite)
//! feature map.
//!
//! Bag entries are accumulated tile by tile: at most `TILE × TILE` kernel
//! values exist at any time, each tile is reduced with pairwise summation and
//! the tile sums are reduced the same way. The association order depends only
//! on the bag sizes, so results are reproducible regardless of thread count.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{Bag, Instances, MultiSourceDataset};
use crate::error::{Error, Result};
use crate::numeric::{pairwise_sum, squared_distance};
use crate::parallel;

/// Rows per side of one kernel tile.
pub const TILE: usize = 64;

/// Largest number of points the median heuristic looks at.
pub const MEDIAN_SUBSAMPLE: usize = 2000;

/// RBF length-scale σ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRbf", into = "RawRbf")]
pub struct RbfParams {
    sigma: f64,
}

#[derive(Serialize, Deserialize)]
struct RawRbf {
    sigma: f64,
}

impl TryFrom<RawRbf> for RbfParams {
    type Error = Error;
    fn try_from(raw: RawRbf) -> Result<Self> {
        RbfParams::new(raw.sigma)
    }
}

impl From<RbfParams> for RawRbf {
    fn from(p: RbfParams) -> Self {
        RawRbf { sigma: p.sigma }
    }
}

impl RbfParams {
    pub fn new(sigma: f64) -> Result<Self> {
        if sigma.is_finite() && sigma > 0.0 {
            Ok(Self { sigma })
        } else {
            Err(Error::InvalidParameter(format!("RBF sigma must be positive and finite, got {sigma}")))
        }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn gamma(&self) -> f64 {
        1.0 / (2.0 * self.sigma * self.sigma)
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        (-squared_distance(x, y) * self.gamma()).exp()
    }
}

fn check_dim(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { context, expected, got })
    }
}

pub fn rbf_kernel(x: &[f64], x_prime: &[f64], params: &RbfParams) -> Result<f64> {
    check_dim("rbf_kernel", x.len(), x_prime.len())?;
    Ok(params.eval_unchecked(x, x_prime))
}

/// Instance-level kernel matrix between the rows of `a` and the rows of `b`.
pub fn cross_gram(a: &Instances, b: &Instances, params: &RbfParams) -> Result<DMatrix<f64>> {
    check_dim("cross_gram", a.dim(), b.dim())?;
    let rows = parallel::map_range(a.len(), |i| {
        let x = a.row(i);
        b.rows().map(|y| params.eval_unchecked(x, y)).collect::<Vec<_>>()
    });
    Ok(DMatrix::from_fn(a.len(), b.len(), |i, j| rows[i][j]))
}

/// Mean of all kernel values between two instance sets, tile by tile.
pub(crate) fn mean_kernel(a: &Instances, b: &Instances, params: &RbfParams) -> f64 {
    let gamma = params.gamma();
    let (n, m) = (a.len(), b.len());
    let mut tile = [0.0f64; TILE * TILE];
    let mut tile_sums = Vec::with_capacity(n.div_ceil(TILE) * m.div_ceil(TILE));
    for i0 in (0..n).step_by(TILE) {
        let i1 = (i0 + TILE).min(n);
        for j0 in (0..m).step_by(TILE) {
            let j1 = (j0 + TILE).min(m);
            let mut k = 0;
            for i in i0..i1 {
                let x = a.row(i);
                for j in j0..j1 {
                    tile[k] = (-squared_distance(x, b.row(j)) * gamma).exp();
                    k += 1;
                }
            }
            tile_sums.push(pairwise_sum(&tile[..k]));
        }
    }
    pairwise_sum(&tile_sums) / (n as f64 * m as f64)
}

/// Dot product of the empirical mean embeddings of two bags.
pub fn bag_mean_kernel_entry(bag_b: &Bag, bag_bp: &Bag, params: &RbfParams) -> Result<f64> {
    check_dim("bag_mean_kernel_entry", bag_b.dim(), bag_bp.dim())?;
    Ok(mean_kernel(bag_b.instances(), bag_bp.instances(), params))
}

/// Symmetric B × B matrix of mean-embedding dot products.
#[derive(Clone, Debug, PartialEq)]
pub struct BagGram {
    values: DMatrix<f64>,
}

impl BagGram {
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[cfg(test)]
    pub(crate) fn from_matrix(values: DMatrix<f64>) -> Self {
        Self { values }
    }
}

fn shared_dim(bags: &[Bag], context: &'static str) -> Result<usize> {
    let dim = bags.first().map(Bag::dim).unwrap_or(0);
    for b in bags {
        check_dim(context, dim, b.dim())?;
    }
    Ok(dim)
}

/// Mean-embedding Gram matrix of a list of bags. Only the upper triangle is
/// computed; the lower triangle mirrors it, so the result is exactly symmetric.
pub fn bag_gram(bags: &[Bag], params: &RbfParams) -> Result<BagGram> {
    shared_dim(bags, "bag_gram")?;
    let n = bags.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let entries = parallel::map_slice(&pairs, |&(i, j)| {
        mean_kernel(bags[i].instances(), bags[j].instances(), params)
    });
    let mut values = DMatrix::zeros(n, n);
    for (&(i, j), v) in pairs.iter().zip(entries) {
        values[(i, j)] = v;
        values[(j, i)] = v;
    }
    Ok(BagGram { values })
}

/// `B_test × B_train` matrix of mean-embedding dot products.
pub fn cross_bag_gram(test: &[Bag], train: &[Bag], params: &RbfParams) -> Result<DMatrix<f64>> {
    let d_train = shared_dim(train, "cross_bag_gram")?;
    if !test.is_empty() {
        check_dim("cross_bag_gram", d_train, shared_dim(test, "cross_bag_gram")?)?;
    }
    let cols = train.len();
    let entries = parallel::map_range(test.len() * cols, |k| {
        mean_kernel(test[k / cols].instances(), train[k % cols].instances(), params)
    });
    Ok(DMatrix::from_fn(test.len(), cols, |i, j| entries[i * cols + j]))
}

fn check_source_params(sources: usize, params: &[RbfParams]) -> Result<()> {
    check_dim("kernel parameters per source", sources, params.len())
}

/// Direct-sum kernel: the sum over sources of each source's bag Gram matrix.
pub fn multisource_bag_gram(data: &MultiSourceDataset, params: &[RbfParams]) -> Result<BagGram> {
    check_source_params(data.num_sources(), params)?;
    let mut total = DMatrix::zeros(data.len(), data.len());
    for (source, p) in data.sources().iter().zip(params) {
        total += bag_gram(source.bags(), p)?.values;
    }
    Ok(BagGram { values: total })
}

pub fn multisource_cross_bag_gram(
    test: &MultiSourceDataset,
    train: &MultiSourceDataset,
    params: &[RbfParams],
) -> Result<DMatrix<f64>> {
    check_source_params(train.num_sources(), params)?;
    check_source_params(test.num_sources(), params)?;
    let mut total = DMatrix::zeros(test.len(), train.len());
    for ((t, s), p) in test.sources().iter().zip(train.sources()).zip(params) {
        total += cross_bag_gram(t.bags(), s.bags(), p)?;
    }
    Ok(total)
}

/// Median pairwise Euclidean distance between points. At most
/// [`MEDIAN_SUBSAMPLE`] evenly spaced points are used. Falls back to the mean
/// distance, then to 1, when the median is zero.
pub fn median_heuristic<'a, I>(points: I) -> f64
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let all: Vec<&[f64]> = points.into_iter().collect();
    let chosen: Vec<&[f64]> = if all.len() > MEDIAN_SUBSAMPLE {
        (0..MEDIAN_SUBSAMPLE)
            .map(|i| all[i * all.len() / MEDIAN_SUBSAMPLE])
            .collect()
    } else {
        all
    };
    let n = chosen.len();
    if n < 2 {
        return 1.0;
    }
    let mut dists: Vec<f64> = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            dists.push(squared_distance(chosen[i], chosen[j]).sqrt());
        }
    }
    let mid = dists.len() / 2;
    let (_, median, _) = dists.select_nth_unstable_by(mid, f64::total_cmp);
    let median = *median;
    if median > 0.0 {
        return median;
    }
    let mean = pairwise_sum(&dists) / dists.len() as f64;
    if mean > 0.0 {
        mean
    } else {
        1.0
    }
}

/// Median heuristic over every instance pooled across `bags`.
pub fn median_heuristic_bags(bags: &[Bag]) -> f64 {
    median_heuristic(bags.iter().flat_map(|b| b.instances().rows()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_bag(rng: &mut ChaCha8Rng, id: &str, n: usize, d: usize) -> Bag {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        Bag::from_rows(id, &rows).unwrap()
    }

    // Independent scalar oracle: explicit loop, explicit exponent.
    fn oracle_k(x: &[f64], y: &[f64], sigma: f64) -> f64 {
        let mut s = 0.0;
        for k in 0..x.len() {
            s += (x[k] - y[k]).powi(2);
        }
        (-s / (2.0 * sigma * sigma)).exp()
    }

    fn oracle_entry(a: &Bag, b: &Bag, sigma: f64) -> f64 {
        let mut s = 0.0;
        for x in a.instances().rows() {
            for y in b.instances().rows() {
                s += oracle_k(x, y, sigma);
            }
        }
        s / (a.len() * b.len()) as f64
    }

    #[test]
    fn rbf_basic_values() {
        let p = RbfParams::new(0.7).unwrap();
        assert_eq!(rbf_kernel(&[1.5, -2.0], &[1.5, -2.0], &p).unwrap(), 1.0);
        let v = rbf_kernel(&[0.0], &[0.7 * 2f64.sqrt()], &p).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
        assert!(rbf_kernel(&[0.0], &[0.0, 1.0], &p).is_err());
        assert!(RbfParams::new(0.0).is_err());
        assert!(RbfParams::new(f64::INFINITY).is_err());
    }

    #[test]
    fn rbf_matches_scalar_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let d = rng.random_range(1..6);
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
            let y: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
            let sigma = rng.random_range(0.2..3.0);
            let p = RbfParams::new(sigma).unwrap();
            assert!((rbf_kernel(&x, &y, &p).unwrap() - oracle_k(&x, &y, sigma)).abs() <= 1e-14);
        }
    }

    #[test]
    fn cross_gram_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = RbfParams::new(1.3).unwrap();
        let one = random_bag(&mut rng, "a", 1, 3);
        let g = cross_gram(one.instances(), one.instances(), &p).unwrap();
        assert_eq!(g.shape(), (1, 1));
        assert_eq!(g[(0, 0)], 1.0);

        let a = random_bag(&mut rng, "a", 7, 3);
        let b = random_bag(&mut rng, "b", 5, 3);
        let ab = cross_gram(a.instances(), b.instances(), &p).unwrap();
        let ba = cross_gram(b.instances(), a.instances(), &p).unwrap();
        assert_eq!(ab.shape(), (7, 5));
        for i in 0..7 {
            for j in 0..5 {
                let o = oracle_k(a.instances().row(i), b.instances().row(j), 1.3);
                assert!((ab[(i, j)] - o).abs() <= 1e-12);
                assert!((ab[(i, j)] - ba[(j, i)]).abs() <= 1e-15);
            }
        }
        let c = random_bag(&mut rng, "c", 2, 2);
        assert!(cross_gram(a.instances(), c.instances(), &p).is_err());
    }

    #[test]
    fn bag_entry_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = RbfParams::new(0.9).unwrap();
        let x = random_bag(&mut rng, "x", 1, 2);
        let y = random_bag(&mut rng, "y", 1, 2);
        assert_eq!(
            bag_mean_kernel_entry(&x, &y, &p).unwrap(),
            rbf_kernel(x.instances().row(0), y.instances().row(0), &p).unwrap()
        );
        let same = Bag::from_rows("s", &[[0.3, 0.4]; 5]).unwrap();
        assert_eq!(bag_mean_kernel_entry(&same, &same, &p).unwrap(), 1.0);

        let a = random_bag(&mut rng, "a", 3, 2);
        let b = random_bag(&mut rng, "b", 4, 2);
        let v = bag_mean_kernel_entry(&a, &b, &p).unwrap();
        assert!((v - oracle_entry(&a, &b, 0.9)).abs() <= 1e-12);
    }

    #[test]
    fn tiled_entry_matches_oracle_for_large_bags() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = RbfParams::new(1.1).unwrap();
        let a = random_bag(&mut rng, "a", 150, 3);
        let b = random_bag(&mut rng, "b", 131, 3);
        let v = bag_mean_kernel_entry(&a, &b, &p).unwrap();
        assert!((v - oracle_entry(&a, &b, 1.1)).abs() <= 1e-12);
    }

    #[test]
    fn bag_gram_reductions() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = RbfParams::new(1.0).unwrap();
        let singles: Vec<Bag> = (0..6).map(|i| random_bag(&mut rng, &i.to_string(), 1, 2)).collect();
        let g = bag_gram(&singles, &p).unwrap();
        let pts = Instances::from_rows(&singles.iter().map(|b| b.instances().row(0).to_vec()).collect::<Vec<_>>()).unwrap();
        let inst = cross_gram(&pts, &pts, &p).unwrap();
        assert!((g.values() - inst).amax() <= 1e-12);

        let one = vec![random_bag(&mut rng, "o", 4, 2)];
        let g1 = bag_gram(&one, &p).unwrap();
        assert!(g1.values()[(0, 0)] > 0.0 && g1.values()[(0, 0)] <= 1.0);
    }

    #[test]
    fn bag_gram_is_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p = RbfParams::new(0.8).unwrap();
        let bags: Vec<Bag> = (0..5)
            .map(|i| {
                let n = rng.random_range(1..6);
                random_bag(&mut rng, &i.to_string(), n, 2)
            })
            .collect();
        let g = bag_gram(&bags, &p).unwrap().into_inner();
        let eig = g.symmetric_eigenvalues();
        assert!(eig.min() >= -1e-8);
    }

    #[test]
    fn cross_bag_gram_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = RbfParams::new(1.4).unwrap();
        let bags: Vec<Bag> = (0..4).map(|i| random_bag(&mut rng, &i.to_string(), 3 + i, 2)).collect();
        let g = bag_gram(&bags, &p).unwrap();
        let c = cross_bag_gram(&bags, &bags, &p).unwrap();
        assert!((g.values() - c).amax() <= 1e-12);

        let test = vec![random_bag(&mut rng, "t", 1, 2)];
        let single_train: Vec<Bag> = (0..3).map(|i| random_bag(&mut rng, &i.to_string(), 1, 2)).collect();
        let row = cross_bag_gram(&test, &single_train, &p).unwrap();
        for j in 0..3 {
            let k = rbf_kernel(test[0].instances().row(0), single_train[j].instances().row(0), &p).unwrap();
            assert_eq!(row[(0, j)], k);
        }
        let wrong = vec![random_bag(&mut rng, "w", 2, 3)];
        assert!(cross_bag_gram(&wrong, &bags, &p).is_err());
    }

    #[test]
    fn multisource_reductions() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = RbfParams::new(1.0).unwrap();
        let bags: Vec<Bag> = (0..4).map(|i| random_bag(&mut rng, &i.to_string(), 2 + i, 3)).collect();
        let ys = vec![0.0; 4];
        let single = MultiSourceDataset::new(vec![bags.clone()], ys.clone()).unwrap();
        let g = bag_gram(&bags, &p).unwrap();
        assert_eq!(multisource_bag_gram(&single, &[p]).unwrap(), g);

        let double = MultiSourceDataset::new(vec![bags.clone(), bags.clone()], ys).unwrap();
        let g2 = multisource_bag_gram(&double, &[p, p]).unwrap();
        assert!((g2.values() - g.values() * 2.0).amax() <= 1e-12);
        assert!(multisource_bag_gram(&double, &[p]).is_err());
    }

    #[test]
    fn median_heuristic_simple() {
        let pts: Vec<[f64; 1]> = vec![[0.0], [1.0], [3.0]];
        // distances 1, 3, 2 → median 2
        assert_eq!(median_heuristic(pts.iter().map(|p| &p[..])), 2.0);
        let same: Vec<[f64; 1]> = vec![[2.0]; 4];
        assert_eq!(median_heuristic(same.iter().map(|p| &p[..])), 1.0);
    }
}
