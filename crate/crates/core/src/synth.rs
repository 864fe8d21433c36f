//! Seeded synthetic worlds with known structure.
//!
//! * variance task: instances `~ N(0, s_b² I)` and `y_b = s_b`, so every bag
//!   mean sits near 0 and carries no signal.
//! * mean task: `y_b = aᵀ x̄_b + noise`, solvable by the linear baseline.
//! * multisource task: two sources of different width and bag sizes with
//!   `y_b = s_b¹ + s_b²`, one scale per source.
//! * two-sample gallery: pairs of 1-d samples that differ in mean, in
//!   variance, in shape only (Gaussian vs Laplace with equal first two
//!   moments), or after squaring.

use std::fmt;
use std::str::FromStr;

use rand::distr::{Distribution, Open01, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{Bag, BagDataset, Instances, MultiSourceDataset};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskParams {
    pub bags: usize,
    pub instances: usize,
    pub dim: usize,
    /// Std of Gaussian noise added to targets.
    pub noise: f64,
    /// Range of the per-bag scale `s_b`.
    pub min_scale: f64,
    pub max_scale: f64,
}

impl Default for TaskParams {
    fn default() -> Self {
        Self {
            bags: 120,
            instances: 50,
            dim: 3,
            noise: 0.0,
            min_scale: 0.5,
            max_scale: 2.0,
        }
    }
}

impl TaskParams {
    fn validate(&self) -> Result<()> {
        if self.bags == 0 || self.instances == 0 || self.dim == 0 {
            return Err(Error::InvalidParameter("bags, instances and dim must be positive".into()));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::InvalidParameter(format!("noise must be ≥ 0, got {}", self.noise)));
        }
        if !(self.min_scale > 0.0 && self.max_scale > self.min_scale && self.max_scale.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < min_scale < max_scale, got {} and {}",
                self.min_scale, self.max_scale
            )));
        }
        Ok(())
    }
}

fn bag_id(b: usize) -> String {
    format!("bag{b:04}")
}

fn gaussian_bag(rng: &mut ChaCha8Rng, id: String, n: usize, d: usize, center: &[f64], scale: f64) -> Result<Bag> {
    let values = (0..n * d)
        .map(|i| {
            let z: f64 = StandardNormal.sample(rng);
            center[i % d] + scale * z
        })
        .collect();
    Bag::new(id, Instances::new(d, values)?)
}

/// Bags of zero-mean Gaussians whose target is their standard deviation.
pub fn variance_task(params: &TaskParams, seed: u64) -> Result<BagDataset> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scales = Uniform::new(params.min_scale, params.max_scale).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let zero = vec![0.0; params.dim];
    let mut bags = Vec::with_capacity(params.bags);
    let mut targets = Vec::with_capacity(params.bags);
    for b in 0..params.bags {
        let s = scales.sample(&mut rng);
        bags.push(gaussian_bag(&mut rng, bag_id(b), params.instances, params.dim, &zero, s)?);
        let z: f64 = StandardNormal.sample(&mut rng);
        targets.push(s + params.noise * z);
    }
    BagDataset::new(bags, targets)
}

/// Bags scattered around random centers with a target linear in the
/// empirical bag mean.
pub fn mean_task(params: &TaskParams, seed: u64) -> Result<BagDataset> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a: Vec<f64> = (0..params.dim).map(|_| rng.random_range(-2.0..2.0)).collect();
    let c: f64 = rng.random_range(-1.0..1.0);
    let mut bags = Vec::with_capacity(params.bags);
    let mut targets = Vec::with_capacity(params.bags);
    for b in 0..params.bags {
        let center: Vec<f64> = (0..params.dim).map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                2.0 * z
            }).collect();
        let bag = gaussian_bag(&mut rng, bag_id(b), params.instances, params.dim, &center, 1.0)?;
        let z: f64 = StandardNormal.sample(&mut rng);
        let y = bag.mean().iter().zip(&a).map(|(x, w)| x * w).sum::<f64>() + c + params.noise * z;
        bags.push(bag);
        targets.push(y);
    }
    BagDataset::new(bags, targets)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MultiSourceParams {
    pub bags: usize,
    pub dims: [usize; 2],
    /// Inclusive bag-size range per source.
    pub instances: [[usize; 2]; 2],
    pub noise: f64,
    pub min_scale: f64,
    pub max_scale: f64,
}

impl Default for MultiSourceParams {
    fn default() -> Self {
        Self {
            bags: 120,
            dims: [2, 3],
            instances: [[30, 50], [15, 35]],
            noise: 0.05,
            min_scale: 0.5,
            max_scale: 2.0,
        }
    }
}

/// Two sources per bag, each a zero-mean Gaussian with its own scale; the
/// target is the sum of both scales.
pub fn multisource_task(params: &MultiSourceParams, seed: u64) -> Result<MultiSourceDataset> {
    let ok_sizes = params.instances.iter().all(|[lo, hi]| *lo >= 1 && lo <= hi);
    if params.bags == 0 || params.dims.contains(&0) || !ok_sizes {
        return Err(Error::InvalidParameter("bags, dims and bag sizes must be positive and ordered".into()));
    }
    if !(params.min_scale > 0.0 && params.max_scale > params.min_scale && params.noise >= 0.0) {
        return Err(Error::InvalidParameter("need 0 < min_scale < max_scale and noise ≥ 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sources = vec![Vec::with_capacity(params.bags), Vec::with_capacity(params.bags)];
    let mut targets = Vec::with_capacity(params.bags);
    for b in 0..params.bags {
        let mut y = 0.0;
        for (f, source) in sources.iter_mut().enumerate() {
            let s = rng.random_range(params.min_scale..params.max_scale);
            let [lo, hi] = params.instances[f];
            let n = rng.random_range(lo..=hi);
            let d = params.dims[f];
            source.push(gaussian_bag(&mut rng, bag_id(b), n, d, &vec![0.0; d], s)?);
            y += s;
        }
        let z: f64 = StandardNormal.sample(&mut rng);
        targets.push(y + params.noise * z);
    }
    MultiSourceDataset::new(sources, targets)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    /// Unit Gaussians with shifted means.
    A,
    /// Zero-mean Gaussians with different variances.
    B,
    /// Unit Gaussian vs Laplace with the same mean and variance.
    C,
    /// Scenario B after the map `x ↦ x²`.
    D,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [Scenario::A, Scenario::B, Scenario::C, Scenario::D];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::A => "a",
            Scenario::B => "b",
            Scenario::C => "c",
            Scenario::D => "d",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown scenario `{s}` (expected a, b, c or d)")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GalleryParams {
    /// Points per sample.
    pub n: usize,
    /// Mean shift in scenario A.
    pub shift: f64,
    /// Variance ratio between the two samples in scenarios B and D.
    pub variance_ratio: f64,
}

impl Default for GalleryParams {
    fn default() -> Self {
        Self {
            n: 2000,
            shift: 2.0,
            variance_ratio: 4.0,
        }
    }
}

fn normal_sample(rng: &mut ChaCha8Rng, n: usize, mean: f64, std: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            mean + std * z
        })
        .collect()
}

/// Laplace draws by inverting the CDF; scale `1/√2` gives unit variance.
fn laplace_sample(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let u: f64 = Open01.sample(rng);
            let u = u - 0.5;
            -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
        })
        .collect()
}

/// The pair of one-dimensional samples `(x, y)` for a scenario.
pub fn two_sample(scenario: Scenario, params: &GalleryParams, seed: u64) -> Result<(Instances, Instances)> {
    if params.n == 0 || params.variance_ratio.is_nan() || params.variance_ratio <= 0.0 || !params.shift.is_finite() {
        return Err(Error::InvalidParameter("gallery needs n ≥ 1, a finite shift and a positive variance ratio".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = params.n;
    let (x, y) = match scenario {
        Scenario::A => (normal_sample(&mut rng, n, 0.0, 1.0), normal_sample(&mut rng, n, params.shift, 1.0)),
        Scenario::B | Scenario::D => {
            let x = normal_sample(&mut rng, n, 0.0, 1.0);
            let y = normal_sample(&mut rng, n, 0.0, params.variance_ratio.sqrt());
            if scenario == Scenario::D {
                (x.iter().map(|v| v * v).collect(), y.iter().map(|v| v * v).collect())
            } else {
                (x, y)
            }
        }
        Scenario::C => (normal_sample(&mut rng, n, 0.0, 1.0), laplace_sample(&mut rng, n, 1.0 / 2f64.sqrt())),
    };
    Ok((Instances::new(1, x)?, Instances::new(1, y)?))
}
