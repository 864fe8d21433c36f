use std::borrow::Cow;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{Bag, BagDataset, DataRef, Dataset, Instances, MultiSourceDataset, Normalizer};
use crate::error::{Error, Result};
use crate::kernel::{bag_gram, cross_bag_gram, cross_gram, median_heuristic, median_heuristic_bags, RbfParams};
use crate::numeric::mean;
use crate::parallel;
use crate::rff::{sample_basis, FourierBasis};

use super::ridge::{dual_weights, primal_weights, RidgeSolution};

/// Smallest ridge penalty the linear baseline will use.
pub const LR_LAMBDA_FLOOR: f64 = 1e-8;

const MODEL_FORMAT: &str = "distreg-model";
const MODEL_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Lr,
    Kr,
    Kdr,
    Rdr,
    Mdr,
    StackedLr,
    StackedKr,
    StackedRdr,
    StackedKdr,
}

impl ModelKind {
    pub const ALL: [ModelKind; 9] = [
        ModelKind::Lr,
        ModelKind::Kr,
        ModelKind::Rdr,
        ModelKind::Kdr,
        ModelKind::Mdr,
        ModelKind::StackedLr,
        ModelKind::StackedKr,
        ModelKind::StackedRdr,
        ModelKind::StackedKdr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Lr => "lr",
            ModelKind::Kr => "kr",
            ModelKind::Kdr => "kdr",
            ModelKind::Rdr => "rdr",
            ModelKind::Mdr => "mdr",
            ModelKind::StackedLr => "stacked-lr",
            ModelKind::StackedKr => "stacked-kr",
            ModelKind::StackedRdr => "stacked-rdr",
            ModelKind::StackedKdr => "stacked-kdr",
        }
    }

    /// Upper-case label used in result tables.
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Lr => "LR",
            ModelKind::Kr => "KR",
            ModelKind::Kdr => "KDR",
            ModelKind::Rdr => "RDR",
            ModelKind::Mdr => "MDR",
            ModelKind::StackedLr => "STACKED-LR",
            ModelKind::StackedKr => "STACKED-KR",
            ModelKind::StackedRdr => "STACKED-RDR",
            ModelKind::StackedKdr => "STACKED-KDR",
        }
    }

    /// Kinds that consume every source of a multisource dataset.
    pub fn is_multisource(self) -> bool {
        matches!(
            self,
            ModelKind::Mdr | ModelKind::StackedLr | ModelKind::StackedKr | ModelKind::StackedRdr | ModelKind::StackedKdr
        )
    }

    pub fn uses_sigma(self) -> bool {
        !matches!(self, ModelKind::Lr | ModelKind::StackedLr)
    }

    pub fn uses_features(self) -> bool {
        matches!(self, ModelKind::Rdr | ModelKind::StackedRdr)
    }

    fn representation(self) -> Representation {
        match self {
            ModelKind::Lr | ModelKind::StackedLr => Representation::LinearMeans,
            ModelKind::Kr | ModelKind::StackedKr => Representation::KernelMeans,
            ModelKind::Kdr | ModelKind::Mdr => Representation::Embedding(Combine::Sum),
            ModelKind::StackedKdr => Representation::Embedding(Combine::Product),
            ModelKind::Rdr | ModelKind::StackedRdr => Representation::Fourier,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == lower)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown model kind `{s}`")))
    }
}

/// How per-source mean-embedding kernels are merged.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Combine {
    /// Direct sum of the per-source feature spaces.
    Sum,
    /// Tensor product, i.e. an RBF kernel on the concatenated features.
    Product,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Representation {
    LinearMeans,
    KernelMeans,
    Embedding(Combine),
    Fourier,
}

/// Everything a fitted model needs besides its coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "representation")]
enum ModelState {
    LinearMeans {
        normalizers: Vec<Option<Normalizer>>,
        dims: Vec<usize>,
    },
    KernelMeans {
        normalizers: Vec<Option<Normalizer>>,
        dims: Vec<usize>,
        params: RbfParams,
        train_points: Instances,
    },
    Embedding {
        normalizers: Vec<Option<Normalizer>>,
        params: Vec<RbfParams>,
        combine: Combine,
        train: Vec<Vec<Bag>>,
    },
    Fourier {
        normalizers: Vec<Option<Normalizer>>,
        dims: Vec<usize>,
        basis: FourierBasis,
    },
}

impl ModelState {
    fn normalizers(&self) -> &[Option<Normalizer>] {
        match self {
            ModelState::LinearMeans { normalizers, .. }
            | ModelState::KernelMeans { normalizers, .. }
            | ModelState::Embedding { normalizers, .. }
            | ModelState::Fourier { normalizers, .. } => normalizers,
        }
    }

    fn dims(&self) -> Vec<usize> {
        match self {
            ModelState::LinearMeans { dims, .. }
            | ModelState::KernelMeans { dims, .. }
            | ModelState::Fourier { dims, .. } => dims.clone(),
            ModelState::Embedding { train, .. } => train.iter().map(|bags| bags[0].dim()).collect(),
        }
    }

    /// Per-source test bags brought into the model's normalized space.
    fn align_inputs<'a>(&self, data: DataRef<'a>) -> Result<Vec<Cow<'a, [Bag]>>> {
        let normalizers = self.normalizers();
        if data.num_sources() != normalizers.len() {
            return Err(Error::DimensionMismatch {
                context: "sources",
                expected: normalizers.len(),
                got: data.num_sources(),
            });
        }
        let dims = self.dims();
        let mut out = Vec::with_capacity(normalizers.len());
        for (f, (model_norm, &dim)) in normalizers.iter().zip(&dims).enumerate() {
            let bags = data.source_bags(f);
            if let Some(bad) = bags.iter().find(|b| b.dim() != dim) {
                return Err(Error::DimensionMismatch {
                    context: if normalizers.len() == 1 { "instance dimension" } else { "instance dimension of a source" },
                    expected: dim,
                    got: bad.dim(),
                });
            }
            let bags = match (model_norm, data.source_normalization(f)) {
                (None, None) => Cow::Borrowed(bags),
                (Some(m), None) => Cow::Owned(m.apply_bags(bags)?),
                (Some(m), Some(t)) if m == t => Cow::Borrowed(bags),
                _ => {
                    return Err(Error::Model(format!(
                        "source {f} is normalized differently from the training data"
                    )))
                }
            };
            out.push(bags);
        }
        Ok(out)
    }

    /// Rows: test bags. Columns: training bags (dual) or features (primal).
    fn design(&self, sources: &[Cow<'_, [Bag]>]) -> Result<DMatrix<f64>> {
        let refs: Vec<&[Bag]> = sources.iter().map(|s| s.as_ref()).collect();
        match self {
            ModelState::LinearMeans { .. } => Ok(instances_to_matrix(&stacked_means(&refs)?)),
            ModelState::KernelMeans { params, train_points, .. } => {
                cross_gram(&stacked_means(&refs)?, train_points, params)
            }
            ModelState::Embedding {
                params, combine, train, ..
            } => {
                let mut grams = refs
                    .iter()
                    .zip(train)
                    .zip(params)
                    .map(|((test, train), p)| cross_bag_gram(test, train, p));
                let first = grams.next().ok_or_else(|| Error::Model("no sources".into()))??;
                combine_grams(first, grams, *combine)
            }
            ModelState::Fourier { basis, .. } => fourier_rows(&refs, basis),
        }
    }
}

fn instances_to_matrix(points: &Instances) -> DMatrix<f64> {
    DMatrix::from_row_slice(points.len(), points.dim(), points.values())
}

fn combine_grams(
    first: DMatrix<f64>,
    rest: impl Iterator<Item = Result<DMatrix<f64>>>,
    combine: Combine,
) -> Result<DMatrix<f64>> {
    let mut total = first;
    for g in rest {
        let g = g?;
        match combine {
            Combine::Sum => total += g,
            Combine::Product => total.component_mul_assign(&g),
        }
    }
    Ok(total)
}

/// One row per bag: the per-source input-space means, concatenated.
fn stacked_means(sources: &[&[Bag]]) -> Result<Instances> {
    let n = sources[0].len();
    let dim: usize = sources.iter().map(|s| s[0].dim()).sum();
    let rows = parallel::map_range(n, |b| {
        sources.iter().flat_map(|s| s[b].mean()).collect::<Vec<_>>()
    });
    Instances::new(dim, rows.concat())
}

/// Mean random-feature rows. With several sources the per-source complex
/// phase means are multiplied, which is the mean over every cross-source
/// pairing of instances of the features of the concatenated vector.
fn fourier_rows(sources: &[&[Bag]], basis: &FourierBasis) -> Result<DMatrix<f64>> {
    let total: usize = sources.iter().map(|s| s[0].dim()).sum();
    if total != basis.dim() {
        return Err(Error::DimensionMismatch {
            context: "Fourier basis",
            expected: basis.dim(),
            got: total,
        });
    }
    let n = sources[0].len();
    let width = 2 * basis.features();
    let rows = parallel::map_range(n, |b| {
        let mut offset = sources[0][b].dim();
        let mut phases = basis.mean_phases(&sources[0][b], 0);
        for s in &sources[1..] {
            let other = basis.mean_phases(&s[b], offset);
            offset += s[b].dim();
            for (p, q) in phases.chunks_exact_mut(2).zip(other.chunks_exact(2)) {
                let (a, c) = (p[0], p[1]);
                p[0] = a * q[0] - c * q[1];
                p[1] = a * q[1] + c * q[0];
            }
        }
        basis.scale_phases(phases)
    });
    Ok(DMatrix::from_row_slice(n, width, &rows.concat()))
}

#[derive(Clone, Debug)]
enum System {
    Dual { gram: DMatrix<f64> },
    Primal { z: DMatrix<f64>, center: bool },
}

/// A model whose kernel or feature matrix is built but whose ridge system is
/// not yet solved. Solving for several penalties reuses the same matrix.
#[derive(Clone, Debug)]
pub struct Prepared {
    kind: ModelKind,
    state: ModelState,
    system: System,
    targets: Vec<f64>,
}

impl Prepared {
    pub fn new(kind: ModelKind, train: DataRef<'_>, spec: &ModelSpec) -> Result<Self> {
        let basis = if kind.uses_features() {
            let features = spec
                .features
                .ok_or_else(|| Error::InvalidParameter(format!("{} needs a feature count", kind.label())))?;
            let dim = (0..train.num_sources()).map(|f| train.source_bags(f)[0].dim()).sum();
            Some(sample_basis(dim, features, single_sigma(kind, &spec.sigma)?, spec.seed)?)
        } else {
            None
        };
        Self::with_basis(kind, train, &spec.sigma, basis)
    }

    fn with_basis(kind: ModelKind, train: DataRef<'_>, sigma: &[f64], basis: Option<FourierBasis>) -> Result<Self> {
        let sources = train.num_sources();
        if !kind.is_multisource() && sources != 1 {
            return Err(Error::InvalidParameter(format!(
                "{} is a single-source model but the data has {sources} sources",
                kind.label()
            )));
        }
        if train.is_empty() {
            return Err(Error::InsufficientBags("no training bags".into()));
        }
        let bags: Vec<&[Bag]> = (0..sources).map(|f| train.source_bags(f)).collect();
        let normalizers: Vec<Option<Normalizer>> =
            (0..sources).map(|f| train.source_normalization(f).cloned()).collect();
        let dims: Vec<usize> = bags.iter().map(|b| b[0].dim()).collect();

        let (state, system) = match kind.representation() {
            Representation::LinearMeans => {
                let z = instances_to_matrix(&stacked_means(&bags)?);
                (ModelState::LinearMeans { normalizers, dims }, System::Primal { z, center: true })
            }
            Representation::KernelMeans => {
                let params = RbfParams::new(single_sigma(kind, sigma)?)?;
                let train_points = stacked_means(&bags)?;
                let gram = cross_gram(&train_points, &train_points, &params)?;
                (
                    ModelState::KernelMeans {
                        normalizers,
                        dims,
                        params,
                        train_points,
                    },
                    System::Dual { gram },
                )
            }
            Representation::Embedding(combine) => {
                let params = source_params(kind, sigma, sources)?;
                let mut grams = bags
                    .iter()
                    .zip(&params)
                    .map(|(b, p)| bag_gram(b, p).map(|g| g.into_inner()));
                let first = grams.next().ok_or_else(|| Error::Model("no sources".into()))??;
                let gram = combine_grams(first, grams, combine)?;
                (
                    ModelState::Embedding {
                        normalizers,
                        params,
                        combine,
                        train: bags.iter().map(|b| b.to_vec()).collect(),
                    },
                    System::Dual { gram },
                )
            }
            Representation::Fourier => {
                let basis = basis.ok_or_else(|| Error::InvalidParameter("missing Fourier basis".into()))?;
                let z = fourier_rows(&bags, &basis)?;
                (ModelState::Fourier { normalizers, dims, basis }, System::Primal { z, center: false })
            }
        };
        Ok(Self {
            kind,
            state,
            system,
            targets: train.targets().to_vec(),
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    /// Solves the ridge system for one penalty, with centered targets.
    pub fn solve(&self, lambda: f64) -> Result<RidgeSolution> {
        let y_mean = mean(&self.targets);
        let centered = DVector::from_iterator(self.targets.len(), self.targets.iter().map(|y| y - y_mean));
        match &self.system {
            System::Dual { gram } => {
                let alpha = dual_weights(gram, &centered, lambda)?;
                Ok(RidgeSolution {
                    coefficients: alpha.as_slice().to_vec(),
                    intercept: y_mean,
                    lambda,
                })
            }
            System::Primal { z, center: false } => {
                let w = primal_weights(z, &centered, lambda)?;
                Ok(RidgeSolution {
                    coefficients: w.as_slice().to_vec(),
                    intercept: y_mean,
                    lambda,
                })
            }
            System::Primal { z, center: true } => {
                let lambda = if matches!(self.kind, ModelKind::Lr | ModelKind::StackedLr) {
                    lambda.max(LR_LAMBDA_FLOOR)
                } else {
                    lambda
                };
                let means: Vec<f64> = z.column_iter().map(|c| mean(c.as_slice())).collect();
                let zc = DMatrix::from_fn(z.nrows(), z.ncols(), |i, j| z[(i, j)] - means[j]);
                let w = primal_weights(&zc, &centered, lambda)?;
                let shift: f64 = means.iter().zip(w.iter()).map(|(m, w)| m * w).sum();
                Ok(RidgeSolution {
                    coefficients: w.as_slice().to_vec(),
                    intercept: y_mean - shift,
                    lambda,
                })
            }
        }
    }

    /// Design matrix of new bags against this model's training side.
    pub fn test_design(&self, data: DataRef<'_>) -> Result<DMatrix<f64>> {
        let inputs = self.state.align_inputs(data)?;
        self.state.design(&inputs)
    }

    pub fn predict_with(design: &DMatrix<f64>, solution: &RidgeSolution) -> Vec<f64> {
        let w = DVector::from_column_slice(&solution.coefficients);
        (design * w).iter().map(|v| v + solution.intercept).collect()
    }

    pub fn finish(self, solution: RidgeSolution) -> FittedModel {
        FittedModel {
            kind: self.kind,
            solution,
            state: self.state,
        }
    }

    pub fn fit(self, lambda: f64) -> Result<FittedModel> {
        let solution = self.solve(lambda)?;
        Ok(self.finish(solution))
    }
}

fn single_sigma(kind: ModelKind, sigma: &[f64]) -> Result<f64> {
    match sigma {
        [s] => Ok(*s),
        _ => Err(Error::InvalidParameter(format!(
            "{} takes one bandwidth, got {}",
            kind.label(),
            sigma.len()
        ))),
    }
}

fn source_params(kind: ModelKind, sigma: &[f64], sources: usize) -> Result<Vec<RbfParams>> {
    let per_source: Vec<f64> = match (kind, sigma.len()) {
        (ModelKind::Mdr, n) if n == sources => sigma.to_vec(),
        (_, 1) => vec![sigma[0]; sources],
        (_, n) => {
            return Err(Error::DimensionMismatch {
                context: "bandwidths per source",
                expected: if kind == ModelKind::Mdr { sources } else { 1 },
                got: n,
            })
        }
    };
    per_source.into_iter().map(RbfParams::new).collect()
}

/// A fitted regressor. Immutable; prediction is deterministic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    kind: ModelKind,
    solution: RidgeSolution,
    state: ModelState,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    model: FittedModel,
}

impl FittedModel {
    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn solution(&self) -> &RidgeSolution {
        &self.solution
    }

    pub fn num_sources(&self) -> usize {
        self.state.normalizers().len()
    }

    /// Per-source instance dimensionality expected at prediction time.
    pub fn input_dims(&self) -> Vec<usize> {
        self.state.dims()
    }

    pub fn normalizers(&self) -> &[Option<Normalizer>] {
        self.state.normalizers()
    }

    pub fn basis(&self) -> Option<&FourierBasis> {
        match &self.state {
            ModelState::Fourier { basis, .. } => Some(basis),
            _ => None,
        }
    }

    /// One prediction per bag. Raw data is normalized with the stored
    /// transform; data already carrying that same transform is used as is.
    pub fn predict<'a>(&self, data: impl Into<DataRef<'a>>) -> Result<Vec<f64>> {
        let inputs = self.state.align_inputs(data.into())?;
        let design = self.state.design(&inputs)?;
        Ok(Prepared::predict_with(&design, &self.solution))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(&ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            model: self.clone(),
        })
        .map_err(|e| Error::Model(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::Model(format!("corrupt model file: {e}")))?;
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(Error::Model(format!(
                "unsupported model file `{}` version {}",
                file.format, file.version
            )));
        }
        Ok(file.model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        crate::data::ensure_parent(path)?;
        std::fs::write(path, self.to_json()?).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }
}

/// Hyperparameters for one fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub lambda: f64,
    /// Bandwidths: empty for the linear kinds, one per source for MDR, one
    /// otherwise.
    #[serde(default)]
    pub sigma: Vec<f64>,
    #[serde(default)]
    pub features: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

/// Fits per-source normalizers on `train`, normalizes, and fits the model.
pub fn fit_model<'a>(spec: &ModelSpec, train: impl Into<DataRef<'a>>) -> Result<FittedModel> {
    let train = train.into();
    let normalizers = train.fit_normalizers()?;
    let normalized = train.normalized(&normalizers)?;
    Prepared::new(spec.kind, normalized.as_ref(), spec)?.fit(spec.lambda)
}

/// Reference bandwidths (median heuristics) for a kind on normalized data;
/// bandwidth grids are multiples of these. MDR gets one per source; the
/// stacked mean-embedding kinds combine per-source medians as
/// `sqrt(Σ m_f²)`, the typical distance in the concatenated space.
pub fn reference_sigmas(kind: ModelKind, data: DataRef<'_>) -> Result<Vec<f64>> {
    let sources = data.num_sources();
    let bags: Vec<&[Bag]> = (0..sources).map(|f| data.source_bags(f)).collect();
    Ok(match kind {
        ModelKind::Lr | ModelKind::StackedLr => Vec::new(),
        ModelKind::Kr | ModelKind::StackedKr => {
            let means = stacked_means(&bags)?;
            vec![median_heuristic(means.rows())]
        }
        ModelKind::Kdr | ModelKind::Rdr => vec![median_heuristic_bags(bags[0])],
        ModelKind::Mdr => bags.iter().map(|b| median_heuristic_bags(b)).collect(),
        ModelKind::StackedKdr | ModelKind::StackedRdr => {
            let sq: f64 = bags.iter().map(|b| median_heuristic_bags(b).powi(2)).sum();
            vec![sq.sqrt()]
        }
    })
}

fn expect_kind(model: &FittedModel, kind: ModelKind) -> Result<()> {
    if model.kind == kind {
        Ok(())
    } else {
        Err(Error::Model(format!("expected a {} model, got {}", kind.label(), model.kind.label())))
    }
}

/// Kernel distribution regression on data as given (normalize beforehand).
pub fn fit_kdr(train: &BagDataset, params: RbfParams, lambda: f64) -> Result<FittedModel> {
    Prepared::with_basis(ModelKind::Kdr, train.into(), &[params.sigma()], None)?.fit(lambda)
}

pub fn predict_kdr(model: &FittedModel, test: &BagDataset) -> Result<Vec<f64>> {
    expect_kind(model, ModelKind::Kdr)?;
    model.predict(test)
}

/// Randomized distribution regression with a given basis.
pub fn fit_rdr(train: &BagDataset, basis: &FourierBasis, lambda: f64) -> Result<FittedModel> {
    Prepared::with_basis(ModelKind::Rdr, train.into(), &[basis.sigma()], Some(basis.clone()))?.fit(lambda)
}

pub fn predict_rdr(model: &FittedModel, test: &BagDataset) -> Result<Vec<f64>> {
    expect_kind(model, ModelKind::Rdr)?;
    model.predict(test)
}

/// Multisource distribution regression; one kernel per source.
pub fn fit_mdr(train: &MultiSourceDataset, params: &[RbfParams], lambda: f64) -> Result<FittedModel> {
    if params.len() != train.num_sources() {
        return Err(Error::DimensionMismatch {
            context: "kernel parameters per source",
            expected: train.num_sources(),
            got: params.len(),
        });
    }
    let sigma: Vec<f64> = params.iter().map(RbfParams::sigma).collect();
    Prepared::with_basis(ModelKind::Mdr, train.into(), &sigma, None)?.fit(lambda)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaselineKind {
    Lr,
    Kr,
}

/// Input-space bag-mean baselines. `sigma` is required for KR.
pub fn fit_baseline(train: &BagDataset, kind: BaselineKind, lambda: f64, sigma: Option<f64>) -> Result<FittedModel> {
    match kind {
        BaselineKind::Lr => Prepared::with_basis(ModelKind::Lr, train.into(), &[], None)?.fit(lambda),
        BaselineKind::Kr => {
            let sigma = sigma.ok_or_else(|| Error::InvalidParameter("KR needs a bandwidth".into()))?;
            Prepared::with_basis(ModelKind::Kr, train.into(), &[sigma], None)?.fit(lambda)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StackedKind {
    Lr,
    Kr,
    Rdr,
    Kdr,
}

impl StackedKind {
    pub fn model_kind(self) -> ModelKind {
        match self {
            StackedKind::Lr => ModelKind::StackedLr,
            StackedKind::Kr => ModelKind::StackedKr,
            StackedKind::Rdr => ModelKind::StackedRdr,
            StackedKind::Kdr => ModelKind::StackedKdr,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StackedParams {
    pub lambda: f64,
    pub sigma: Option<f64>,
    pub features: Option<usize>,
    pub seed: u64,
}

/// Feature-stacking baseline over aligned sources.
pub fn fit_stacked(train: &MultiSourceDataset, kind: StackedKind, params: &StackedParams) -> Result<FittedModel> {
    let model_kind = kind.model_kind();
    let sigma: Vec<f64> = if model_kind.uses_sigma() {
        vec![params
            .sigma
            .ok_or_else(|| Error::InvalidParameter(format!("{} needs a bandwidth", model_kind.label())))?]
    } else {
        Vec::new()
    };
    let spec = ModelSpec {
        kind: model_kind,
        lambda: params.lambda,
        sigma,
        features: params.features,
        seed: params.seed,
    };
    Prepared::new(model_kind, train.into(), &spec)?.fit(params.lambda)
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.as_ref().len()
    }

    pub fn is_empty(&self) -> bool {
        self.as_ref().is_empty()
    }
}
