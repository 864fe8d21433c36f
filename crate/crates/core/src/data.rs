//! Bag-structured datasets.
//!
//! A [`Bag`] is a group of instance vectors that share one scalar target. A
//! [`BagDataset`] is an ordered list of bags with aligned targets, and a
//! [`MultiSourceDataset`] holds several per-sensor views of the same bags.
//!
//! Instances are stored row-major: one contiguous slice of `dim` values per
//! instance.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::pairwise_sum;

/// Row-major matrix of instance feature vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instances {
    dim: usize,
    values: Vec<f64>,
}

impl Instances {
    pub fn new(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("instance dimension must be ≥ 1".into()));
        }
        if !values.len().is_multiple_of(dim) {
            return Err(Error::InvalidParameter(format!(
                "{} values do not form rows of width {dim}",
                values.len()
            )));
        }
        Ok(Self { dim, values })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut values = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    context: "instance rows",
                    expected: dim,
                    got: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::new(dim, values)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.dim)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Per-column arithmetic mean.
    pub fn column_means(&self) -> Vec<f64> {
        let n = self.len() as f64;
        let mut column = Vec::with_capacity(self.len());
        (0..self.dim)
            .map(|j| {
                column.clear();
                column.extend(self.rows().map(|r| r[j]));
                pairwise_sum(&column) / n
            })
            .collect()
    }
}

/// One group of instances with an identifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bag {
    id: String,
    instances: Instances,
}

impl Bag {
    /// Builds a bag, checking that it is nonempty and every entry is finite.
    pub fn new(id: impl Into<String>, instances: Instances) -> Result<Self> {
        let id = id.into();
        if instances.is_empty() {
            return Err(Error::InvalidBag {
                bag: id,
                message: "a bag needs at least one instance".into(),
            });
        }
        if let Some(pos) = instances.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidBag {
                bag: id,
                message: format!(
                    "non-finite value in instance {} feature {}",
                    pos / instances.dim,
                    pos % instances.dim + 1
                ),
            });
        }
        Ok(Self { id, instances })
    }

    pub fn from_rows<R: AsRef<[f64]>>(id: impl Into<String>, rows: &[R]) -> Result<Self> {
        Self::new(id, Instances::from_rows(rows)?)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn instances(&self) -> &Instances {
        &self.instances
    }

    pub fn dim(&self) -> usize {
        self.instances.dim
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// Input-space empirical average of the bag's instances.
    pub fn mean(&self) -> Vec<f64> {
        self.instances.column_means()
    }

    pub(crate) fn map_instances(&self, f: impl Fn(&[f64], &mut Vec<f64>)) -> Bag {
        let mut values = Vec::with_capacity(self.instances.values.len());
        for row in self.instances.rows() {
            f(row, &mut values);
        }
        let dim = values.len() / self.len();
        Bag {
            id: self.id.clone(),
            instances: Instances { dim, values },
        }
    }
}

/// Per-feature affine transform `(x - mean) / scale`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Normalizer {
    pub fn new(mean: Vec<f64>, scale: Vec<f64>) -> Result<Self> {
        if mean.len() != scale.len() {
            return Err(Error::DimensionMismatch {
                context: "normalizer mean/scale",
                expected: mean.len(),
                got: scale.len(),
            });
        }
        if scale.iter().any(|s| !(s.is_finite() && *s > 0.0)) || mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidParameter(
                "normalizer needs finite means and positive finite scales".into(),
            ));
        }
        Ok(Self { mean, scale })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    /// Z-score statistics over every instance pooled across `bags`, using the
    /// population standard deviation. A feature whose values are all equal gets
    /// that value as its mean and scale 1, so it normalizes to exactly 0.
    pub fn fit(bags: &[Bag]) -> Result<Self> {
        let dim = shared_dim(bags)?;
        let total: usize = bags.iter().map(Bag::len).sum();
        let mut column = Vec::with_capacity(total);
        let mut mean = Vec::with_capacity(dim);
        let mut scale = Vec::with_capacity(dim);
        for j in 0..dim {
            column.clear();
            for bag in bags {
                column.extend(bag.instances.rows().map(|r| r[j]));
            }
            let first = column[0];
            if column.iter().all(|&v| v == first) {
                mean.push(first);
                scale.push(1.0);
                continue;
            }
            let m = pairwise_sum(&column) / total as f64;
            for v in column.iter_mut() {
                let c = *v - m;
                *v = c * c;
            }
            let std = (pairwise_sum(&column) / total as f64).sqrt();
            mean.push(m);
            scale.push(if std > 0.0 && std.is_finite() { std } else { 1.0 });
        }
        Ok(Self { mean, scale })
    }

    pub fn apply_bag(&self, bag: &Bag) -> Result<Bag> {
        if bag.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "normalizer",
                expected: self.dim(),
                got: bag.dim(),
            });
        }
        Ok(bag.map_instances(|row, out| {
            out.extend(
                row.iter()
                    .zip(&self.mean)
                    .zip(&self.scale)
                    .map(|((x, m), s)| (x - m) / s),
            )
        }))
    }

    pub fn apply_bags(&self, bags: &[Bag]) -> Result<Vec<Bag>> {
        bags.iter().map(|b| self.apply_bag(b)).collect()
    }
}

fn shared_dim(bags: &[Bag]) -> Result<usize> {
    let first = bags
        .first()
        .ok_or_else(|| Error::InvalidDataset("dataset has no bags".into()))?;
    let dim = first.dim();
    if let Some(bad) = bags.iter().find(|b| b.dim() != dim) {
        return Err(Error::InvalidBag {
            bag: bad.id.clone(),
            message: format!("has {} features, dataset has {dim}", bad.dim()),
        });
    }
    Ok(dim)
}

/// Ordered bags with one target per bag.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BagDataset {
    bags: Vec<Bag>,
    targets: Vec<f64>,
    normalization: Option<Normalizer>,
}

impl BagDataset {
    pub fn new(bags: Vec<Bag>, targets: Vec<f64>) -> Result<Self> {
        shared_dim(&bags)?;
        if bags.len() != targets.len() {
            return Err(Error::InvalidDataset(format!(
                "{} bags but {} targets",
                bags.len(),
                targets.len()
            )));
        }
        if targets.iter().any(|y| !y.is_finite()) {
            return Err(Error::InvalidDataset("non-finite target".into()));
        }
        Ok(Self {
            bags,
            targets,
            normalization: None,
        })
    }

    pub fn bags(&self) -> &[Bag] {
        &self.bags
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn normalization(&self) -> Option<&Normalizer> {
        self.normalization.as_ref()
    }

    pub fn len(&self) -> usize {
        self.bags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bags.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.bags[0].dim()
    }

    pub fn total_instances(&self) -> usize {
        self.bags.iter().map(Bag::len).sum()
    }

    /// New dataset holding the bags at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> BagDataset {
        BagDataset {
            bags: indices.iter().map(|&i| self.bags[i].clone()).collect(),
            targets: indices.iter().map(|&i| self.targets[i]).collect(),
            normalization: self.normalization.clone(),
        }
    }

    pub fn with_targets(&self, targets: Vec<f64>) -> Result<BagDataset> {
        let mut out = BagDataset::new(self.bags.clone(), targets)?;
        out.normalization = self.normalization.clone();
        Ok(out)
    }

    pub fn into_parts(self) -> (Vec<Bag>, Vec<f64>) {
        (self.bags, self.targets)
    }
}

/// Pooled per-feature statistics of the training instances.
pub fn fit_normalizer(train: &BagDataset) -> Result<Normalizer> {
    Normalizer::fit(&train.bags)
}

/// Normalized copy of `data`; targets are left untouched.
pub fn apply_normalizer(data: &BagDataset, transform: &Normalizer) -> Result<BagDataset> {
    Ok(BagDataset {
        bags: transform.apply_bags(&data.bags)?,
        targets: data.targets.clone(),
        normalization: Some(transform.clone()),
    })
}

/// One sensor's bags inside a [`MultiSourceDataset`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceView {
    bags: Vec<Bag>,
    normalization: Option<Normalizer>,
}

impl SourceView {
    pub fn bags(&self) -> &[Bag] {
        &self.bags
    }

    pub fn normalization(&self) -> Option<&Normalizer> {
        self.normalization.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.bags[0].dim()
    }
}

/// The same bags observed by several sources, possibly with different
/// dimensionality and instance counts per source. Targets are stored once.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiSourceDataset {
    ids: Vec<String>,
    targets: Vec<f64>,
    sources: Vec<SourceView>,
}

impl MultiSourceDataset {
    /// Builds from per-source bag lists that are already aligned by position.
    pub fn new(sources: Vec<Vec<Bag>>, targets: Vec<f64>) -> Result<Self> {
        let first = sources
            .first()
            .ok_or_else(|| Error::InvalidDataset("need at least one source".into()))?;
        if first.len() != targets.len() {
            return Err(Error::InvalidDataset(format!(
                "{} bags but {} targets",
                first.len(),
                targets.len()
            )));
        }
        let ids: Vec<String> = first.iter().map(|b| b.id.clone()).collect();
        for (f, bags) in sources.iter().enumerate() {
            shared_dim(bags)?;
            if bags.len() != ids.len() || bags.iter().zip(&ids).any(|(b, id)| &b.id != id) {
                return Err(Error::InvalidDataset(format!(
                    "source {f} does not list the same bag ids in the same order"
                )));
            }
        }
        // validated through BagDataset::new for the target checks
        BagDataset::new(first.clone(), targets.clone())?;
        Ok(Self {
            ids,
            targets,
            sources: sources
                .into_iter()
                .map(|bags| SourceView {
                    bags,
                    normalization: None,
                })
                .collect(),
        })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn num_sources(&self) -> usize {
        self.sources.len()
    }

    pub fn sources(&self) -> &[SourceView] {
        &self.sources
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Single-source view of source `f` as an ordinary dataset.
    pub fn source(&self, f: usize) -> BagDataset {
        let view = &self.sources[f];
        BagDataset {
            bags: view.bags.clone(),
            targets: self.targets.clone(),
            normalization: view.normalization.clone(),
        }
    }

    pub fn subset(&self, indices: &[usize]) -> MultiSourceDataset {
        MultiSourceDataset {
            ids: indices.iter().map(|&i| self.ids[i].clone()).collect(),
            targets: indices.iter().map(|&i| self.targets[i]).collect(),
            sources: self
                .sources
                .iter()
                .map(|s| SourceView {
                    bags: indices.iter().map(|&i| s.bags[i].clone()).collect(),
                    normalization: s.normalization.clone(),
                })
                .collect(),
        }
    }

    pub fn with_targets(&self, targets: Vec<f64>) -> Result<MultiSourceDataset> {
        if targets.len() != self.ids.len() {
            return Err(Error::InvalidDataset("target count does not match bag count".into()));
        }
        let mut out = self.clone();
        out.targets = targets;
        Ok(out)
    }

    /// Per-source pooled normalizers.
    pub fn fit_normalizers(&self) -> Result<Vec<Normalizer>> {
        self.sources.iter().map(|s| Normalizer::fit(&s.bags)).collect()
    }

    pub fn apply_normalizers(&self, transforms: &[Normalizer]) -> Result<MultiSourceDataset> {
        if transforms.len() != self.sources.len() {
            return Err(Error::DimensionMismatch {
                context: "normalizers per source",
                expected: self.sources.len(),
                got: transforms.len(),
            });
        }
        let sources = self
            .sources
            .iter()
            .zip(transforms)
            .map(|(s, t)| {
                Ok(SourceView {
                    bags: t.apply_bags(&s.bags)?,
                    normalization: Some(t.clone()),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MultiSourceDataset {
            ids: self.ids.clone(),
            targets: self.targets.clone(),
            sources,
        })
    }
}

/// Intersects the bag ids of every source, keeping the first source's order.
/// Targets for a shared id must agree exactly across sources.
pub fn align_sources(per_source: &[BagDataset]) -> Result<MultiSourceDataset> {
    let first = per_source
        .first()
        .ok_or_else(|| Error::InvalidDataset("need at least one source".into()))?;
    let lookups: Vec<HashMap<&str, usize>> = per_source
        .iter()
        .map(|ds| ds.bags.iter().enumerate().map(|(i, b)| (b.id.as_str(), i)).collect())
        .collect();

    let mut kept: Vec<Vec<usize>> = vec![Vec::new(); per_source.len()];
    let mut targets = Vec::new();
    'bags: for (i, bag) in first.bags.iter().enumerate() {
        let mut positions = Vec::with_capacity(per_source.len());
        for lookup in &lookups {
            match lookup.get(bag.id.as_str()) {
                Some(&p) => positions.push(p),
                None => continue 'bags,
            }
        }
        let y = first.targets[i];
        for (f, (&p, ds)) in positions.iter().zip(per_source).enumerate() {
            let other = ds.targets[p];
            if other != y {
                return Err(Error::ConflictingTargets {
                    bag: bag.id.clone(),
                    first: y,
                    other,
                    source_index: f,
                });
            }
            kept[f].push(p);
        }
        targets.push(y);
    }
    if targets.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    let sources = per_source
        .iter()
        .zip(&kept)
        .map(|(ds, idx)| idx.iter().map(|&i| ds.bags[i].clone()).collect())
        .collect();
    let mut out = MultiSourceDataset::new(sources, targets)?;
    for (view, ds) in out.sources.iter_mut().zip(per_source) {
        view.normalization = ds.normalization.clone();
    }
    Ok(out)
}

/// Either a single-source or a multisource dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Dataset {
    Single(BagDataset),
    Multi(MultiSourceDataset),
}

/// Borrowed [`Dataset`].
#[derive(Clone, Copy, Debug)]
pub enum DataRef<'a> {
    Single(&'a BagDataset),
    Multi(&'a MultiSourceDataset),
}

impl Dataset {
    pub fn as_ref(&self) -> DataRef<'_> {
        match self {
            Dataset::Single(d) => DataRef::Single(d),
            Dataset::Multi(d) => DataRef::Multi(d),
        }
    }
}

impl<'a> From<&'a BagDataset> for DataRef<'a> {
    fn from(d: &'a BagDataset) -> Self {
        DataRef::Single(d)
    }
}

impl<'a> From<&'a MultiSourceDataset> for DataRef<'a> {
    fn from(d: &'a MultiSourceDataset) -> Self {
        DataRef::Multi(d)
    }
}

impl<'a> DataRef<'a> {
    pub fn len(&self) -> usize {
        match self {
            DataRef::Single(d) => d.len(),
            DataRef::Multi(d) => d.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn targets(&self) -> &'a [f64] {
        match self {
            DataRef::Single(d) => d.targets(),
            DataRef::Multi(d) => d.targets(),
        }
    }

    pub fn num_sources(&self) -> usize {
        match self {
            DataRef::Single(_) => 1,
            DataRef::Multi(d) => d.num_sources(),
        }
    }

    pub fn source_bags(&self, f: usize) -> &'a [Bag] {
        match self {
            DataRef::Single(d) => d.bags(),
            DataRef::Multi(d) => d.sources()[f].bags(),
        }
    }

    pub fn source_normalization(&self, f: usize) -> Option<&'a Normalizer> {
        match self {
            DataRef::Single(d) => d.normalization(),
            DataRef::Multi(d) => d.sources()[f].normalization(),
        }
    }

    pub fn ids(&self) -> Vec<&'a str> {
        self.source_bags(0).iter().map(Bag::id).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        match self {
            DataRef::Single(d) => Dataset::Single(d.subset(indices)),
            DataRef::Multi(d) => Dataset::Multi(d.subset(indices)),
        }
    }

    pub fn with_targets(&self, targets: Vec<f64>) -> Result<Dataset> {
        Ok(match self {
            DataRef::Single(d) => Dataset::Single(d.with_targets(targets)?),
            DataRef::Multi(d) => Dataset::Multi(d.with_targets(targets)?),
        })
    }

    /// Per-source normalizers fitted on this data.
    pub fn fit_normalizers(&self) -> Result<Vec<Normalizer>> {
        (0..self.num_sources()).map(|f| Normalizer::fit(self.source_bags(f))).collect()
    }

    pub fn normalized(&self, transforms: &[Normalizer]) -> Result<Dataset> {
        match self {
            DataRef::Single(d) => {
                let t = transforms.first().filter(|_| transforms.len() == 1).ok_or(Error::DimensionMismatch {
                    context: "normalizers per source",
                    expected: 1,
                    got: transforms.len(),
                })?;
                Ok(Dataset::Single(apply_normalizer(d, t)?))
            }
            DataRef::Multi(d) => Ok(Dataset::Multi(d.apply_normalizers(transforms)?)),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path, err: csv::Error) -> Error {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    match err.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => Error::Parse {
            path: path.to_path_buf(),
            line,
            bag: None,
            message: format!("{other:?}"),
        },
    }
}

fn csv_reader(path: &Path, has_headers: bool) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(io_err(path))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(has_headers)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn parse_field(path: &Path, line: u64, bag: Option<&str>, column: usize, field: &str) -> Result<f64> {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Parse {
            path: path.to_path_buf(),
            line,
            bag: bag.map(str::to_owned),
            message: format!("column {} is not a finite number: `{field}`", column + 1),
        }),
    }
}

/// Instance rows grouped by bag id, in order of first appearance.
pub(crate) fn read_instances(path: &Path) -> Result<Vec<Bag>> {
    let mut reader = csv_reader(path, true)?;
    let header = reader.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.len() < 2 || header.get(0) != Some("bag_id") {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            bag: None,
            message: "expected header `bag_id,f1,...,fd`".into(),
        });
    }
    let dim = header.len() - 1;

    let mut order: Vec<String> = Vec::new();
    let mut rows: HashMap<String, Vec<f64>> = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        let id = record.get(0).unwrap_or("").to_owned();
        if record.len() != dim + 1 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                bag: Some(id),
                message: format!("ragged row: {} features, header declares {dim}", record.len() - 1),
            });
        }
        let values = match rows.get_mut(&id) {
            Some(v) => v,
            None => {
                order.push(id.clone());
                rows.entry(id.clone()).or_default()
            }
        };
        for (c, field) in record.iter().enumerate().skip(1) {
            values.push(parse_field(path, line, Some(&id), c, field)?);
        }
    }
    if order.is_empty() {
        return Err(Error::NoBags {
            path: path.to_path_buf(),
        });
    }
    order
        .into_iter()
        .map(|id| {
            let values = rows.remove(&id).unwrap_or_default();
            Bag::new(id, Instances::new(dim, values)?)
        })
        .collect()
}

/// `bag_id,y` rows.
pub(crate) fn read_targets(path: &Path) -> Result<HashMap<String, f64>> {
    let mut reader = csv_reader(path, true)?;
    let header = reader.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.len() != 2 || header.get(0) != Some("bag_id") {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            bag: None,
            message: "expected header `bag_id,y`".into(),
        });
    }
    let mut targets = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        let id = record.get(0).unwrap_or("").to_owned();
        if record.len() != 2 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                bag: Some(id),
                message: format!("expected 2 columns, found {}", record.len()),
            });
        }
        let y = parse_field(path, line, Some(&id), 1, record.get(1).unwrap_or(""))?;
        if targets.insert(id.clone(), y).is_some() {
            return Err(Error::DuplicateTarget {
                path: path.to_path_buf(),
                line,
                bag: id,
            });
        }
    }
    Ok(targets)
}

fn attach_targets(bags: Vec<Bag>, targets: &HashMap<String, f64>, targets_path: &Path) -> Result<BagDataset> {
    let ys = bags
        .iter()
        .map(|b| {
            targets.get(&b.id).copied().ok_or_else(|| Error::MissingTarget {
                path: targets_path.to_path_buf(),
                bag: b.id.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    BagDataset::new(bags, ys)
}

/// Reads an instances CSV (`bag_id,f1,...,fd`) and a targets CSV (`bag_id,y`).
/// Targets for ids that do not occur in the instances file are ignored.
pub fn load_bags(instances_path: impl AsRef<Path>, targets_path: impl AsRef<Path>) -> Result<BagDataset> {
    let bags = read_instances(instances_path.as_ref())?;
    let targets = read_targets(targets_path.as_ref())?;
    attach_targets(bags, &targets, targets_path.as_ref())
}

/// One instances file per source plus a shared targets file, aligned on the
/// bag ids common to every source.
pub fn load_multisource<P: AsRef<Path>>(instance_paths: &[P], targets_path: impl AsRef<Path>) -> Result<MultiSourceDataset> {
    let targets_path = targets_path.as_ref();
    let targets = read_targets(targets_path)?;
    let per_source = instance_paths
        .iter()
        .map(|p| attach_targets(read_instances(p.as_ref())?, &targets, targets_path))
        .collect::<Result<Vec<_>>>()?;
    align_sources(&per_source)
}

/// Instances files without targets, for prediction. With several sources
/// every bag id of the first file must occur in all others; bags follow the
/// first file's order and carry placeholder targets of 0.
pub fn load_unlabeled<P: AsRef<Path>>(instance_paths: &[P]) -> Result<Dataset> {
    let mut per_source = instance_paths
        .iter()
        .map(|p| read_instances(p.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    if per_source.is_empty() {
        return Err(Error::InvalidDataset("no instances files given".into()));
    }
    let first = per_source.remove(0);
    let targets = vec![0.0; first.len()];
    if per_source.is_empty() {
        return Ok(Dataset::Single(BagDataset::new(first, targets)?));
    }
    let mut sources = vec![first];
    for (f, bags) in per_source.into_iter().enumerate() {
        let mut by_id: HashMap<String, Bag> = bags.into_iter().map(|b| (b.id.clone(), b)).collect();
        let aligned = sources[0]
            .iter()
            .map(|b| {
                by_id.remove(&b.id).ok_or_else(|| Error::InvalidDataset(format!(
                    "bag `{}` is missing from {}",
                    b.id,
                    instance_paths[f + 1].as_ref().display()
                )))
            })
            .collect::<Result<Vec<_>>>()?;
        sources.push(aligned);
    }
    Ok(Dataset::Multi(MultiSourceDataset::new(sources, targets)?))
}

/// Headerless numeric CSV, one instance per row.
pub fn load_sample(path: impl AsRef<Path>) -> Result<Instances> {
    let path = path.as_ref();
    let mut reader = csv_reader(path, false)?;
    let mut dim = None;
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        let d = *dim.get_or_insert(record.len());
        if record.len() != d {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                bag: None,
                message: format!("ragged row: {} columns, expected {d}", record.len()),
            });
        }
        for (c, field) in record.iter().enumerate() {
            values.push(parse_field(path, line, None, c, field)?);
        }
    }
    match dim {
        Some(d) => Instances::new(d, values),
        None => Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            bag: None,
            message: "sample file is empty".into(),
        }),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

fn write_row(out: &mut impl Write, lead: Option<&str>, values: &[f64]) -> std::io::Result<()> {
    let mut first = true;
    if let Some(lead) = lead {
        write!(out, "{lead}")?;
        first = false;
    }
    for v in values {
        if !first {
            out.write_all(b",")?;
        }
        first = false;
        write!(out, "{v:?}")?;
    }
    out.write_all(b"\n")
}

/// Writes the instances file. Values use the shortest representation that
/// parses back to the same `f64`.
pub fn save_instances(bags: &[Bag], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let dim = shared_dim(bags)?;
    let mut out = create(path)?;
    let body = (|| -> std::io::Result<()> {
        write!(out, "bag_id")?;
        for j in 1..=dim {
            write!(out, ",f{j}")?;
        }
        out.write_all(b"\n")?;
        for bag in bags {
            for row in bag.instances.rows() {
                write_row(&mut out, Some(&bag.id), row)?;
            }
        }
        out.flush()
    })();
    body.map_err(io_err(path))
}

pub fn save_targets(ids: &[&str], targets: &[f64], path: impl AsRef<Path>) -> Result<()> {
    write_scores(ids, targets, "y", path.as_ref())
}

/// `bag_id,y_pred` rows in the given order.
pub fn save_predictions(ids: &[&str], predictions: &[f64], path: impl AsRef<Path>) -> Result<()> {
    write_scores(ids, predictions, "y_pred", path.as_ref())
}

fn write_scores(ids: &[&str], targets: &[f64], column: &str, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    let body = (|| -> std::io::Result<()> {
        writeln!(out, "bag_id,{column}")?;
        for (id, y) in ids.iter().zip(targets) {
            writeln!(out, "{id},{y:?}")?;
        }
        out.flush()
    })();
    body.map_err(io_err(path))
}

/// Writes `data` as an instances file and a targets file.
pub fn save_bags(data: &BagDataset, instances_path: impl AsRef<Path>, targets_path: impl AsRef<Path>) -> Result<()> {
    save_instances(&data.bags, instances_path)?;
    let ids: Vec<&str> = data.bags.iter().map(Bag::id).collect();
    save_targets(&ids, &data.targets, targets_path)
}

/// Writes a headerless sample file.
pub fn save_sample(sample: &Instances, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = create(path)?;
    let body = (|| -> std::io::Result<()> {
        for row in sample.rows() {
            write_row(&mut out, None, row)?;
        }
        out.flush()
    })();
    body.map_err(io_err(path))
}

pub(crate) fn ensure_parent(path: &Path) -> Result<PathBuf> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    Ok(path.to_path_buf())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        let mut f = File::create(&p).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        p
    }

    fn bag(id: &str, rows: &[&[f64]]) -> Bag {
        Bag::from_rows(id, rows).unwrap()
    }

    #[test]
    fn loads_two_bag_file() {
        let dir = tempfile::tempdir().unwrap();
        let inst = write(dir.path(), "i.csv", "bag_id,f1,f2\na,1,2\na,3,4\nb,5,6\n");
        let tgt = write(dir.path(), "t.csv", "bag_id,y\na,1.0\nb,2.0\n");
        let ds = load_bags(&inst, &tgt).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.dim(), 2);
        assert_eq!(ds.bags()[0].len(), 2);
        assert_eq!(ds.bags()[1].len(), 1);
        assert_eq!(ds.bags()[0].instances().row(1), &[3.0, 4.0]);
        assert_eq!(ds.targets(), &[1.0, 2.0]);
    }

    #[test]
    fn bag_order_follows_first_appearance() {
        let dir = tempfile::tempdir().unwrap();
        let inst = write(dir.path(), "i.csv", "bag_id,f1\nz,1\na,2\nz,3\n");
        let tgt = write(dir.path(), "t.csv", "bag_id,y\na,1\nz,2\nextra,9\n");
        let ds = load_bags(&inst, &tgt).unwrap();
        let ids: Vec<&str> = ds.bags().iter().map(Bag::id).collect();
        assert_eq!(ids, ["z", "a"]);
        assert_eq!(ds.bags()[0].len(), 2);
        assert_eq!(ds.targets(), &[2.0, 1.0]);
    }

    #[test]
    fn empty_instances_file_has_no_bags() {
        let dir = tempfile::tempdir().unwrap();
        let inst = write(dir.path(), "i.csv", "bag_id,f1,f2\n");
        let tgt = write(dir.path(), "t.csv", "bag_id,y\n");
        let err = load_bags(&inst, &tgt).unwrap_err();
        assert!(matches!(err, Error::NoBags { .. }));
        assert!(err.to_string().contains("no bags"));
    }

    #[test]
    fn ragged_row_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let inst = write(dir.path(), "i.csv", "bag_id,f1,f2\na,1,2\nb,1,2,3\n");
        let tgt = write(dir.path(), "t.csv", "bag_id,y\na,1\nb,2\n");
        let err = load_bags(&inst, &tgt).unwrap_err();
        match &err {
            Error::Parse { line, bag, .. } => {
                assert_eq!(*line, 3);
                assert_eq!(bag.as_deref(), Some("b"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(err.to_string().contains("i.csv:3"));
    }

    #[test]
    fn non_numeric_field_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let inst = write(dir.path(), "i.csv", "bag_id,f1\na,1\na,oops\n");
        let tgt = write(dir.path(), "t.csv", "bag_id,y\na,1\n");
        let err = load_bags(&inst, &tgt).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains(":3") && msg.contains("oops") && msg.contains("`a`"), "{msg}");
    }

    #[test]
    fn missing_and_duplicate_targets() {
        let dir = tempfile::tempdir().unwrap();
        let inst = write(dir.path(), "i.csv", "bag_id,f1\na,1\nb,2\n");
        let missing = write(dir.path(), "t1.csv", "bag_id,y\na,1\n");
        let dup = write(dir.path(), "t2.csv", "bag_id,y\na,1\nb,2\na,3\n");
        assert!(matches!(
            load_bags(&inst, &missing).unwrap_err(),
            Error::MissingTarget { ref bag, .. } if bag == "b"
        ));
        assert!(matches!(
            load_bags(&inst, &dup).unwrap_err(),
            Error::DuplicateTarget { line: 4, ref bag, .. } if bag == "a"
        ));
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ds = BagDataset::new(
            vec![
                bag("x", &[&[0.1, -2.5e-17], &[1e300, 3.0]]),
                bag("y", &[&[std::f64::consts::PI, 0.0]]),
            ],
            vec![0.3, -1.0 / 3.0],
        )
        .unwrap();
        let (i, t) = (dir.path().join("i.csv"), dir.path().join("t.csv"));
        save_bags(&ds, &i, &t).unwrap();
        assert_eq!(load_bags(&i, &t).unwrap(), ds);
    }

    #[test]
    fn normalizer_pooled_statistics() {
        let one = BagDataset::new(vec![bag("a", &[&[0.0], &[2.0]])], vec![0.0]).unwrap();
        let n = fit_normalizer(&one).unwrap();
        assert_eq!(n.mean(), &[1.0]);
        assert_eq!(n.scale(), &[1.0]);

        let two = BagDataset::new(vec![bag("a", &[&[1.0]]), bag("b", &[&[3.0]])], vec![0.0, 1.0]).unwrap();
        let n = fit_normalizer(&two).unwrap();
        assert_eq!(n.mean(), &[2.0]);
        assert_eq!(n.scale(), &[1.0]);
    }

    #[test]
    fn constant_feature_gets_unit_scale_and_maps_to_zero() {
        let ds = BagDataset::new(
            vec![bag("a", &[&[0.1, 1.0], &[0.1, 5.0]]), bag("b", &[&[0.1, 2.0]])],
            vec![0.0, 1.0],
        )
        .unwrap();
        let n = fit_normalizer(&ds).unwrap();
        assert_eq!(n.mean()[0], 0.1);
        assert_eq!(n.scale()[0], 1.0);
        let z = apply_normalizer(&ds, &n).unwrap();
        for b in z.bags() {
            for r in b.instances().rows() {
                assert_eq!(r[0], 0.0);
            }
        }
    }

    #[test]
    fn apply_normalizer_cases() {
        let ds = BagDataset::new(vec![bag("a", &[&[0.0, 2.0]])], vec![1.0]).unwrap();
        let wrong = Normalizer::new(vec![1.0], vec![1.0]).unwrap();
        assert!(matches!(
            apply_normalizer(&ds, &wrong).unwrap_err(),
            Error::DimensionMismatch { expected: 1, got: 2, .. }
        ));

        let odd = BagDataset::new(vec![bag("a", &[&[-0.0, 1.0e-300], &[7.25, -3.5]])], vec![1.0]).unwrap();
        let same = apply_normalizer(&odd, &Normalizer::identity(2)).unwrap();
        for (a, b) in same.bags()[0].instances().values().iter().zip(odd.bags()[0].instances().values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(same.targets(), odd.targets());

        let four = BagDataset::new(vec![bag("a", &[&[4.0]])], vec![1.0]).unwrap();
        let t = Normalizer::new(vec![2.0], vec![2.0]).unwrap();
        assert_eq!(apply_normalizer(&four, &t).unwrap().bags()[0].instances().row(0), &[1.0]);
    }

    #[test]
    fn align_keeps_common_ids_in_first_source_order() {
        let mk = |ids: &[&str]| {
            BagDataset::new(
                ids.iter().map(|id| bag(id, &[&[1.0]])).collect(),
                ids.iter().map(|id| id.len() as f64).collect(),
            )
            .unwrap()
        };
        let a = mk(&["c", "bb", "a", "dddd"]);
        let b = mk(&["a", "eeeee", "c", "dddd"]);
        let ms = align_sources(&[a.clone(), b]).unwrap();
        assert_eq!(ms.ids(), &["c", "a", "dddd"]);
        assert_eq!(ms.targets(), &[1.0, 1.0, 4.0]);

        let single = align_sources(std::slice::from_ref(&a)).unwrap();
        assert_eq!(single.ids(), &["c", "bb", "a", "dddd"]);

        let disjoint = mk(&["q"]);
        assert!(matches!(align_sources(&[a, disjoint]).unwrap_err(), Error::EmptyIntersection));
    }

    #[test]
    fn align_rejects_conflicting_targets() {
        let a = BagDataset::new(vec![bag("x", &[&[1.0]])], vec![1.0]).unwrap();
        let b = BagDataset::new(vec![bag("x", &[&[1.0, 2.0]])], vec![1.0 + 1e-15]).unwrap();
        assert!(matches!(
            align_sources(&[a, b]).unwrap_err(),
            Error::ConflictingTargets { source_index: 1, .. }
        ));
    }

    #[test]
    fn align_with_sensor_sized_overlap() {
        // 800 and 1364 bags with 289 ids in common
        let ids_a: Vec<String> = (0..800).map(|i| format!("s{i}")).collect();
        let ids_b: Vec<String> = (511..1875).map(|i| format!("s{i}")).collect();
        let mk = |ids: &[String], d: usize| {
            BagDataset::new(
                ids.iter().map(|id| Bag::from_rows(id.as_str(), &[vec![0.5; d]]).unwrap()).collect(),
                ids.iter().map(|id| id[1..].parse::<f64>().unwrap()).collect(),
            )
            .unwrap()
        };
        let ms = align_sources(&[mk(&ids_a, 16), mk(&ids_b, 12)]).unwrap();
        assert_eq!(ms.len(), 289);
        assert_eq!(ms.sources()[0].dim(), 16);
        assert_eq!(ms.sources()[1].dim(), 12);
        for f in 0..2 {
            assert_eq!(ms.source(f).targets(), ms.targets());
        }
    }

    #[test]
    fn bag_rejects_non_finite_and_empty() {
        assert!(Bag::from_rows("a", &[[f64::NAN]]).is_err());
        assert!(Bag::new("a", Instances::new(2, vec![]).unwrap()).is_err());
        let err = BagDataset::new(vec![bag("a", &[&[1.0]]), bag("b", &[&[1.0, 2.0]])], vec![0.0, 0.0]);
        assert!(err.is_err());
    }
}
