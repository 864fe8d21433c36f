use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}:{line}: {message}{}", path.display(), bag_suffix(bag))]
    Parse {
        path: PathBuf,
        line: u64,
        bag: Option<String>,
        message: String,
    },

    #[error("{}: no bags", path.display())]
    NoBags { path: PathBuf },

    #[error("{}: no target for bag `{bag}`", path.display())]
    MissingTarget { path: PathBuf, bag: String },

    #[error("{}:{line}: duplicate target for bag `{bag}`", path.display())]
    DuplicateTarget {
        path: PathBuf,
        line: u64,
        bag: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: dimension mismatch (expected {expected}, got {got})")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid bag `{bag}`: {message}")]
    InvalidBag { bag: String, message: String },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("conflicting targets for bag `{bag}`: {first} vs {other} (source {source_index})")]
    ConflictingTargets {
        bag: String,
        first: f64,
        other: f64,
        source_index: usize,
    },

    #[error("sources share no bag ids")]
    EmptyIntersection,

    #[error("ill-conditioned system: factorization failed with jitters {jitters:?}")]
    IllConditioned { jitters: Vec<f64> },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("length mismatch: {expected} true values vs {got} predictions")]
    LengthMismatch { expected: usize, got: usize },

    #[error("R² is undefined for constant targets")]
    ConstantTargets,

    #[error("not enough bags: {0}")]
    InsufficientBags(String),

    #[error("every grid point failed; first failure: {0}")]
    AllGridPointsFailed(String),

    #[error("model: {0}")]
    Model(String),

    #[error("config: {0}")]
    Config(String),
}

fn bag_suffix(bag: &Option<String>) -> String {
    match bag {
        Some(b) => format!(" (bag `{b}`)"),
        None => String::new(),
    }
}
