//! Distribution regression on bags of instances.
//!
//! A bag is a set of feature vectors sharing one scalar target. Regressors
//! here summarize each bag by its kernel mean embedding (exactly, or through
//! random Fourier features) and fit ridge regression on top. Mean-vector
//! baselines, a multisource variant, MMD two-sample tests, and the
//! cross-validated evaluation protocol live alongside.
//!
//! ```
//! use distreg::{fit_kdr, predict_kdr, Bag, BagDataset, RbfParams};
//!
//! let bags = vec![
//!     Bag::from_rows("a", &[[0.0], [0.1]]).unwrap(),
//!     Bag::from_rows("b", &[[-2.0], [2.0]]).unwrap(),
//! ];
//! let train = BagDataset::new(bags, vec![0.1, 2.0]).unwrap();
//! let model = fit_kdr(&train, RbfParams::new(1.0).unwrap(), 1e-3).unwrap();
//! let pred = predict_kdr(&model, &train).unwrap();
//! assert!((pred[1] - 2.0).abs() < 0.05);
//! ```
//!
//! Parallel execution uses rayon behind the default `parallel` feature;
//! results are identical with the feature off.

pub mod data;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod kernel;
pub mod mmd;
pub mod numeric;
mod parallel;
pub mod regress;
pub mod rff;
pub mod synth;

pub use data::{
    align_sources, apply_normalizer, fit_normalizer, load_bags, load_multisource, load_sample, load_unlabeled, save_bags,
    save_instances, save_predictions, save_sample, save_targets, Bag, BagDataset, DataRef, Dataset, Instances, MultiSourceDataset,
    Normalizer,
};
pub use error::{Error, Result};
pub use eval::{
    compute_metrics, grid_search_cv, kfold_split, run_protocol, train_test_split, CvResult, EvalReport, Grid,
    GridPoint, Metrics, ProtocolParams,
};
pub use kernel::{
    bag_gram, bag_mean_kernel_entry, cross_bag_gram, cross_gram, median_heuristic, median_heuristic_bags,
    multisource_bag_gram, multisource_cross_bag_gram, rbf_kernel, BagGram, RbfParams,
};
pub use mmd::{mmd_permutation_test, mmd_squared, PermutationTest};
pub use parallel::is_parallel;
pub use regress::{
    fit_baseline, fit_kdr, fit_mdr, fit_model, fit_rdr, fit_stacked, predict_kdr, predict_rdr, solve_ridge_dual,
    BaselineKind, FittedModel, ModelKind, ModelSpec, RidgeSolution, StackedKind, StackedParams,
};
pub use rff::{bag_mean_feature_rows, bag_mean_features, feature_map, sample_basis, FourierBasis};
