//! Bag-level regressors.
//!
//! | kind | representation of a bag | solve |
//! |------|--------------------------|-------|
//! | `LR`  | input-space mean vector | primal ridge, features centered |
//! | `KR`  | input-space mean vector | RBF kernel ridge (dual) |
//! | `KDR` | kernel mean embedding | dual ridge on the bag Gram matrix |
//! | `RDR` | mean random Fourier features | primal ridge |
//! | `MDR` | one mean embedding per source | dual ridge on the summed Gram matrices |
//! | `STACKED-*` | all sources concatenated into one feature space | as the single-source kind |
//!
//! Every model centers the targets before solving and adds the training mean
//! back as an intercept.
//!
//! The stacked kinds pair every instance of one source with every instance of
//! the others inside a bag and concatenate their features. That joint bag is
//! never materialized: its mean vector is the concatenation of per-source
//! means, its RBF mean-embedding kernel is the product of per-source bag
//! kernels (same σ), and its mean Fourier features are the products of the
//! per-source complex phase means.

mod model;
mod ridge;

pub use model::{
    fit_baseline, fit_kdr, fit_mdr, fit_model, fit_rdr, fit_stacked, predict_kdr, predict_rdr,
    reference_sigmas, BaselineKind, Combine, FittedModel, ModelKind, ModelSpec, Prepared,
    StackedKind, StackedParams, LR_LAMBDA_FLOOR,
};
pub use ridge::{solve_ridge_dual, RidgeSolution, JITTERS};
