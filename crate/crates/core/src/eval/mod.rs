//! Metrics, bag-level splits, grid search and the repeated-trial protocol.

mod cv;
mod metrics;
mod protocol;
mod report;
mod split;

pub use cv::{grid_search_cv, CvEntry, CvResult, Grid, GridPoint};
pub use metrics::{compute_metrics, Metrics};
pub use protocol::{run_protocol, Aggregate, EvalReport, PhaseTimings, ProtocolParams, Summary, TrialResult};
pub use report::{comparison_csv, comparison_text, format_sig, TABLE_COLUMNS};
pub use split::{kfold_split, train_test_split};
