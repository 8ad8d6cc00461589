//! Off-line experiments on a surrogate field: simulated sampling, the
//! exploration loop, and the metrics used to compare strategies.

pub mod compare;
pub mod metrics;
pub mod run;
pub mod surrogate;

pub use compare::{compare_strategies, run_grid, summarize, ComparisonRow, RunSummary};
pub use metrics::{kv_mse_correlation, mse, pearson, MseReport};
pub use run::{build_run_model, layer_params, run_exploration, unbounded, RunOptions, RunRecord, StepRecord};
pub use surrogate::{generate_surrogate, sample_at, CovarianceModel, Provenance, SurrogateField};
