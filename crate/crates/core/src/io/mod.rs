//! Run configuration, CSV formats and reporting helpers.

pub mod config;
pub mod files;
pub mod format;
pub mod report;

pub use config::{load_config, parse_config, RunConfig, SurrogateSource};
pub use files::{
    export_grid_csv, load_grid_csv, load_mask_csv, load_samples_csv, write_comparison_csv, write_comparison_table,
    write_plan_csv, write_run_csv, write_samples_csv, write_variogram_csv,
};
pub use report::{normalized_rmse_grids, normalized_rmse_report, NrmseRow};
