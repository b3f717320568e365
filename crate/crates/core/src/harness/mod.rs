//! Experiment orchestration: single fits, grids, replicate studies, lag
//! sensitivity and per-epoch prediction snapshots.
//!
//! Every score is on the min-max scaled target, with the scaler fitted on
//! the training period only.

mod config;
mod fit;
mod grid;
mod output;
mod study;

pub use config::{ArimaCaps, DataSource, ExperimentConfig, ModelKind};
pub use fit::{
    fit_experiment, fit_experiment_with_snapshots, load_data, FitOutcome, FittedModel, Snapshot,
    PREDICTORS, TARGET,
};
pub use grid::{run_grid, run_on, run_single, GridOutcome, GridSpec, ResultRow};
pub use output::{
    write_csv, write_csv_file, write_evolution_csv, write_json, write_lag_table_csv,
    write_results_csv, write_summary_csv, write_timings_csv, RunManifest,
};
pub use study::{
    epoch_evolution, lag_sensitivity, replicate_grid, replicate_simulation_study, summarize,
    Evolution, LagRow, ReplicateStudy, StudySettings, SummaryRow, EVOLUTION_EPOCHS, LAG_STUDY_LAGS,
};
