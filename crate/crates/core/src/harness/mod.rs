//! Seeded experiment runners and their CSV/JSON output.

mod config;
mod record;
mod runners;
mod setup;

pub use config::{DomainKind, Experiment, ExperimentConfig, Method};
pub use record::{
    errors_where, l2_error, read_records_csv, records_from_json, records_to_csv_string,
    records_to_json, write_records_csv, Summary, Table, TrialRecord,
};
pub use runners::{
    all_converged, regression_sample, run_boundary_dist, run_consistency, run_dim_bench,
    run_epsilon_table, run_estimate, run_experiment, run_mixture, run_polygon_bench,
    run_regression, run_retention, ConsistencyGrid, ExperimentOutput, RegressionSample,
};
pub use setup::{
    ball_radius, default_m, gaussian_data, square_polygon, synthetic_polygon, trial_rng,
    DomainSetup, BOUNDARY_STREAM, DATA_STREAM, INIT_STREAM,
};
