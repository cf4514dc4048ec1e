//! End-to-end driver: configuration, the per-trial online loop, the Monte
//! Carlo experiment runner, the variance-error curve, and result export.

pub mod config;
pub mod curve;
pub mod experiment;
pub mod export;
pub mod rng;
pub mod trial;

pub use config::{ExperimentConfig, TargetSpec};
pub use curve::variance_error_curve;
pub use experiment::{
    aggregate, build_truth, run_experiment, run_trials, AggregateCell, AggregateResult,
    CurveCell, Histogram, VarianceErrorCurve, SCHEMA_VERSION,
};
pub use export::{export_results, from_json_str, to_csv_string, to_json_string};
pub use trial::{run_trial, run_trial_with_checkpoints, ArmTargetReport, TrialResult};
