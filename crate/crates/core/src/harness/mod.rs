//! Config-driven experiments, CSV ingestion and result output.

pub mod config;
pub mod csv_io;
pub mod experiments;
pub mod results;
pub mod source;

pub use config::{ExperimentConfig, ExperimentKind, LevelSpec, ModelSpec, ThetaSpec};
pub use csv_io::{load_returns_csv, parse_returns_csv};
pub use experiments::{
    run_experiment, run_portfolio_experiment, run_rmse_benchmark, run_variance_study,
};
pub use results::{
    emit_results, parse_results_csv, read_results_csv, results_csv, sidecar_path, BenchmarkResult,
    BenchmarkValue, Cell, VarianceRatio,
};
pub use source::{EmpiricalModel, ModelSource};
