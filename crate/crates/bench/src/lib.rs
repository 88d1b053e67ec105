//! Benchmark harness for featmem associative memories: experiment
//! configuration, the retrieval, mean-sweep, and timing runners, and report
//! writers.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiment;
pub mod report;

pub use config::{DatasetSource, ExperimentConfig, FeatureSource, ModelMode, ReportFormat};
pub use error::{BenchError, Result};
pub use experiment::{
    build_memory, evaluate_corruption, evaluate_grid, load_items, run_mean_sweep, run_retrieval_experiment,
    run_timing, sweep_models, time_memory, BuiltMemory,
};
pub use report::{write_report, Cell, ExperimentReport, Metadata, Report, SweepReport, TimingReport};
