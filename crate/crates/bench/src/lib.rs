//! Benchmark problems, repeated experiments and result files for
//! `ssis-core`.

pub mod config;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod output;
pub mod problems;
pub mod validate;

pub use config::BenchConfig;
pub use error::{BenchError, Result};
pub use experiment::{run_experiment, ExperimentReport, MethodKind, RepRow};
pub use problems::{lookup, registry, BenchmarkProblem};
