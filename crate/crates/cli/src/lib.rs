// `!(x > 0.0)` is how NaN gets rejected along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod capacity;
pub mod config;
pub mod error;
pub mod experiment;
pub mod output;
pub mod suite;

pub use capacity::{capacity_sweep, CapacityConfig, CapacityReport};
pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
pub use experiment::{run_experiment, run_experiment_with_workers, workers_from_env, MetricsRow, RunSummary, SummaryRow};
pub use suite::{run_verification_suite, write_suite_report, ContractResult, SuiteOptions};
