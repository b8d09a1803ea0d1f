//! Filtering benchmarks for the `tpquad` library: scenario simulation,
//! RMSE/INC scoring with bootstrap uncertainty, and report generation.

pub mod config;
pub mod error;
pub mod metrics;
pub mod report;
pub mod runner;
pub mod scenario;
pub mod svg;

pub use config::{BenchConfig, FilterEntry, FilterFamily};
pub use error::{BenchError, Result};
pub use report::MetricsReport;
pub use runner::{precompute_weights, run_benchmark};
pub use scenario::{Scenario, ScenarioKind, Trajectory};
