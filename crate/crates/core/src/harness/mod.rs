//! Experiment plumbing: CSV I/O, metrics, the grid oracle, run configuration
//! and benchmarks.

pub mod bench;
pub mod config;
pub mod io;
pub mod metrics;
pub mod oracle;
pub mod report;

pub use bench::{derive_seed, run_benchmark, write_report};
pub use config::{LambdaSpec, Method, RunConfig};
pub use report::Report;
