//! Simulation harness for preamble-based multi-target velocity estimation:
//! scenario files, Monte Carlo sweeps, CSV output, frame dumps and the
//! `wigig-radar` command line.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod dump;
pub mod experiment;

pub use config::Scenario;
pub use experiment::{EstimatorKind, ExperimentConfig, PointResult, Selection, Simulator};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "WIGIG_RADAR_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("estimation failed: {0}")]
    Estimation(#[from] wigig_radar_core::Error),
    #[error("aggregation failed: {0}")]
    Aggregation(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    /// 1 for configuration and usage problems, 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Io(_) | HarnessError::Csv(_) => 1,
            HarnessError::Estimation(_) | HarnessError::Aggregation(_) => 2,
        }
    }
}

/// Thread pool sized by `WIGIG_RADAR_THREADS`, or rayon's default.
pub fn thread_pool() -> Result<rayon::ThreadPool, HarnessError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| HarnessError::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| HarnessError::Config(e.to_string()))
}
