//! Benchmark harness and command-line front end for the `newst` optimizers.
//!
//! A [`BenchConfig`] (JSON) names a dataset, a GLM family, and a list of
//! methods; [`run_benchmark`] runs them to a shared tolerance and writes:
//!
//! - `trace_<method>.csv`: `t,objective,grad_norm,step_norm,elapsed_seconds`
//! - `summary.json` / `summary.txt`: elapsed seconds, iterations, termination
//! - `objective_gap.csv`: long-format `log10(ℓ − ℓ_min + 1e-16)` vs. time and iteration
//! - `beta_star.json`: the reference minimizer used for distance diagnostics

use std::path::PathBuf;

pub mod cli;
mod config;
mod diagnose;
mod runner;

pub use config::{BenchConfig, DatasetSource, SEED_ENV};
pub use diagnose::{diagnose, distance_errors, step_norm_errors, Diagnosis, ErrorSource};
pub use runner::{
    iterates_file, prepare_dataset, read_beta_star, read_iterates, run_benchmark, run_benchmark_on, select_beta_star,
    summary_table, trace_file, write_gap_table, write_iterates, BenchReport, BetaStar, MethodSummary,
    RepetitionReport, BETA_STAR_JSON, GAP_CSV, GAP_FLOOR, SUMMARY_JSON, SUMMARY_TEXT,
};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Core(#[from] newst::Error),
    #[error("{path}: {1}", path = .0.display())]
    Io(PathBuf, #[source] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, BenchError>;
