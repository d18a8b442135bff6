//! Empirical-Bayes shrinkage estimation of many binomial rates.
//!
//! The library estimates per-town event probabilities from (count, population)
//! pairs. Raw rates are shrunk toward the ensemble mean through a beta prior
//! fit by the method of moments, with James-Stein style estimators and
//! Wald/credible intervals alongside, and a reproducible Monte Carlo engine
//! for risk and coverage comparisons.
//!
//! Module map:
//! - [`specfun`]: log-gamma, regularized incomplete beta, beta quantile
//! - [`distributions`]: beta/binomial math, moment fitting, exact sampling
//! - [`estimators`]: MLE, posterior-mean shrinkage, James-Stein, Efron-Morris
//! - [`intervals`]: Wald and equal-tailed credible intervals
//! - [`simulation`]: Monte Carlo risk and coverage study
//! - [`ingestion`]: CSV loading, joining, normalized persistence
//! - [`synthetic`]: deterministic synthetic benchmark datasets
//! - [`manifest`]: run manifests for reproducibility

pub mod distributions;
pub mod estimators;
pub mod ingestion;
pub mod intervals;
pub mod manifest;
pub mod simulation;
pub mod specfun;
pub mod synthetic;

pub use distributions::{BetaParams, RateSample, RngState};
pub use estimators::{EstimateRecord, TownObservation};
pub use ingestion::Dataset;
pub use intervals::{Interval, IntervalKind};
pub use simulation::{SimulationConfig, SimulationSummary};

/// Errors shared across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Input outside an operation's mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Input is valid but degenerate for the requested computation,
    /// e.g. a sample whose moments no beta distribution can match.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Paired inputs of unequal length.
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    /// An iteration failed to converge. Indicates an internal defect for
    /// in-contract inputs.
    #[error("convergence failure: {0}")]
    Convergence(String),

    /// Malformed or inconsistent input data (parse failures, bad joins,
    /// duplicate keys, missing years).
    #[error("data error: {0}")]
    Data(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
