//! Scripted simulation experiments at desk scale.

pub mod example1;
pub mod example2;
pub mod power;
pub mod qq;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error(transparent)]
    Logistic(#[from] crate::logistic::LogisticError),
    #[error(transparent)]
    PValue(#[from] crate::pvalue::PValueError),
    #[error(transparent)]
    Score(#[from] crate::likelihood::ScoreError),
    #[error(transparent)]
    Stat(#[from] crate::stats::StatError),
    #[error(transparent)]
    Window(#[from] crate::windows::WindowError),
    #[error(transparent)]
    Gaussian(#[from] crate::gaussian::GaussianError),
    #[error("{0}")]
    Invalid(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Binomial standard error of a rate estimated from `reps` replicates.
pub fn rate_std_error(rate: f64, reps: u64) -> f64 {
    (rate * (1.0 - rate) / reps as f64).sqrt()
}

/// A Monte Carlo rate with its binomial standard error.
#[derive(Debug, Clone, Copy)]
pub struct RateEstimate {
    pub rate: f64,
    pub std_error: f64,
}
