//! Regression engines behind the likelihood-ratio test and χ² tail
//! probabilities.

mod chi2;
mod design;
mod linear;
mod multinomial;

pub use chi2::{chi_squared_sf, ln_gamma, regularized_gamma_q};
pub use design::DesignMatrix;
pub use linear::fit_linear;
pub use multinomial::{fit_multinomial, MAX_NEWTON_ITERS};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// For linear fits one entry per design column; for multinomial fits
    /// `k - 1` consecutive blocks of design-column coefficients (levels
    /// `1..k`, level 0 is the reference). Dropped columns get 0.
    pub coefficients: Vec<f64>,
    pub log_likelihood: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Design columns removed as linearly dependent on earlier ones.
    pub dropped_columns: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegressError {
    #[error("{n} samples cannot support {columns} independent columns")]
    InsufficientSamples { n: usize, columns: usize },
    #[error("design is rank deficient")]
    RankDeficient,
    #[error("response level {0} never occurs")]
    MissingLevel(usize),
    #[error("response contains non-finite values")]
    NonFinite,
    #[error("Newton iterations did not converge; ridge fallback fit attached")]
    NotConverged(Box<FitResult>),
}
