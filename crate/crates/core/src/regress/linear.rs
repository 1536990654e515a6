use super::design::{dot, DesignMatrix, Orthogonal};
use super::{FitResult, RegressError};

/// Floor on the MLE variance in the Gaussian log-likelihood.
pub(crate) const VARIANCE_FLOOR: f64 = 1e-12;

/// Least squares with the Gaussian log-likelihood at the MLE variance
/// `RSS / n` (floored at [`VARIANCE_FLOOR`]).
pub fn fit_linear(y: &[f64], x: &DesignMatrix) -> Result<FitResult, RegressError> {
    assert_eq!(y.len(), x.nrows());
    if y.iter().any(|v| !v.is_finite()) {
        return Err(RegressError::NonFinite);
    }
    let n = y.len();
    let qr = Orthogonal::new(x);
    let rank = qr.rank();
    if rank == 0 {
        return Err(RegressError::RankDeficient);
    }
    if n <= rank {
        return Err(RegressError::InsufficientSamples { n, columns: rank });
    }
    let qty: Vec<f64> = (0..rank).map(|k| dot(qr.q_col(k), y)).collect();
    let mut resid = y.to_vec();
    for (k, &c) in qty.iter().enumerate() {
        for (r, q) in resid.iter_mut().zip(qr.q_col(k)) {
            *r -= c * q;
        }
    }
    let rss = dot(&resid, &resid);
    let beta = qr.solve_r(&qty);
    Ok(FitResult {
        coefficients: qr.expand(&beta, x.ncols()),
        log_likelihood: gaussian_log_likelihood(rss, n),
        converged: true,
        iterations: 1,
        dropped_columns: x.ncols() - rank,
    })
}

pub(crate) fn gaussian_log_likelihood(rss: f64, n: usize) -> f64 {
    let nf = n as f64;
    let var = (rss / nf).max(VARIANCE_FLOOR);
    -0.5 * nf * (2.0 * std::f64::consts::PI * var).ln() - rss / (2.0 * var)
}
