//! Multinomial logit by damped Newton iterations.
//!
//! The fit works in the orthonormal basis of the design's independent
//! columns (same likelihood, better conditioning) and maps coefficients back
//! at the end. Column 0 of the design is the intercept, so basis direction 0
//! is the constant vector.

use nalgebra::{DMatrix, DVector};

use super::design::{DesignMatrix, Orthogonal};
use super::{FitResult, RegressError};

pub const MAX_NEWTON_ITERS: usize = 100;
const REL_TOL: f64 = 1e-8;
/// Log-likelihood above this means every sample is fit with probability ~1:
/// complete separation, the MLE does not exist.
const SEPARATION_LL: f64 = -1e-7;
const RIDGE_PER_SAMPLE: f64 = 1e-4;

/// Fits `y ~ x` with reference level 0. `y` holds level indices in `0..k`
/// and every level must occur.
///
/// When Newton iterations fail to converge (separation or the iteration
/// limit) the model is refit once with a ridge penalty of `1e-4 n` on the
/// non-intercept coefficients and returned inside
/// [`RegressError::NotConverged`] with `converged = false`; its
/// log-likelihood is the unpenalized one at the ridge solution.
pub fn fit_multinomial(y: &[u32], k: usize, x: &DesignMatrix) -> Result<FitResult, RegressError> {
    assert_eq!(y.len(), x.nrows());
    assert!(k >= 2);
    let n = y.len();
    let mut counts = vec![0usize; k];
    for &v in y {
        counts[v as usize] += 1;
    }
    if let Some(level) = counts.iter().position(|&c| c == 0) {
        return Err(RegressError::MissingLevel(level));
    }
    let qr = Orthogonal::new(x);
    let rank = qr.rank();
    if rank == 0 {
        return Err(RegressError::RankDeficient);
    }
    if n <= rank {
        return Err(RegressError::InsufficientSamples { n, columns: rank });
    }
    let problem = Problem { qr: &qr, y, k, n };
    let mut init = vec![0.0; rank * (k - 1)];
    let sqrt_n = (n as f64).sqrt();
    for l in 1..k {
        init[(l - 1) * rank] = (counts[l] as f64 / counts[0] as f64).ln() * sqrt_n;
    }

    let plain = problem.newton(init.clone(), 0.0);
    let dropped = x.ncols() - rank;
    if plain.converged {
        return Ok(problem.into_fit(plain, x.ncols(), dropped));
    }
    let ridge = problem.newton(init, RIDGE_PER_SAMPLE * n as f64);
    let mut fit = problem.into_fit(ridge, x.ncols(), dropped);
    fit.converged = false;
    Err(RegressError::NotConverged(Box::new(fit)))
}

struct Problem<'a> {
    qr: &'a Orthogonal,
    y: &'a [u32],
    k: usize,
    n: usize,
}

struct NewtonOutcome {
    gamma: Vec<f64>,
    log_likelihood: f64,
    converged: bool,
    iterations: usize,
}

struct Eval {
    objective: f64,
    log_likelihood: f64,
    /// `n x (k-1)` row-major probabilities of levels `1..k`.
    probs: Vec<f64>,
}

impl Problem<'_> {
    fn rank(&self) -> usize {
        self.qr.rank()
    }

    fn eval(&self, gamma: &[f64], ridge: f64) -> Eval {
        let (n, m, r) = (self.n, self.k - 1, self.rank());
        let mut eta = vec![0.0; n * m];
        for l in 0..m {
            for j in 0..r {
                let g = gamma[l * r + j];
                if g == 0.0 {
                    continue;
                }
                for (i, q) in self.qr.q_col(j).iter().enumerate() {
                    eta[i * m + l] += g * q;
                }
            }
        }
        let mut ll = 0.0;
        let mut probs = vec![0.0; n * m];
        for i in 0..n {
            let row = &eta[i * m..(i + 1) * m];
            let max = row.iter().cloned().fold(0.0, f64::max);
            let mut total = (-max).exp();
            for &e in row {
                total += (e - max).exp();
            }
            let lse = max + total.ln();
            let yi = self.y[i] as usize;
            ll += if yi == 0 { -lse } else { row[yi - 1] - lse };
            for l in 0..m {
                probs[i * m + l] = (row[l] - lse).exp();
            }
        }
        let penalty: f64 = (0..m).flat_map(|l| (1..r).map(move |j| l * r + j)).map(|idx| gamma[idx] * gamma[idx]).sum();
        Eval { objective: ll - 0.5 * ridge * penalty, log_likelihood: ll, probs }
    }

    fn newton(&self, mut gamma: Vec<f64>, ridge: f64) -> NewtonOutcome {
        let (n, m, r) = (self.n, self.k - 1, self.rank());
        let dim = m * r;
        let mut cur = self.eval(&gamma, ridge);
        let mut converged = false;
        let mut iterations = 0;
        while iterations < MAX_NEWTON_ITERS {
            iterations += 1;
            // gradient and negative Hessian of the penalized log-likelihood
            let mut grad = DVector::<f64>::zeros(dim);
            let mut hess = DMatrix::<f64>::zeros(dim, dim);
            let mut resid = vec![0.0; m];
            let mut w = vec![0.0; m * m];
            for i in 0..n {
                let p = &cur.probs[i * m..(i + 1) * m];
                let yi = self.y[i] as usize;
                for l in 0..m {
                    resid[l] = if yi == l + 1 { 1.0 } else { 0.0 } - p[l];
                    for l2 in 0..m {
                        w[l * m + l2] = p[l] * (if l == l2 { 1.0 } else { 0.0 } - p[l2]);
                    }
                }
                for j in 0..r {
                    let qij = self.qr.q[j * n + i];
                    for l in 0..m {
                        grad[l * r + j] += qij * resid[l];
                    }
                    for j2 in 0..=j {
                        let qq = qij * self.qr.q[j2 * n + i];
                        for l in 0..m {
                            for l2 in 0..m {
                                hess[(l * r + j, l2 * r + j2)] += qq * w[l * m + l2];
                            }
                        }
                    }
                }
            }
            // fill the upper triangle of each (j, j2 > j) block from symmetry
            for a in 0..dim {
                for b in 0..dim {
                    let (ja, jb) = (a % r, b % r);
                    if jb > ja {
                        hess[(a, b)] = hess[(b, a)];
                    }
                }
            }
            if ridge > 0.0 {
                for l in 0..m {
                    for j in 1..r {
                        grad[l * r + j] -= ridge * gamma[l * r + j];
                        hess[(l * r + j, l * r + j)] += ridge;
                    }
                }
            }
            let step = solve_spd(hess, &grad);

            let mut t = 1.0;
            let mut accepted = None;
            while t > 1e-12 {
                let cand: Vec<f64> = gamma.iter().zip(step.iter()).map(|(g, d)| g + t * d).collect();
                let e = self.eval(&cand, ridge);
                if e.objective >= cur.objective {
                    accepted = Some((cand, e));
                    break;
                }
                t *= 0.5;
            }
            let Some((cand, e)) = accepted else {
                // no ascent direction left at working precision
                converged = true;
                break;
            };
            let rel = (e.objective - cur.objective).abs() / cur.objective.abs().max(f64::MIN_POSITIVE);
            gamma = cand;
            cur = e;
            if rel < REL_TOL {
                converged = true;
                break;
            }
            if ridge == 0.0 && cur.log_likelihood > SEPARATION_LL {
                break;
            }
        }
        NewtonOutcome { gamma, log_likelihood: cur.log_likelihood, converged, iterations }
    }

    fn into_fit(&self, out: NewtonOutcome, ncols: usize, dropped: usize) -> FitResult {
        let r = self.rank();
        let mut coefficients = Vec::with_capacity((self.k - 1) * ncols);
        for l in 0..self.k - 1 {
            let beta = self.qr.solve_r(&out.gamma[l * r..(l + 1) * r]);
            coefficients.extend(self.qr.expand(&beta, ncols));
        }
        FitResult {
            coefficients,
            log_likelihood: out.log_likelihood,
            converged: out.converged,
            iterations: out.iterations,
            dropped_columns: dropped,
        }
    }
}

/// Solves `H d = g` for symmetric positive (semi)definite `H`, adding a
/// growing diagonal jitter when the Cholesky factorization fails.
fn solve_spd(h: DMatrix<f64>, g: &DVector<f64>) -> DVector<f64> {
    let scale = (0..h.nrows()).map(|i| h[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut jitter = 0.0;
    loop {
        let mut hj = h.clone();
        for i in 0..hj.nrows() {
            hj[(i, i)] += jitter;
        }
        if let Some(ch) = hj.cholesky() {
            return ch.solve(g);
        }
        jitter = if jitter == 0.0 { 1e-10 * scale } else { jitter * 10.0 };
        if jitter > 1e6 * scale {
            // gradient ascent as a last resort
            return g / scale;
        }
    }
}
