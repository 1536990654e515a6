//! Likelihood-ratio conditional independence test for mixed variables.
//!
//! `X ⟂ Y | S` is tested by regressing a dependent variable (one of X, Y) on
//! `S` with and without the other. The statistic `2 (ll_full - ll_reduced)`
//! is referred to χ² with `d_X d_Y` degrees of freedom, where `d = 1` for a
//! continuous variable and `k - 1` for a k-level categorical one.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{MixedDataset, VariableMeta};
use crate::regress::{chi_squared_sf, fit_linear, fit_multinomial, DesignMatrix, FitResult, RegressError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CiResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub independent: bool,
    /// A regression failed its preconditions or did not converge.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dependent {
    X,
    Y,
}

/// Which variable is regressed on the others: the continuous one when the
/// kinds differ, `x` when both are continuous, and the one with fewer levels
/// when both are categorical (`x` on a tie).
pub fn choose_dependent(x: &VariableMeta, y: &VariableMeta) -> Dependent {
    match (x.level_count(), y.level_count()) {
        (None, _) => Dependent::X,
        (Some(_), None) => Dependent::Y,
        (Some(kx), Some(ky)) => {
            if ky < kx {
                Dependent::Y
            } else {
                Dependent::X
            }
        }
    }
}

/// Tests `x ⟂ y | s` at level `alpha`.
///
/// A regression that cannot be fit (too few samples for the design) yields a
/// `degenerate` result with `independent = false`. A multinomial fit that
/// fails to converge is replaced by its ridge fallback and flags the result
/// as `degenerate` without forcing the verdict.
pub fn ci_test(data: &MixedDataset, x: usize, y: usize, s: &[usize], alpha: f64) -> Result<CiResult> {
    if x == y {
        return Err(Error::InvalidArgument("x and y must differ".into()));
    }
    if s.contains(&x) || s.contains(&y) {
        return Err(Error::InvalidArgument("conditioning set contains x or y".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let nv = data.n_vars();
    if x >= nv || y >= nv || s.iter().any(|&v| v >= nv) {
        return Err(Error::InvalidArgument("variable index out of range".into()));
    }

    let (vx, vy) = (data.variable(x), data.variable(y));
    let dof = vx.dof() * vy.dof();
    let (dep, other) = match choose_dependent(vx, vy) {
        Dependent::X => (x, y),
        Dependent::Y => (y, x),
    };

    let reduced = DesignMatrix::with_predictors(data, s);
    let mut full = reduced.clone();
    full.push_variable(data, other);

    let (ll_reduced, ll_full, degenerate) = match nested_log_likelihoods(data, dep, &reduced, &full) {
        Some(v) => v,
        None => {
            return Ok(CiResult { statistic: f64::INFINITY, dof, p_value: 0.0, independent: false, degenerate: true })
        }
    };
    let statistic = (2.0 * (ll_full - ll_reduced)).max(0.0);
    let p_value = chi_squared_sf(statistic, dof);
    Ok(CiResult { statistic, dof, p_value, independent: p_value > alpha, degenerate })
}

/// `(ll_reduced, ll_full, degenerate)`, or `None` when a fit is impossible.
fn nested_log_likelihoods(
    data: &MixedDataset,
    dep: usize,
    reduced: &DesignMatrix,
    full: &DesignMatrix,
) -> Option<(f64, f64, bool)> {
    if let Some(y) = data.continuous(dep) {
        let r = fit_linear(y, reduced).ok()?;
        let f = fit_linear(y, full).ok()?;
        return Some((r.log_likelihood, f.log_likelihood, false));
    }
    let levels = data.categorical(dep).expect("variable is neither continuous nor categorical");
    // Levels absent from these rows carry no likelihood; the supremum over
    // the full model equals the fit over the levels present.
    let k = data.variable(dep).level_count().unwrap_or(0);
    let mut remap = vec![u32::MAX; k];
    let mut present = 0u32;
    for &l in levels {
        if remap[l as usize] == u32::MAX {
            remap[l as usize] = present;
            present += 1;
        }
    }
    if present < 2 {
        return Some((0.0, 0.0, false));
    }
    let mut order: Vec<usize> = (0..k).filter(|&l| remap[l] != u32::MAX).collect();
    order.sort_unstable();
    for (new, &old) in order.iter().enumerate() {
        remap[old] = new as u32;
    }
    let y: Vec<u32> = levels.iter().map(|&l| remap[l as usize]).collect();
    let kp = present as usize;
    let (r, rd) = multinomial(&y, kp, reduced)?;
    let (f, fd) = multinomial(&y, kp, full)?;
    Some((r.log_likelihood, f.log_likelihood, rd || fd))
}

fn multinomial(y: &[u32], k: usize, x: &DesignMatrix) -> Option<(FitResult, bool)> {
    match fit_multinomial(y, k, x) {
        Ok(f) => Some((f, false)),
        Err(RegressError::NotConverged(f)) => Some((*f, true)),
        Err(_) => None,
    }
}
