use crate::model::{Column, MixedDataset};

/// Column-major regression design: a leading intercept column, then one
/// column per continuous predictor and `k - 1` indicator columns (levels
/// `1..k`, level 0 is the reference) per k-level categorical predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    n: usize,
    cols: Vec<f64>,
    ncols: usize,
}

impl DesignMatrix {
    pub fn intercept(n: usize) -> Self {
        DesignMatrix { n, cols: vec![1.0; n], ncols: 1 }
    }

    pub fn with_predictors(data: &MixedDataset, predictors: &[usize]) -> Self {
        let mut d = Self::intercept(data.n());
        for &p in predictors {
            d.push_variable(data, p);
        }
        d
    }

    pub fn push_variable(&mut self, data: &MixedDataset, var: usize) {
        assert_eq!(data.n(), self.n);
        match data.column(var) {
            Column::Continuous(v) => self.push_column(v),
            Column::Categorical(v) => {
                let k = data.variable(var).level_count().unwrap_or(0);
                for level in 1..k as u32 {
                    self.cols.extend(v.iter().map(|&x| if x == level { 1.0 } else { 0.0 }));
                    self.ncols += 1;
                }
            }
        }
    }

    pub fn push_column(&mut self, col: &[f64]) {
        assert_eq!(col.len(), self.n);
        self.cols.extend_from_slice(col);
        self.ncols += 1;
    }

    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.cols[j * self.n..(j + 1) * self.n]
    }
}

/// Thin QR of the linearly independent columns of a design.
///
/// Columns are processed left to right with two rounds of Gram–Schmidt; a
/// column whose remaining norm is at most `1e-10` times the largest column
/// norm is dropped.
#[derive(Debug, Clone)]
pub(crate) struct Orthogonal {
    pub n: usize,
    /// Orthonormal basis, column-major, `n x rank`.
    pub q: Vec<f64>,
    /// Upper-triangular `rank x rank`, column-major, `X[:, kept] = Q R`.
    pub r: Vec<f64>,
    pub kept: Vec<usize>,
}

impl Orthogonal {
    pub fn new(x: &DesignMatrix) -> Self {
        let n = x.nrows();
        let max_norm = (0..x.ncols()).map(|j| dot(x.column(j), x.column(j)).sqrt()).fold(0.0, f64::max);
        let tol = 1e-10 * max_norm;
        let mut q: Vec<f64> = Vec::new();
        let mut rcols: Vec<Vec<f64>> = Vec::new();
        let mut kept = Vec::new();
        for j in 0..x.ncols() {
            let mut v = x.column(j).to_vec();
            let rank = kept.len();
            let mut coef = vec![0.0; rank];
            for _ in 0..2 {
                for (k, c) in coef.iter_mut().enumerate() {
                    let qk = &q[k * n..(k + 1) * n];
                    let proj = dot(qk, &v);
                    *c += proj;
                    axpy(-proj, qk, &mut v);
                }
            }
            let norm = dot(&v, &v).sqrt();
            if norm > tol && norm > 0.0 {
                v.iter_mut().for_each(|a| *a /= norm);
                q.extend_from_slice(&v);
                coef.push(norm);
                rcols.push(coef);
                kept.push(j);
            }
        }
        let rank = kept.len();
        let mut r = vec![0.0; rank * rank];
        for (c, col) in rcols.iter().enumerate() {
            r[c * rank..c * rank + col.len()].copy_from_slice(col);
        }
        Orthogonal { n, q, r, kept }
    }

    pub fn rank(&self) -> usize {
        self.kept.len()
    }

    pub fn q_col(&self, k: usize) -> &[f64] {
        &self.q[k * self.n..(k + 1) * self.n]
    }

    /// Solves `R b = c` by back substitution.
    pub fn solve_r(&self, c: &[f64]) -> Vec<f64> {
        let m = self.rank();
        let mut b = c.to_vec();
        for i in (0..m).rev() {
            let mut s = b[i];
            for j in i + 1..m {
                s -= self.r[j * m + i] * b[j];
            }
            b[i] = s / self.r[i * m + i];
        }
        b
    }

    /// Expands coefficients on the kept columns to all `ncols` columns,
    /// zero for dropped ones.
    pub fn expand(&self, kept_coef: &[f64], ncols: usize) -> Vec<f64> {
        let mut out = vec![0.0; ncols];
        for (&j, &c) in self.kept.iter().zip(kept_coef) {
            out[j] = c;
        }
        out
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
