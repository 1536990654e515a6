//! Pairwise mixed graphical model learned by penalized pseudolikelihood.
//!
//! For continuous `x_s` and categorical `y_j` the model is the pairwise
//! Gaussian/categorical Markov random field. Node conditionals:
//!
//! * continuous: `x_s | rest ~ N(α_s + (Σ_t β_st x_t + Σ_j θ_sj[y_j]) / b_s, 1 / b_s)`
//! * categorical: `P(y_j = l | rest) ∝ exp(a_j[l] + Σ_s θ_sj[l] x_s + Σ_r φ_rj[y_r, l])`
//!
//! The smooth loss is the negative log-pseudolikelihood averaged over
//! samples. Each edge is one penalty group: `|β_st|` for cc pairs, `‖θ_sj‖₂`
//! for cd pairs and `‖φ_rj‖_F` for dd pairs, weighted by `λ_cc`, `λ_cd`,
//! `λ_dd`. Intercepts and precisions are unpenalized. Continuous columns are
//! standardized to mean 0 and variance 1 before fitting, so all parameters
//! live on that scale.
//!
//! Optimization is proximal gradient with halving backtracking. It stops
//! once the relative objective change drops below `tol_obj` and the set of
//! nonzero edge groups has not changed for `edge_stable_iters` consecutive
//! iterations, or after `max_iter` iterations.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::MarkedGraph;
use crate::model::{name_ranks, EdgeType, MixedDataset};

#[derive(Debug, Clone, PartialEq)]
pub struct MgmConfig {
    /// `[λ_cc, λ_cd, λ_dd]`.
    pub lambda: [f64; 3],
    pub max_iter: usize,
    pub tol_obj: f64,
    pub edge_stable_iters: usize,
    /// Momentum (FISTA with restart on objective increase).
    pub accelerated: bool,
}

impl MgmConfig {
    pub fn new(lambda: f64) -> Self {
        Self::with_lambdas(lambda, lambda, lambda)
    }

    pub fn with_lambdas(cc: f64, cd: f64, dd: f64) -> Self {
        MgmConfig { lambda: [cc, cd, dd], max_iter: 500, tol_obj: 1e-5, edge_stable_iters: 3, accelerated: false }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidConfig("every lambda must be positive and finite".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be positive".into()));
        }
        Ok(())
    }

    fn lambda_for(&self, t: EdgeType) -> f64 {
        match t {
            EdgeType::Cc => self.lambda[0],
            EdgeType::Cd => self.lambda[1],
            EdgeType::Dd => self.lambda[2],
        }
    }
}

/// Parameter blocks. Continuous variables are indexed in the order of
/// `continuous`, categorical ones in the order of `discrete`; categorical
/// levels are laid out contiguously, variable `j` starting at `offsets[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MgmParams {
    pub continuous: Vec<usize>,
    pub discrete: Vec<usize>,
    pub offsets: Vec<usize>,
    pub levels: Vec<usize>,
    /// `pc x pc`, symmetric, zero diagonal.
    pub beta: DMatrix<f64>,
    /// `pc x L`; row `s`, columns `offsets[j]..offsets[j] + levels[j]` form θ_sj.
    pub theta: DMatrix<f64>,
    /// `L x L`, `phi[block r, block j] = phi[block j, block r]ᵀ`, zero diagonal blocks.
    pub phi: DMatrix<f64>,
    pub alpha_cont: DVector<f64>,
    pub alpha_disc: DVector<f64>,
    /// Conditional precision `b_s` of each continuous node.
    pub precision: DVector<f64>,
}

impl MgmParams {
    pub fn pc(&self) -> usize {
        self.continuous.len()
    }

    pub fn pd(&self) -> usize {
        self.discrete.len()
    }

    pub fn total_levels(&self) -> usize {
        self.levels.iter().sum()
    }

    /// Conditional variances `1 / b_s`.
    pub fn variances(&self) -> DVector<f64> {
        self.precision.map(|b| 1.0 / b)
    }

    fn zeros_like(&self) -> MgmParams {
        let (pc, l) = (self.pc(), self.total_levels());
        MgmParams {
            continuous: self.continuous.clone(),
            discrete: self.discrete.clone(),
            offsets: self.offsets.clone(),
            levels: self.levels.clone(),
            beta: DMatrix::zeros(pc, pc),
            theta: DMatrix::zeros(pc, l),
            phi: DMatrix::zeros(l, l),
            alpha_cont: DVector::zeros(pc),
            alpha_disc: DVector::zeros(l),
            precision: DVector::zeros(pc),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MgmFit {
    pub params: MgmParams,
    pub graph: MarkedGraph,
    pub converged: bool,
    pub iterations: usize,
    pub objective: f64,
}

#[derive(Debug, Clone, Copy)]
struct Group {
    start: usize,
    len: usize,
    kind: EdgeType,
    a: usize,
    b: usize,
}

/// Standardized data and parameter layout for one dataset.
#[derive(Debug, Clone)]
pub struct MgmProblem {
    n: usize,
    n_vars: usize,
    continuous: Vec<usize>,
    discrete: Vec<usize>,
    levels: Vec<usize>,
    offsets: Vec<usize>,
    total_levels: usize,
    /// `n x pc`, standardized.
    x: DMatrix<f64>,
    /// `n x L` one-hot.
    d: DMatrix<f64>,
    /// `n x pd` observed level (absolute column in `d`).
    ycol: Vec<usize>,
    groups: Vec<Group>,
    n_params: usize,
    beta_start: usize,
}

impl MgmProblem {
    pub fn new(data: &MixedDataset) -> Result<Self> {
        let n = data.n();
        if n < 2 {
            return Err(Error::InvalidArgument("MGM needs at least two samples".into()));
        }
        let ranks = name_ranks(data.variables());
        let mut order: Vec<usize> = (0..data.n_vars()).collect();
        order.sort_by_key(|&i| ranks[i]);
        let continuous: Vec<usize> = order.iter().copied().filter(|&i| data.variable(i).is_continuous()).collect();
        let discrete: Vec<usize> = order.iter().copied().filter(|&i| !data.variable(i).is_continuous()).collect();
        let levels: Vec<usize> = discrete.iter().map(|&i| data.variable(i).level_count().unwrap()).collect();
        let mut offsets = Vec::with_capacity(levels.len());
        let mut total_levels = 0;
        for &k in &levels {
            offsets.push(total_levels);
            total_levels += k;
        }
        let (pc, pd) = (continuous.len(), discrete.len());

        let mut x = DMatrix::zeros(n, pc);
        for (s, &v) in continuous.iter().enumerate() {
            let col = data.continuous(v).unwrap();
            let mean = col.iter().sum::<f64>() / n as f64;
            let var = col.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n as f64;
            if !(var > 1e-300) || !var.is_finite() {
                return Err(Error::ZeroVariance(data.variable(v).name.clone()));
            }
            let sd = var.sqrt();
            for i in 0..n {
                x[(i, s)] = (col[i] - mean) / sd;
            }
        }
        let mut d = DMatrix::zeros(n, total_levels);
        let mut ycol = vec![0; n * pd];
        for (j, &v) in discrete.iter().enumerate() {
            let col = data.categorical(v).unwrap();
            for i in 0..n {
                let c = offsets[j] + col[i] as usize;
                d[(i, c)] = 1.0;
                ycol[i * pd + j] = c;
            }
        }

        let beta_start = 2 * pc + total_levels;
        let mut groups = Vec::new();
        let mut pos = beta_start;
        for s in 0..pc {
            for t in s + 1..pc {
                groups.push(Group { start: pos, len: 1, kind: EdgeType::Cc, a: continuous[s], b: continuous[t] });
                pos += 1;
            }
        }
        for s in 0..pc {
            for j in 0..pd {
                groups.push(Group { start: pos, len: levels[j], kind: EdgeType::Cd, a: continuous[s], b: discrete[j] });
                pos += levels[j];
            }
        }
        for r in 0..pd {
            for j in r + 1..pd {
                let len = levels[r] * levels[j];
                groups.push(Group { start: pos, len, kind: EdgeType::Dd, a: discrete[r], b: discrete[j] });
                pos += len;
            }
        }
        Ok(MgmProblem {
            n,
            n_vars: data.n_vars(),
            continuous,
            discrete,
            levels,
            offsets,
            total_levels,
            x,
            d,
            ycol,
            groups,
            n_params: pos,
            beta_start,
        })
    }

    fn pc(&self) -> usize {
        self.continuous.len()
    }

    fn pd(&self) -> usize {
        self.discrete.len()
    }

    /// All-zero interactions and intercepts, unit precisions.
    pub fn initial_params(&self) -> MgmParams {
        let mut w = vec![0.0; self.n_params];
        let pc = self.pc();
        w[pc..2 * pc].iter_mut().for_each(|b| *b = 1.0);
        self.unpack(&w)
    }

    fn unpack(&self, w: &[f64]) -> MgmParams {
        let (pc, pd, l) = (self.pc(), self.pd(), self.total_levels);
        let mut beta = DMatrix::zeros(pc, pc);
        let mut pos = self.beta_start;
        for s in 0..pc {
            for t in s + 1..pc {
                beta[(s, t)] = w[pos];
                beta[(t, s)] = w[pos];
                pos += 1;
            }
        }
        let mut theta = DMatrix::zeros(pc, l);
        for s in 0..pc {
            for j in 0..pd {
                for a in 0..self.levels[j] {
                    theta[(s, self.offsets[j] + a)] = w[pos];
                    pos += 1;
                }
            }
        }
        let mut phi = DMatrix::zeros(l, l);
        for r in 0..pd {
            for j in r + 1..pd {
                for a in 0..self.levels[r] {
                    for c in 0..self.levels[j] {
                        let (ra, jc) = (self.offsets[r] + a, self.offsets[j] + c);
                        phi[(ra, jc)] = w[pos];
                        phi[(jc, ra)] = w[pos];
                        pos += 1;
                    }
                }
            }
        }
        MgmParams {
            continuous: self.continuous.clone(),
            discrete: self.discrete.clone(),
            offsets: self.offsets.clone(),
            levels: self.levels.clone(),
            beta,
            theta,
            phi,
            alpha_cont: DVector::from_column_slice(&w[0..pc]),
            precision: DVector::from_column_slice(&w[pc..2 * pc]),
            alpha_disc: DVector::from_column_slice(&w[2 * pc..2 * pc + l]),
        }
    }

    /// Flattens parameters; beta and phi are read from the upper blocks.
    fn pack(&self, p: &MgmParams) -> Vec<f64> {
        self.check_layout(p);
        let (pc, pd, l) = (self.pc(), self.pd(), self.total_levels);
        let mut w = Vec::with_capacity(self.n_params);
        w.extend(p.alpha_cont.iter());
        w.extend(p.precision.iter());
        w.extend(p.alpha_disc.iter());
        for s in 0..pc {
            for t in s + 1..pc {
                w.push(p.beta[(s, t)]);
            }
        }
        for s in 0..pc {
            for j in 0..pd {
                for a in 0..self.levels[j] {
                    w.push(p.theta[(s, self.offsets[j] + a)]);
                }
            }
        }
        for r in 0..pd {
            for j in r + 1..pd {
                for a in 0..self.levels[r] {
                    for c in 0..self.levels[j] {
                        w.push(p.phi[(self.offsets[r] + a, self.offsets[j] + c)]);
                    }
                }
            }
        }
        debug_assert_eq!(w.len(), self.n_params);
        let _ = l;
        w
    }

    fn check_layout(&self, p: &MgmParams) {
        assert!(
            p.continuous == self.continuous && p.discrete == self.discrete && p.levels == self.levels,
            "parameters were built for a different dataset layout"
        );
    }

    /// Mean negative log-pseudolikelihood. `+∞` when a precision is not
    /// positive.
    pub fn smooth_value(&self, p: &MgmParams) -> f64 {
        self.check_layout(p);
        self.smooth(p, false).0
    }

    /// Gradient of [`smooth_value`](Self::smooth_value). Entries of `beta`
    /// and `phi` are derivatives with respect to the shared value of each
    /// symmetric pair.
    pub fn smooth_gradient(&self, p: &MgmParams) -> MgmParams {
        self.check_layout(p);
        self.smooth(p, true).1.expect("gradient requested")
    }

    pub fn penalty(&self, p: &MgmParams, cfg: &MgmConfig) -> f64 {
        self.penalty_flat(&self.pack(p), cfg)
    }

    /// Penalized objective.
    pub fn objective(&self, p: &MgmParams, cfg: &MgmConfig) -> f64 {
        self.smooth_value(p) + self.penalty(p, cfg)
    }

    fn penalty_flat(&self, w: &[f64], cfg: &MgmConfig) -> f64 {
        self.groups.iter().map(|g| cfg.lambda_for(g.kind) * group_norm(&w[g.start..g.start + g.len])).sum()
    }

    fn smooth(&self, p: &MgmParams, want_grad: bool) -> (f64, Option<MgmParams>) {
        let (n, pc, pd, l) = (self.n, self.pc(), self.pd(), self.total_levels);
        let nf = n as f64;
        if p.precision.iter().any(|&b| !(b > 0.0)) {
            return (f64::INFINITY, None);
        }
        let mut loss = 0.0;
        let mut grad = want_grad.then(|| p.zeros_like());

        if pc > 0 {
            // M = X B + D Θᵀ
            let mut m = &self.x * &p.beta;
            if l > 0 {
                m += &self.d * p.theta.transpose();
            }
            let mut res = DMatrix::zeros(n, pc);
            for s in 0..pc {
                let b = p.precision[s];
                let mut ss = 0.0;
                for i in 0..n {
                    let r = self.x[(i, s)] - p.alpha_cont[s] - m[(i, s)] / b;
                    res[(i, s)] = r;
                    ss += r * r;
                }
                loss += 0.5 * nf * (2.0 * std::f64::consts::PI).ln() - 0.5 * nf * b.ln() + 0.5 * b * ss;
                if let Some(g) = grad.as_mut() {
                    let mut sum_r = 0.0;
                    let mut sum_rm = 0.0;
                    for i in 0..n {
                        sum_r += res[(i, s)];
                        sum_rm += res[(i, s)] * m[(i, s)];
                    }
                    g.alpha_cont[s] = -b * sum_r;
                    g.precision[s] = -0.5 * nf / b + 0.5 * ss + sum_rm / b;
                }
            }
            if let Some(g) = grad.as_mut() {
                // G_M = -Res
                let xtg = -self.x.tr_mul(&res);
                for s in 0..pc {
                    for t in 0..pc {
                        if s != t {
                            g.beta[(s, t)] = xtg[(s, t)] + xtg[(t, s)];
                        }
                    }
                }
                if l > 0 {
                    g.theta -= res.tr_mul(&self.d);
                }
            }
        }

        if pd > 0 {
            let mut z = &self.d * &p.phi;
            if pc > 0 {
                z += &self.x * &p.theta;
            }
            for i in 0..n {
                for c in 0..l {
                    z[(i, c)] += p.alpha_disc[c];
                }
            }
            // z becomes G_Z = P - D in place
            for j in 0..pd {
                let (off, k) = (self.offsets[j], self.levels[j]);
                for i in 0..n {
                    let mut max = f64::NEG_INFINITY;
                    for c in off..off + k {
                        max = max.max(z[(i, c)]);
                    }
                    let mut total = 0.0;
                    for c in off..off + k {
                        total += (z[(i, c)] - max).exp();
                    }
                    let lse = max + total.ln();
                    let obs = self.ycol[i * pd + j];
                    loss += lse - z[(i, obs)];
                    if want_grad {
                        for c in off..off + k {
                            z[(i, c)] = (z[(i, c)] - lse).exp();
                        }
                        z[(i, obs)] -= 1.0;
                    }
                }
            }
            if let Some(g) = grad.as_mut() {
                for c in 0..l {
                    g.alpha_disc[c] = z.column(c).sum();
                }
                if pc > 0 {
                    g.theta += self.x.tr_mul(&z);
                }
                let dtg = self.d.tr_mul(&z);
                for r in 0..pd {
                    for j in 0..pd {
                        if r == j {
                            continue;
                        }
                        for a in 0..self.levels[r] {
                            for c in 0..self.levels[j] {
                                let (ra, jc) = (self.offsets[r] + a, self.offsets[j] + c);
                                g.phi[(ra, jc)] = dtg[(ra, jc)] + dtg[(jc, ra)];
                            }
                        }
                    }
                }
            }
        }

        if let Some(g) = grad.as_mut() {
            let inv = 1.0 / nf;
            g.beta *= inv;
            g.theta *= inv;
            g.phi *= inv;
            g.alpha_cont *= inv;
            g.alpha_disc *= inv;
            g.precision *= inv;
        }
        (loss / nf, grad)
    }

    fn smooth_flat(&self, w: &[f64], want_grad: bool) -> (f64, Option<Vec<f64>>) {
        let (v, g) = self.smooth(&self.unpack(w), want_grad);
        (v, g.map(|g| self.pack(&g)))
    }

    fn prox(&self, w: &mut [f64], step: f64, cfg: &MgmConfig) {
        for g in &self.groups {
            let thr = step * cfg.lambda_for(g.kind);
            let block = &mut w[g.start..g.start + g.len];
            let norm = group_norm(block);
            if norm <= thr {
                block.iter_mut().for_each(|v| *v = 0.0);
            } else {
                let scale = 1.0 - thr / norm;
                block.iter_mut().for_each(|v| *v *= scale);
            }
        }
    }

    fn active_groups(&self, w: &[f64]) -> Vec<bool> {
        self.groups.iter().map(|g| w[g.start..g.start + g.len].iter().any(|&v| v != 0.0)).collect()
    }

    fn graph_from(&self, data: &MixedDataset, w: &[f64]) -> MarkedGraph {
        assert_eq!(data.n_vars(), self.n_vars);
        let mut g = MarkedGraph::empty(data.variables().to_vec());
        for (grp, active) in self.groups.iter().zip(self.active_groups(w)) {
            if active {
                g.add_undirected(grp.a, grp.b);
            }
        }
        g
    }
}

fn group_norm(v: &[f64]) -> f64 {
    if v.len() == 1 {
        v[0].abs()
    } else {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Penalized objective of `params` on `data` (standardized internally, as
/// in [`mgm_learn`]).
pub fn mgm_objective(params: &MgmParams, data: &MixedDataset, cfg: &MgmConfig) -> Result<f64> {
    Ok(MgmProblem::new(data)?.objective(params, cfg))
}

pub fn mgm_learn(data: &MixedDataset, cfg: &MgmConfig) -> Result<MgmFit> {
    cfg.validate()?;
    let problem = MgmProblem::new(data)?;
    let (w, converged, iterations, objective) = optimize(&problem, cfg, &mut |_, _| {});
    Ok(MgmFit {
        params: problem.unpack(&w),
        graph: problem.graph_from(data, &w),
        converged,
        iterations,
        objective,
    })
}

/// Runs the optimizer, reporting `(iteration, objective)` after every
/// accepted step.
pub(crate) fn optimize(
    problem: &MgmProblem,
    cfg: &MgmConfig,
    observe: &mut dyn FnMut(usize, f64),
) -> (Vec<f64>, bool, usize, f64) {
    let mut x = problem.pack(&problem.initial_params());
    let (mut f, grad) = problem.smooth_flat(&x, true);
    let mut grad = grad.unwrap();
    let mut obj = f + problem.penalty_flat(&x, cfg);
    let mut step: f64 = 1.0;
    let mut edges = problem.active_groups(&x);
    let mut stable = 0usize;

    // momentum state
    let mut x_prev = x.clone();
    let mut momentum_k = 1.0f64;

    for iter in 1..=cfg.max_iter {
        // point the gradient step is taken from
        let (y, fy, gy) = if cfg.accelerated && iter > 1 {
            let next_k = 0.5 * (1.0 + (1.0 + 4.0 * momentum_k * momentum_k).sqrt());
            let coef = (momentum_k - 1.0) / next_k;
            momentum_k = next_k;
            let y: Vec<f64> = x.iter().zip(&x_prev).map(|(a, b)| a + coef * (a - b)).collect();
            let (fy, gy) = problem.smooth_flat(&y, true);
            if fy.is_finite() {
                (y, fy, gy.unwrap())
            } else {
                momentum_k = 1.0;
                (x.clone(), f, grad.clone())
            }
        } else {
            (x.clone(), f, grad.clone())
        };

        let mut accepted = None;
        while step > 1e-20 {
            let mut z: Vec<f64> = y.iter().zip(&gy).map(|(a, g)| a - step * g).collect();
            problem.prox(&mut z, step, cfg);
            let fz = problem.smooth_flat(&z, false).0;
            if fz.is_finite() {
                let mut lin = 0.0;
                let mut sq = 0.0;
                for ((zi, yi), gi) in z.iter().zip(&y).zip(&gy) {
                    let d = zi - yi;
                    lin += gi * d;
                    sq += d * d;
                }
                if fz <= fy + lin + sq / (2.0 * step) + 1e-12 * fy.abs() {
                    accepted = Some((z, fz));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((z, fz)) = accepted else {
            return (x, false, iter, obj);
        };
        let new_obj = fz + problem.penalty_flat(&z, cfg);
        if cfg.accelerated && new_obj > obj {
            // restart momentum from the last iterate
            momentum_k = 1.0;
            x_prev = x.clone();
            continue;
        }
        let rel = (obj - new_obj).abs() / obj.abs().max(1e-12);
        x_prev = std::mem::replace(&mut x, z);
        let (fx, gx) = problem.smooth_flat(&x, true);
        f = fx;
        grad = gx.unwrap();
        debug_assert!((f - fz).abs() <= 1e-9 * f.abs().max(1.0));
        obj = new_obj;
        observe(iter, obj);

        let now = problem.active_groups(&x);
        if now == edges {
            stable += 1;
        } else {
            stable = 0;
            edges = now;
        }
        if rel < cfg.tol_obj && stable >= cfg.edge_stable_iters {
            return (x, true, iter, obj);
        }
        step = (step * 2.0).min(1.0);
    }
    (x, false, cfg.max_iter, obj)
}
