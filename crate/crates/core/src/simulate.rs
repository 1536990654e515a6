//! Random DAGs and mixed linear/log-linear structural equation data.
//!
//! Continuous children are Gaussian with a mean linear in the parents;
//! categorical children draw a level from a softmax over per-level
//! log-potentials that are linear in the parents. Edge parameters:
//!
//! * cc: a scalar weight `w`, `|w|` uniform on `[1, 1.5]` with a random sign.
//! * cd: `k` uniforms on `[0, 1]`, centred to sum to zero and scaled so the
//!   largest entry equals `|w|`; indexed by the categorical endpoint's level.
//! * dd: one cd-style base vector over the child's levels; row `r` (parent
//!   level `r`) is the base vector cyclically shifted by `r`.
//!
//! Continuous noise standard deviations are uniform on `[1, 2]`, intercepts
//! are zero and categorical roots are uniform over their levels.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::MarkedGraph;
use crate::model::{Column, MixedDataset, VariableKind, VariableMeta};
use crate::rng::SimRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_vars: usize,
    pub frac_discrete: f64,
    pub n_samples: usize,
    pub n_levels: usize,
    pub max_degree: usize,
    pub max_avg_degree: f64,
    pub seed: u64,
}

impl SimConfig {
    /// 50 variables (25 Gaussian, 25 three-level), 500 samples.
    pub fn low_dim(seed: u64) -> Self {
        SimConfig {
            n_vars: 50,
            frac_discrete: 0.5,
            n_samples: 500,
            n_levels: 3,
            max_degree: 10,
            max_avg_degree: 2.0,
            seed,
        }
    }

    /// 200 variables (100 Gaussian, 100 three-level), 100 samples.
    pub fn high_dim(seed: u64) -> Self {
        SimConfig { n_vars: 200, n_samples: 100, ..Self::low_dim(seed) }
    }

    pub fn n_discrete(&self) -> usize {
        (self.n_vars as f64 * self.frac_discrete).round() as usize
    }

    /// Number of edges the sampler adds: the largest count whose average
    /// degree stays within `max_avg_degree`.
    pub fn target_edges(&self) -> usize {
        (self.max_avg_degree * self.n_vars as f64 / 2.0 + 1e-9).floor() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_vars < 2 {
            return Err(Error::InvalidConfig("n_vars must be at least 2".into()));
        }
        if !(0.0..=1.0).contains(&self.frac_discrete) {
            return Err(Error::InvalidConfig("frac_discrete must lie in [0, 1]".into()));
        }
        if self.n_levels < 2 {
            return Err(Error::InvalidConfig("n_levels must be at least 2".into()));
        }
        if self.n_samples < 1 {
            return Err(Error::InvalidConfig("n_samples must be at least 1".into()));
        }
        if !(self.max_avg_degree >= 0.0) {
            return Err(Error::InvalidConfig("max_avg_degree must be non-negative".into()));
        }
        let target = self.target_edges();
        let pairs = self.n_vars * (self.n_vars - 1) / 2;
        if target > pairs || 2 * target > self.n_vars * self.max_degree {
            return Err(Error::InvalidConfig(format!(
                "cannot place {target} edges on {} nodes with maximum degree {}",
                self.n_vars, self.max_degree
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EdgeParam {
    Cc(f64),
    /// Indexed by the level of the categorical endpoint.
    Cd(Vec<f64>),
    /// `[parent level][child level]`.
    Dd(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeParams {
    pub weight: f64,
    pub param: EdgeParam,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemModel {
    pub dag: MarkedGraph,
    /// Keyed by `(parent, child)`.
    pub edges: BTreeMap<(usize, usize), EdgeParams>,
    /// Noise standard deviation of each continuous variable.
    pub noise_sd: Vec<Option<f64>>,
}

/// Samples an edge structure: kinds are assigned by a uniform shuffle, a
/// uniform random permutation fixes the topological order and uniformly drawn
/// pairs are added (oriented along that order) until the average degree
/// reaches `max_avg_degree`, skipping pairs that would push a node past
/// `max_degree`.
pub fn sample_dag(cfg: &SimConfig, rng: &mut SimRng) -> Result<MarkedGraph> {
    cfg.validate()?;
    let n = cfg.n_vars;
    let n_disc = cfg.n_discrete();
    let mut is_disc: Vec<bool> = (0..n).map(|i| i < n_disc).collect();
    rng.shuffle(&mut is_disc);
    let (mut nc, mut nd) = (0, 0);
    let variables = is_disc
        .iter()
        .map(|&d| {
            if d {
                nd += 1;
                VariableMeta::categorical_k(format!("D{nd}"), cfg.n_levels)
            } else {
                nc += 1;
                VariableMeta::continuous(format!("C{nc}"))
            }
        })
        .collect();

    let order = rng.permutation(n);
    let mut position = vec![0; n];
    for (p, &v) in order.iter().enumerate() {
        position[v] = p;
    }

    let mut g = MarkedGraph::empty(variables);
    let mut degree = vec![0usize; n];
    let target = cfg.target_edges();
    let max_misses = 64 * n * n;
    let mut added = 0;
    let mut misses = 0;
    while added < target {
        let (a, b) = if misses < max_misses {
            let a = rng.below(n);
            let b = rng.below(n);
            if a == b || g.is_adjacent(a, b) || degree[a] >= cfg.max_degree || degree[b] >= cfg.max_degree {
                misses += 1;
                continue;
            }
            (a, b)
        } else {
            let eligible: Vec<(usize, usize)> = (0..n)
                .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
                .filter(|&(a, b)| !g.is_adjacent(a, b) && degree[a] < cfg.max_degree && degree[b] < cfg.max_degree)
                .collect();
            if eligible.is_empty() {
                return Err(Error::InvalidConfig("degree constraints leave no room for further edges".into()));
            }
            eligible[rng.below(eligible.len())]
        };
        misses = 0;
        if position[a] < position[b] {
            g.add_directed(a, b);
        } else {
            g.add_directed(b, a);
        }
        degree[a] += 1;
        degree[b] += 1;
        added += 1;
    }
    Ok(g)
}

fn edge_weight(rng: &mut SimRng) -> f64 {
    let sign = if rng.uniform() < 0.5 { -1.0 } else { 1.0 };
    sign * rng.uniform_range(1.0, 1.5)
}

/// Zero-sum vector of length `k` whose largest entry is `top`.
fn zero_sum_vector(k: usize, top: f64, rng: &mut SimRng) -> Vec<f64> {
    loop {
        let u: Vec<f64> = (0..k).map(|_| rng.uniform()).collect();
        let mean = u.iter().sum::<f64>() / k as f64;
        let centred: Vec<f64> = u.iter().map(|x| x - mean).collect();
        let max = centred.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if max > 1e-12 {
            let mut v: Vec<f64> = centred.iter().map(|x| x * top / max).collect();
            // exact zero sum after scaling
            let drift = v.iter().sum::<f64>() / k as f64;
            v.iter_mut().for_each(|x| *x -= drift);
            return v;
        }
    }
}

/// Draws edge parameters (edges in increasing `(min, max)` pair order) and
/// then noise levels (by variable index).
pub fn sample_parameters(dag: &MarkedGraph, rng: &mut SimRng) -> Result<SemModel> {
    if !dag.is_dag() {
        return Err(Error::NotADag);
    }
    let vars = dag.variables();
    let mut edges = BTreeMap::new();
    for e in dag.edges() {
        let (parent, child) = e.endpoints();
        let w = edge_weight(rng);
        let param = match (&vars[parent].kind, &vars[child].kind) {
            (VariableKind::Continuous, VariableKind::Continuous) => EdgeParam::Cc(w),
            (VariableKind::Categorical { levels }, VariableKind::Continuous)
            | (VariableKind::Continuous, VariableKind::Categorical { levels }) => {
                EdgeParam::Cd(zero_sum_vector(levels.len(), w.abs(), rng))
            }
            (VariableKind::Categorical { levels: pl }, VariableKind::Categorical { levels: cl }) => {
                let base = zero_sum_vector(cl.len(), w.abs(), rng);
                let k = cl.len();
                EdgeParam::Dd((0..pl.len()).map(|r| (0..k).map(|l| base[(l + r) % k]).collect()).collect())
            }
        };
        edges.insert((parent, child), EdgeParams { weight: w, param });
    }
    let noise_sd = vars.iter().map(|v| v.is_continuous().then(|| rng.uniform_range(1.0, 2.0))).collect();
    Ok(SemModel { dag: dag.clone(), edges, noise_sd })
}

/// Generates `n` samples by ancestral sampling. Each variable is filled for
/// all samples before moving to the next in topological order; a continuous
/// variable consumes one normal draw per sample and a categorical one a single
/// uniform, compared against the cumulative level probabilities.
pub fn simulate_data(model: &SemModel, n: usize, rng: &mut SimRng) -> Result<MixedDataset> {
    if n < 1 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    let dag = &model.dag;
    let vars = dag.variables();
    let order = dag.topological_order().ok_or(Error::NotADag)?;
    let mut cont: Vec<Vec<f64>> = vec![Vec::new(); vars.len()];
    let mut disc: Vec<Vec<u32>> = vec![Vec::new(); vars.len()];

    for &v in &order {
        let parents = dag.parents(v);
        match &vars[v].kind {
            VariableKind::Continuous => {
                let sd = model.noise_sd[v].expect("continuous variable without noise level");
                let mut col = Vec::with_capacity(n);
                for i in 0..n {
                    let mut mean = 0.0;
                    for &p in &parents {
                        match &model.edges[&(p, v)].param {
                            EdgeParam::Cc(w) => mean += w * cont[p][i],
                            EdgeParam::Cd(vals) => mean += vals[disc[p][i] as usize],
                            EdgeParam::Dd(_) => unreachable!("dd parameter on a continuous child"),
                        }
                    }
                    col.push(mean + sd * rng.normal());
                }
                cont[v] = col;
            }
            VariableKind::Categorical { levels } => {
                let k = levels.len();
                let mut col = Vec::with_capacity(n);
                let mut logits = vec![0.0; k];
                for i in 0..n {
                    logits.iter_mut().for_each(|x| *x = 0.0);
                    for &p in &parents {
                        match &model.edges[&(p, v)].param {
                            EdgeParam::Cd(vals) => {
                                let x = cont[p][i];
                                for (l, lv) in logits.iter_mut().enumerate() {
                                    *lv += vals[l] * x;
                                }
                            }
                            EdgeParam::Dd(m) => {
                                let row = &m[disc[p][i] as usize];
                                for (l, lv) in logits.iter_mut().enumerate() {
                                    *lv += row[l];
                                }
                            }
                            EdgeParam::Cc(_) => unreachable!("cc parameter on a categorical child"),
                        }
                    }
                    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let weights: Vec<f64> = logits.iter().map(|x| (x - max).exp()).collect();
                    let total: f64 = weights.iter().sum();
                    let u = rng.uniform() * total;
                    let mut acc = 0.0;
                    let mut level = k - 1;
                    for (l, w) in weights.iter().enumerate() {
                        acc += w;
                        if u < acc {
                            level = l;
                            break;
                        }
                    }
                    col.push(level as u32);
                }
                disc[v] = col;
            }
        }
    }

    let columns = vars
        .iter()
        .enumerate()
        .map(|(i, v)| {
            if v.is_continuous() {
                Column::Continuous(std::mem::take(&mut cont[i]))
            } else {
                Column::Categorical(std::mem::take(&mut disc[i]))
            }
        })
        .collect();
    MixedDataset::new(vars.to_vec(), columns)
}

/// One benchmark replicate: DAG, parameters and data from a single seed.
#[derive(Debug, Clone)]
pub struct Replicate {
    pub model: SemModel,
    pub data: MixedDataset,
}

pub fn simulate_replicate(cfg: &SimConfig) -> Result<Replicate> {
    let mut rng = SimRng::new(cfg.seed);
    let dag = sample_dag(cfg, &mut rng)?;
    let model = sample_parameters(&dag, &mut rng)?;
    let data = simulate_data(&model, cfg.n_samples, &mut rng)?;
    Ok(Replicate { model, data })
}
