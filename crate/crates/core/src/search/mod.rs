//! Order-independent constraint-based search.
//!
//! PC-stable and CPC-stable, plus the hybrids that replace the complete
//! starting graph with the undirected graph learned by [`crate::mgm`].
//! Every pipeline is skeleton → unshielded-collider orientation → Meek
//! closure.
//!
//! Ties are never broken by column position. Neighbor lists, conditioning
//! subsets, test direction and the order in which orientation rules are
//! applied all follow the lexicographic order of variable names, so a column
//! permutation of the data yields the same pattern up to relabeling.

mod meek;
mod orient;
mod skeleton;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use meek::meek_rules;
pub use orient::{orient_v_structures, orient_v_structures_counted};
pub use skeleton::{pcs_skeleton, Skeleton};

use crate::error::{Error, Result};
use crate::graph::MarkedGraph;
use crate::mgm::{mgm_learn, MgmConfig};
use crate::model::{name_ranks, MixedDataset};

#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub alpha: f64,
    /// Largest conditioning-set size; `None` is unlimited.
    pub max_depth: Option<usize>,
    pub conservative: bool,
    /// Starting adjacencies; the complete graph when absent.
    pub initial_graph: Option<MarkedGraph>,
}

impl SearchConfig {
    pub fn new(alpha: f64) -> Self {
        SearchConfig { alpha, max_depth: None, conservative: false, initial_graph: None }
    }

    pub fn validate(&self, data: &MixedDataset) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if let Some(g) = &self.initial_graph {
            let same = g.n() == data.n_vars()
                && g.variables().iter().zip(data.variables()).all(|(a, b)| a.name == b.name);
            if !same {
                return Err(Error::VariableMismatch);
            }
        }
        Ok(())
    }
}

/// Separating set of each removed pair, keyed by `(min, max)` index.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SepsetMap {
    sets: BTreeMap<(usize, usize), Vec<usize>>,
}

impl SepsetMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, a: usize, b: usize, set: Vec<usize>) {
        self.sets.insert((a.min(b), a.max(b)), set);
    }

    pub fn get(&self, a: usize, b: usize) -> Option<&[usize]> {
        self.sets.get(&(a.min(b), a.max(b))).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), &[usize])> {
        self.sets.iter().map(|(k, v)| (*k, v.as_slice()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Pcs,
    Cpcs,
    MgmPcs,
    MgmCpcs,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Pcs, Algorithm::Cpcs, Algorithm::MgmPcs, Algorithm::MgmCpcs];

    pub fn uses_mgm(self) -> bool {
        matches!(self, Algorithm::MgmPcs | Algorithm::MgmCpcs)
    }

    pub fn conservative(self) -> bool {
        matches!(self, Algorithm::Cpcs | Algorithm::MgmCpcs)
    }

    pub fn label(self) -> &'static str {
        match self {
            Algorithm::Pcs => "pcs",
            Algorithm::Cpcs => "cpcs",
            Algorithm::MgmPcs => "mgm-pcs",
            Algorithm::MgmCpcs => "mgm-cpcs",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown algorithm `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SearchStats {
    /// Independence tests run in the skeleton and orientation phases.
    pub tests: usize,
    pub mgm_seconds: f64,
    pub skeleton_seconds: f64,
    pub orient_seconds: f64,
    /// Whether the MGM optimizer met its stopping rule (always true for
    /// the non-hybrid algorithms).
    pub mgm_converged: bool,
}

impl SearchStats {
    pub fn total_seconds(&self) -> f64 {
        self.mgm_seconds + self.skeleton_seconds + self.orient_seconds
    }
}

#[derive(Debug, Clone)]
pub struct SearchOutput {
    pub graph: MarkedGraph,
    pub sepsets: SepsetMap,
    pub stats: SearchStats,
}

/// Runs `algo`. `mgm_cfg` is required for the hybrids and ignored otherwise;
/// `cfg.conservative` and `cfg.initial_graph` are overridden by the
/// algorithm.
pub fn run(algo: Algorithm, data: &MixedDataset, cfg: &SearchConfig, mgm_cfg: Option<&MgmConfig>) -> Result<SearchOutput> {
    let mut cfg = SearchConfig { conservative: algo.conservative(), initial_graph: None, ..cfg.clone() };
    let mut stats = SearchStats { mgm_converged: true, ..Default::default() };
    if algo.uses_mgm() {
        let mgm_cfg = mgm_cfg.ok_or_else(|| Error::InvalidConfig(format!("{algo} needs an MGM configuration")))?;
        let start = Instant::now();
        let fit = mgm_learn(data, mgm_cfg)?;
        stats.mgm_seconds = start.elapsed().as_secs_f64();
        stats.mgm_converged = fit.converged;
        cfg.initial_graph = Some(fit.graph);
    }
    cfg.validate(data)?;

    let start = Instant::now();
    let skel = pcs_skeleton(data, &cfg)?;
    stats.skeleton_seconds = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let counter = AtomicUsize::new(0);
    let oriented = orient_v_structures_counted(&skel.graph, &skel.sepsets, cfg.conservative, data, &cfg, &counter)?;
    let graph = meek_rules(&oriented);
    stats.orient_seconds = start.elapsed().as_secs_f64();
    stats.tests = skel.tests + counter.load(Ordering::Relaxed);

    Ok(SearchOutput { graph, sepsets: skel.sepsets, stats })
}

pub fn pc_stable(data: &MixedDataset, cfg: &SearchConfig) -> Result<MarkedGraph> {
    Ok(run(Algorithm::Pcs, data, cfg, None)?.graph)
}

pub fn cpc_stable(data: &MixedDataset, cfg: &SearchConfig) -> Result<MarkedGraph> {
    Ok(run(Algorithm::Cpcs, data, cfg, None)?.graph)
}

pub fn mgm_pcs(data: &MixedDataset, cfg: &SearchConfig, mgm_cfg: &MgmConfig) -> Result<MarkedGraph> {
    Ok(run(Algorithm::MgmPcs, data, cfg, Some(mgm_cfg))?.graph)
}

pub fn mgm_cpcs(data: &MixedDataset, cfg: &SearchConfig, mgm_cfg: &MgmConfig) -> Result<MarkedGraph> {
    Ok(run(Algorithm::MgmCpcs, data, cfg, Some(mgm_cfg))?.graph)
}

/// Variable indices sorted by name.
pub(crate) fn canonical_order(g: &MarkedGraph) -> (Vec<usize>, Vec<usize>) {
    let ranks = name_ranks(g.variables());
    let mut order: Vec<usize> = (0..g.n()).collect();
    order.sort_by_key(|&i| ranks[i]);
    (order, ranks)
}

/// Lexicographic `k`-subsets of `items`, as index combinations.
pub(crate) struct Combinations {
    n: usize,
    idx: Vec<usize>,
    done: bool,
}

impl Combinations {
    pub(crate) fn new(n: usize, k: usize) -> Self {
        Combinations { n, idx: (0..k).collect(), done: k > n }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.idx.clone();
        let k = self.idx.len();
        let mut i = k;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.idx[i] < self.n - k + i {
                self.idx[i] += 1;
                for j in i + 1..k {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}
