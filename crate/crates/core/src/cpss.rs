//! Complementary-pairs stability selection.
//!
//! The base algorithm is run on both halves of `B` random splits of the
//! rows. An adjacency is selected when its frequency over the `2B` runs
//! reaches the threshold τ; a selected adjacency is oriented `x --> y` only
//! when that orientation alone reaches τ.
//!
//! τ comes from the bound `E(V) ≤ q̂² / (p (2τ - 1))` on the number of
//! low-probability edges selected, where `q̂` is the mean number of
//! adjacencies per run and `p` the number of variable pairs. The smallest τ
//! with `E(V) / p ≤ q` is `τ* = (1 + q̂² / (q p²)) / 2`, raised to the
//! nearest attainable frequency `j / 2B` above one half.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{EdgeMark, MarkedGraph};
use crate::model::{name_ranks, MixedDataset, VariableMeta};
use crate::rng::SimRng;

#[derive(Debug, Clone, PartialEq)]
pub struct CpssConfig {
    pub q: f64,
    /// Number of complementary pairs `B`.
    pub pairs: usize,
    pub seed: u64,
}

impl CpssConfig {
    pub fn new(q: f64) -> Self {
        CpssConfig { q, pairs: 50, seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(Error::InvalidConfig(format!("q must lie in (0, 1), got {}", self.q)));
        }
        if self.pairs == 0 {
            return Err(Error::InvalidConfig("at least one complementary pair is needed".into()));
        }
        Ok(())
    }
}

/// `B` pairs of disjoint row sets, each of size `⌊n/2⌋`.
pub fn complementary_pairs(n: usize, pairs: usize, seed: u64) -> Vec<(Vec<usize>, Vec<usize>)> {
    let half = n / 2;
    let mut rng = SimRng::new(seed);
    (0..pairs)
        .map(|_| {
            let perm = rng.permutation(n);
            let mut a = perm[..half].to_vec();
            let mut b = perm[half..2 * half].to_vec();
            a.sort_unstable();
            b.sort_unstable();
            (a, b)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeFrequencies {
    variables: Vec<VariableMeta>,
    runs: usize,
    /// Keyed by `(min, max)`.
    adjacency: BTreeMap<(usize, usize), u32>,
    /// Keyed by `(tail, head)`.
    directed: BTreeMap<(usize, usize), u32>,
    avg_selected: f64,
}

impl EdgeFrequencies {
    /// Tallies the graphs of `runs` base-algorithm runs (`None` for a
    /// failed run, which selects nothing).
    pub fn from_graphs<'a>(
        variables: Vec<VariableMeta>,
        graphs: impl IntoIterator<Item = Option<&'a MarkedGraph>>,
    ) -> Self {
        let mut f = EdgeFrequencies {
            variables,
            runs: 0,
            adjacency: BTreeMap::new(),
            directed: BTreeMap::new(),
            avg_selected: 0.0,
        };
        let mut selected = 0usize;
        for g in graphs {
            f.runs += 1;
            let Some(g) = g else { continue };
            for e in g.edges() {
                *f.adjacency.entry(e.pair()).or_insert(0) += 1;
                if let EdgeMark::Directed { tail, head } = e {
                    *f.directed.entry((tail, head)).or_insert(0) += 1;
                }
                selected += 1;
            }
        }
        f.avg_selected = if f.runs > 0 { selected as f64 / f.runs as f64 } else { 0.0 };
        f
    }

    pub fn runs(&self) -> usize {
        self.runs
    }

    pub fn variables(&self) -> &[VariableMeta] {
        &self.variables
    }

    /// Mean number of adjacencies per run, `q̂`.
    pub fn avg_selected(&self) -> f64 {
        self.avg_selected
    }

    pub fn adjacency_count(&self, a: usize, b: usize) -> u32 {
        self.adjacency.get(&(a.min(b), a.max(b))).copied().unwrap_or(0)
    }

    pub fn directed_count(&self, tail: usize, head: usize) -> u32 {
        self.directed.get(&(tail, head)).copied().unwrap_or(0)
    }

    pub fn adjacency_freq(&self, a: usize, b: usize) -> f64 {
        self.freq(self.adjacency_count(a, b))
    }

    pub fn directed_freq(&self, tail: usize, head: usize) -> f64 {
        self.freq(self.directed_count(tail, head))
    }

    fn freq(&self, c: u32) -> f64 {
        if self.runs == 0 {
            0.0
        } else {
            c as f64 / self.runs as f64
        }
    }

    /// Pairs selected at least once, as `(min, max)`.
    pub fn observed_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency.keys().copied()
    }

    /// CSV `pair,adjacency_freq,freq_xy,freq_yx` over the pairs selected at
    /// least once. `pair` is `X|Y` with X before Y by name.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let ranks = name_ranks(&self.variables);
        let mut rows: Vec<(usize, usize)> =
            self.observed_pairs().map(|(a, b)| if ranks[a] < ranks[b] { (a, b) } else { (b, a) }).collect();
        rows.sort_by_key(|&(x, y)| (ranks[x], ranks[y]));
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["pair", "adjacency_freq", "freq_xy", "freq_yx"])?;
        for (x, y) in rows {
            wtr.write_record([
                format!("{}|{}", self.variables[x].name, self.variables[y].name),
                self.adjacency_freq(x, y).to_string(),
                self.directed_freq(x, y).to_string(),
                self.directed_freq(y, x).to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Threshold for error rate `q`: the smallest attainable frequency
/// `j / runs` that is above one half and at least `τ*`. `None` when
/// `τ* > 1`.
pub fn cpss_threshold(avg_selected: f64, n_pairs: usize, q: f64, runs: usize) -> Option<f64> {
    assert!(runs > 0 && n_pairs > 0);
    let p = n_pairs as f64;
    let tau_star = 0.5 * (1.0 + avg_selected * avg_selected / (q * p * p));
    if tau_star > 1.0 {
        return None;
    }
    (0..=runs).map(|j| j as f64 / runs as f64).find(|&t| t > 0.5 && t >= tau_star - 1e-12)
}

/// Graph of adjacencies with frequency `≥ tau`; each oriented `x --> y`
/// when that orientation's frequency alone is `≥ tau`.
pub fn cpss_select(freqs: &EdgeFrequencies, tau: Option<f64>) -> MarkedGraph {
    let mut g = MarkedGraph::empty(freqs.variables.clone());
    let Some(tau) = tau else { return g };
    let hit = |c: u32| freqs.freq(c) >= tau - 1e-12;
    for (a, b) in freqs.observed_pairs() {
        if !hit(freqs.adjacency_count(a, b)) {
            continue;
        }
        if hit(freqs.directed_count(a, b)) {
            g.add_directed(a, b);
        } else if hit(freqs.directed_count(b, a)) {
            g.add_directed(b, a);
        } else {
            g.add_undirected(a, b);
        }
    }
    g
}

#[derive(Debug, Clone)]
pub struct CpssResult {
    pub graph: MarkedGraph,
    pub frequencies: EdgeFrequencies,
    /// `None` when the bound cannot be met at any frequency.
    pub threshold: Option<f64>,
}

/// Runs `base` on the `2B` half-samples (in parallel) and selects edges at
/// error rate `cfg.q`.
pub fn cpss_run<F>(data: &MixedDataset, cfg: &CpssConfig, base: F) -> Result<CpssResult>
where
    F: Fn(&MixedDataset) -> Result<MarkedGraph> + Sync,
{
    let frequencies = cpss_frequencies(data, cfg, base)?;
    let threshold = cpss_threshold_for(&frequencies, cfg.q);
    let graph = cpss_select(&frequencies, threshold);
    Ok(CpssResult { graph, frequencies, threshold })
}

/// Selection frequencies over the `2B` half-samples.
pub fn cpss_frequencies<F>(data: &MixedDataset, cfg: &CpssConfig, base: F) -> Result<EdgeFrequencies>
where
    F: Fn(&MixedDataset) -> Result<MarkedGraph> + Sync,
{
    cfg.validate()?;
    if data.n() < 4 {
        return Err(Error::InvalidArgument("stability selection needs at least four samples".into()));
    }
    let halves: Vec<Vec<usize>> =
        complementary_pairs(data.n(), cfg.pairs, cfg.seed).into_iter().flat_map(|(a, b)| [a, b]).collect();
    let graphs: Vec<Option<MarkedGraph>> = halves
        .par_iter()
        .enumerate()
        .map(|(i, rows)| match base(&data.subsample(rows)) {
            Ok(g) => Some(g),
            Err(e) => {
                log::warn!("subsample {i} failed and selects nothing: {e}");
                None
            }
        })
        .collect();
    Ok(EdgeFrequencies::from_graphs(data.variables().to_vec(), graphs.iter().map(Option::as_ref)))
}

pub fn cpss_threshold_for(freqs: &EdgeFrequencies, q: f64) -> Option<f64> {
    let n = freqs.variables.len();
    let n_pairs = (n * n.saturating_sub(1) / 2).max(1);
    cpss_threshold(freqs.avg_selected, n_pairs, q, freqs.runs.max(1))
}
