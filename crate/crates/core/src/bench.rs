//! Replicated simulation benchmarks.
//!
//! Each replicate simulates a dataset from seed `seed + replicate`, runs
//! every configured cell and scores it against the generating DAG. Within a
//! replicate, MGM fits are shared across cells with the same λ and
//! skeletons across cells with the same starting graph and α, so PC and CPC
//! at one α see the same skeleton. A cell's `seconds` is the sum of the
//! component times it uses.
//!
//! A spec can be loaded from TOML:
//!
//! ```toml
//! preset = "hd"            # "ld", "hd", or give a [sim] table instead
//! replicates = 50
//! seed = 1
//! threads = 4
//! alpha_grid = [0.01, 0.05]
//! lambda_grid = [0.14, 0.4]
//! algos = ["pcs", "cpcs", "mgm-pcs", "mgm-cpcs"]
//! q_grid = [0.01, 0.05]
//!
//! [cpss]                   # optional
//! algo = "mgm-cpcs"
//! alpha = 0.05
//! lambda = 0.2
//! pairs = 50
//!
//! [[cells]]                # optional; replaces the algos x grid product
//! algo = "mgm-pcs"
//! alpha = 0.01
//! lambda = 0.14
//! ```

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::atomic::AtomicUsize;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::cpss::{cpss_frequencies, cpss_select, cpss_threshold_for, CpssConfig};
use crate::error::{Error, Result};
use crate::graph::MarkedGraph;
use crate::metrics::{evaluate, EvalReport};
use crate::mgm::{mgm_learn, MgmConfig};
use crate::search::{self, meek_rules, orient_v_structures_counted, pcs_skeleton, Algorithm, SearchConfig, Skeleton};
use crate::simulate::{simulate_replicate, Replicate, SimConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Ld,
    Hd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellSpec {
    pub algo: Algorithm,
    pub alpha: f64,
    #[serde(default)]
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CpssBench {
    #[serde(default = "default_cpss_algo")]
    pub algo: Algorithm,
    #[serde(default = "default_cpss_alpha")]
    pub alpha: f64,
    #[serde(default = "default_cpss_lambda")]
    pub lambda: f64,
    #[serde(default = "default_pairs")]
    pub pairs: usize,
}

fn default_cpss_algo() -> Algorithm {
    Algorithm::MgmCpcs
}
fn default_cpss_alpha() -> f64 {
    0.05
}
fn default_cpss_lambda() -> f64 {
    0.2
}
fn default_pairs() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSpec {
    #[serde(default = "default_preset")]
    pub preset: Preset,
    /// Replaces the preset when present; its `seed` is ignored.
    #[serde(default)]
    pub sim: Option<SimConfig>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_alpha_grid")]
    pub alpha_grid: Vec<f64>,
    #[serde(default = "default_lambda_grid")]
    pub lambda_grid: Vec<f64>,
    #[serde(default = "default_algos")]
    pub algos: Vec<Algorithm>,
    #[serde(default = "default_q_grid")]
    pub q_grid: Vec<f64>,
    #[serde(default)]
    pub cpss: Option<CpssBench>,
    /// Explicit cells; when non-empty, `algos` and the grids are not
    /// combined.
    #[serde(default)]
    pub cells: Vec<CellSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub threads: Option<usize>,
}

fn default_preset() -> Preset {
    Preset::Hd
}
fn default_replicates() -> usize {
    50
}
fn default_alpha_grid() -> Vec<f64> {
    vec![0.001, 0.01, 0.05, 0.1]
}
fn default_lambda_grid() -> Vec<f64> {
    vec![0.1, 0.14, 0.2, 0.28, 0.4, 0.57, 0.8]
}
fn default_algos() -> Vec<Algorithm> {
    Algorithm::ALL.to_vec()
}
fn default_q_grid() -> Vec<f64> {
    vec![0.001, 0.01, 0.05, 0.1]
}

impl BenchSpec {
    pub fn preset(preset: Preset) -> Self {
        BenchSpec {
            preset,
            sim: None,
            replicates: default_replicates(),
            alpha_grid: default_alpha_grid(),
            lambda_grid: default_lambda_grid(),
            algos: default_algos(),
            q_grid: default_q_grid(),
            cpss: None,
            cells: Vec::new(),
            seed: 0,
            threads: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: BenchSpec = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn sim_config(&self, replicate: usize) -> SimConfig {
        let seed = self.seed.wrapping_add(replicate as u64);
        match &self.sim {
            Some(c) => SimConfig { seed, ..c.clone() },
            None => match self.preset {
                Preset::Ld => SimConfig::low_dim(seed),
                Preset::Hd => SimConfig::high_dim(seed),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidConfig("replicates must be positive".into()));
        }
        if self.cells.is_empty() {
            if self.alpha_grid.is_empty() || self.algos.is_empty() {
                return Err(Error::InvalidConfig("alpha grid and algorithm list must be non-empty".into()));
            }
            if self.algos.iter().any(|a| a.uses_mgm()) && self.lambda_grid.is_empty() {
                return Err(Error::InvalidConfig("lambda grid must be non-empty for hybrid algorithms".into()));
            }
        }
        for c in &self.cells {
            if c.algo.uses_mgm() && c.lambda.is_none() {
                return Err(Error::InvalidConfig(format!("cell {} needs a lambda", c.algo)));
            }
        }
        if self.cpss.is_some() && self.q_grid.is_empty() {
            return Err(Error::InvalidConfig("q grid must be non-empty when stability selection is enabled".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidConfig("threads must be positive".into()));
        }
        self.sim_config(0).validate()
    }

    /// The cells run on every replicate, in output order.
    pub fn cell_list(&self) -> Vec<CellSpec> {
        if !self.cells.is_empty() {
            return self
                .cells
                .iter()
                .map(|c| CellSpec { lambda: if c.algo.uses_mgm() { c.lambda } else { None }, ..c.clone() })
                .collect();
        }
        let mut out = Vec::new();
        for &algo in &self.algos {
            for &alpha in &self.alpha_grid {
                if algo.uses_mgm() {
                    for &l in &self.lambda_grid {
                        out.push(CellSpec { algo, alpha, lambda: Some(l) });
                    }
                } else {
                    out.push(CellSpec { algo, alpha, lambda: None });
                }
            }
        }
        out
    }
}

/// One algorithm setting on one replicate.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub replicate: usize,
    pub algo: String,
    pub alpha: Option<f64>,
    pub lambda: Option<f64>,
    pub q: Option<f64>,
    pub seconds: f64,
    pub n_edges: usize,
    pub report: Option<EvalReport>,
    pub graph: Option<MarkedGraph>,
    pub error: Option<String>,
}

impl CellResult {
    fn failed(replicate: usize, algo: String, alpha: Option<f64>, lambda: Option<f64>, q: Option<f64>, e: &Error) -> Self {
        CellResult {
            replicate,
            algo,
            alpha,
            lambda,
            q,
            seconds: 0.0,
            n_edges: 0,
            report: None,
            graph: None,
            error: Some(e.to_string()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchResults {
    pub cells: Vec<CellResult>,
}

pub fn run_benchmark(spec: &BenchSpec) -> Result<BenchResults> {
    spec.validate()?;
    let work = || -> Vec<Vec<CellResult>> { (0..spec.replicates).into_par_iter().map(|r| run_replicate(spec, r)).collect() };
    let per_rep = match spec.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::InvalidConfig(e.to_string()))?
            .install(work),
        None => work(),
    };
    Ok(BenchResults { cells: per_rep.into_iter().flatten().collect() })
}

fn key(x: f64) -> u64 {
    x.to_bits()
}

fn run_replicate(spec: &BenchSpec, r: usize) -> Vec<CellResult> {
    let cells = spec.cell_list();
    let rep = match simulate_replicate(&spec.sim_config(r)) {
        Ok(rep) => rep,
        Err(e) => {
            return cells
                .iter()
                .map(|c| CellResult::failed(r, c.algo.to_string(), Some(c.alpha), c.lambda, None, &e))
                .collect()
        }
    };

    let mut mgm_cache: HashMap<u64, std::result::Result<(MarkedGraph, f64), String>> = HashMap::new();
    let mut skel_cache: HashMap<(u64, Option<u64>), std::result::Result<(Skeleton, f64), String>> = HashMap::new();
    let mut out = Vec::new();

    for c in &cells {
        let result = (|| -> Result<CellResult> {
            let mut seconds = 0.0;
            let mut initial = None;
            if let Some(l) = c.lambda {
                let entry = mgm_cache.entry(key(l)).or_insert_with(|| {
                    let start = Instant::now();
                    mgm_learn(&rep.data, &MgmConfig::new(l))
                        .map(|f| (f.graph, start.elapsed().as_secs_f64()))
                        .map_err(|e| e.to_string())
                });
                let (g, s) = entry.clone().map_err(Error::InvalidData)?;
                seconds += s;
                initial = Some(g);
            }
            let cfg = SearchConfig {
                alpha: c.alpha,
                max_depth: None,
                conservative: c.algo.conservative(),
                initial_graph: initial,
            };
            let entry = skel_cache.entry((key(c.alpha), c.lambda.map(key))).or_insert_with(|| {
                let start = Instant::now();
                pcs_skeleton(&rep.data, &cfg).map(|s| (s, start.elapsed().as_secs_f64())).map_err(|e| e.to_string())
            });
            let (skel, s) = entry.clone().map_err(Error::InvalidData)?;
            seconds += s;

            let start = Instant::now();
            let oriented = orient_v_structures_counted(
                &skel.graph,
                &skel.sepsets,
                cfg.conservative,
                &rep.data,
                &cfg,
                &AtomicUsize::new(0),
            )?;
            let graph = meek_rules(&oriented);
            seconds += start.elapsed().as_secs_f64();
            score(r, c.algo.to_string(), Some(c.alpha), c.lambda, None, seconds, graph, &rep)
        })();
        out.push(result.unwrap_or_else(|e| CellResult::failed(r, c.algo.to_string(), Some(c.alpha), c.lambda, None, &e)));
    }

    if let Some(cp) = &spec.cpss {
        let label = format!("cpss-{}", cp.algo);
        let start = Instant::now();
        let base_cfg = SearchConfig::new(cp.alpha);
        let mgm_cfg = MgmConfig::new(cp.lambda);
        let cfg = CpssConfig { q: spec.q_grid[0], pairs: cp.pairs, seed: spec.seed.wrapping_add(r as u64) };
        let freqs = cpss_frequencies(&rep.data, &cfg, |d| Ok(search::run(cp.algo, d, &base_cfg, Some(&mgm_cfg))?.graph));
        let seconds = start.elapsed().as_secs_f64();
        let lambda = cp.algo.uses_mgm().then_some(cp.lambda);
        for &q in &spec.q_grid {
            let cell = match &freqs {
                Ok(f) => {
                    let graph = cpss_select(f, cpss_threshold_for(f, q));
                    score(r, label.clone(), Some(cp.alpha), lambda, Some(q), seconds, graph, &rep)
                }
                Err(e) => Err(Error::InvalidData(e.to_string())),
            };
            out.push(cell.unwrap_or_else(|e| CellResult::failed(r, label.clone(), Some(cp.alpha), lambda, Some(q), &e)));
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn score(
    replicate: usize,
    algo: String,
    alpha: Option<f64>,
    lambda: Option<f64>,
    q: Option<f64>,
    seconds: f64,
    graph: MarkedGraph,
    rep: &Replicate,
) -> Result<CellResult> {
    let report = evaluate(&graph, &rep.model.dag)?;
    Ok(CellResult {
        replicate,
        algo,
        alpha,
        lambda,
        q,
        seconds,
        n_edges: graph.num_edges(),
        report: Some(report),
        graph: Some(graph),
        error: None,
    })
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

fn num(x: Option<f64>) -> String {
    match x {
        Some(v) if v.is_finite() => v.to_string(),
        _ => "NA".to_string(),
    }
}

impl BenchResults {
    /// Long-form rows: `replicate,algo,alpha,lambda,q,scope,metric,value,seconds,n_edges,error`.
    pub fn write_results_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record([
            "replicate", "algo", "alpha", "lambda", "q", "scope", "metric", "value", "seconds", "n_edges", "error",
        ])?;
        for c in &self.cells {
            let head = [c.replicate.to_string(), c.algo.clone(), opt(c.alpha), opt(c.lambda), opt(c.q)];
            match &c.report {
                Some(rep) => {
                    for row in rep.rows() {
                        let mut rec = head.to_vec();
                        rec.extend([
                            row.scope.to_string(),
                            row.metric.to_string(),
                            num(row.value),
                            c.seconds.to_string(),
                            c.n_edges.to_string(),
                            String::new(),
                        ]);
                        wtr.write_record(&rec)?;
                    }
                }
                None => {
                    let mut rec = head.to_vec();
                    rec.extend([
                        "all".to_string(),
                        "error".to_string(),
                        "NA".to_string(),
                        c.seconds.to_string(),
                        c.n_edges.to_string(),
                        c.error.clone().unwrap_or_default(),
                    ]);
                    wtr.write_record(&rec)?;
                }
            }
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut order: Vec<(String, String, String, String, String, &'static str)> = Vec::new();
        let mut groups: HashMap<(String, String, String, String, String, &'static str), Vec<f64>> = HashMap::new();
        for c in &self.cells {
            let Some(rep) = &c.report else { continue };
            for row in rep.rows() {
                let k = (c.algo.clone(), opt(c.alpha), opt(c.lambda), opt(c.q), row.scope.to_string(), row.metric);
                let e = groups.entry(k.clone()).or_insert_with(|| {
                    order.push(k);
                    Vec::new()
                });
                if let Some(v) = row.value {
                    e.push(v);
                }
            }
        }
        order
            .into_iter()
            .map(|k| {
                let vals = &groups[&k];
                let (mean, sd) = mean_sd(vals);
                SummaryRow {
                    algo: k.0,
                    alpha: k.1,
                    lambda: k.2,
                    q: k.3,
                    scope: k.4,
                    metric: k.5.to_string(),
                    mean,
                    se: sd.map(|s| s / (vals.len() as f64).sqrt()),
                    n: vals.len(),
                }
            })
            .collect()
    }

    pub fn write_summary_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["algo", "alpha", "lambda", "q", "scope", "metric", "mean", "se", "n"])?;
        for s in self.summary() {
            wtr.write_record([s.algo, s.alpha, s.lambda, s.q, s.scope, s.metric, num(s.mean), num(s.se), s.n.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_timing_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["algo", "alpha", "lambda", "q", "mean_seconds", "ci_low", "ci_high", "n"])?;
        for t in timing_report(&self.cells) {
            wtr.write_record([
                t.algo,
                opt(t.alpha),
                opt(t.lambda),
                opt(t.q),
                t.mean_seconds.to_string(),
                num(t.ci.map(|c| c.0)),
                num(t.ci.map(|c| c.1)),
                t.n.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Writes `results.csv`, `summary.csv` and `timing.csv` into `dir`.
    pub fn write_all(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        self.write_results_csv(fs::File::create(dir.join("results.csv"))?)?;
        self.write_summary_csv(fs::File::create(dir.join("summary.csv"))?)?;
        self.write_timing_csv(fs::File::create(dir.join("timing.csv"))?)?;
        Ok(())
    }

    /// Mean and standard error of `metric` in `scope` for one cell setting.
    pub fn mean_se(&self, algo: &str, alpha: f64, lambda: Option<f64>, scope: &str, metric: &str) -> Option<(f64, f64)> {
        self.summary()
            .into_iter()
            .find(|s| {
                s.algo == algo && s.alpha == alpha.to_string() && s.lambda == opt(lambda) && s.scope == scope && s.metric == metric
            })
            .and_then(|s| Some((s.mean?, s.se?)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub algo: String,
    pub alpha: String,
    pub lambda: String,
    pub q: String,
    pub scope: String,
    pub metric: String,
    pub mean: Option<f64>,
    /// `sd / sqrt(n)`.
    pub se: Option<f64>,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub algo: String,
    pub alpha: Option<f64>,
    pub lambda: Option<f64>,
    pub q: Option<f64>,
    pub mean_seconds: f64,
    /// 95% Student-t interval; `None` with fewer than two runs.
    pub ci: Option<(f64, f64)>,
    pub n: usize,
}

/// `(mean, sample sd)`; the sd is `None` below two values.
fn mean_sd(vals: &[f64]) -> (Option<f64>, Option<f64>) {
    if vals.is_empty() {
        return (None, None);
    }
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    if vals.len() < 2 {
        return (Some(mean), None);
    }
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (Some(mean), Some(var.sqrt()))
}

/// Mean wall time and 95% confidence interval per `(algo, alpha, lambda, q)`,
/// over the cells that succeeded.
pub fn timing_report(cells: &[CellResult]) -> Vec<TimingRow> {
    let mut order = Vec::new();
    let mut groups: HashMap<(String, String, String, String), (Option<f64>, Option<f64>, Option<f64>, Vec<f64>)> =
        HashMap::new();
    for c in cells.iter().filter(|c| c.error.is_none()) {
        let k = (c.algo.clone(), opt(c.alpha), opt(c.lambda), opt(c.q));
        groups
            .entry(k.clone())
            .or_insert_with(|| {
                order.push(k);
                (c.alpha, c.lambda, c.q, Vec::new())
            })
            .3
            .push(c.seconds);
    }
    order
        .into_iter()
        .map(|k| {
            let (alpha, lambda, q, secs) = &groups[&k];
            let (mean, sd) = mean_sd(secs);
            let mean = mean.unwrap_or(0.0);
            let ci = sd.map(|sd| {
                let df = (secs.len() - 1) as f64;
                let t = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom").inverse_cdf(0.975);
                let h = t * sd / (secs.len() as f64).sqrt();
                (mean - h, mean + h)
            });
            TimingRow { algo: k.0, alpha: *alpha, lambda: *lambda, q: *q, mean_seconds: mean, ci, n: secs.len() }
        })
        .collect()
}
