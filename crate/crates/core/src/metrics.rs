//! Scoring an estimated pattern against a true DAG.
//!
//! The truth is first reduced to its Markov equivalence class pattern.
//! Adjacency statistics compare skeletons over unordered pairs. Direction
//! statistics treat every ordered pair `(a, b)` as a binary prediction of
//! `a --> b`; undirected and bidirected estimates predict neither direction.

use std::fmt;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{EdgeMark, MarkedGraph};
use crate::model::EdgeType;
use crate::search::meek_rules;

/// Pattern of the equivalence class of `dag`: unshielded colliders kept,
/// everything else undirected, then closed under the Meek rules.
pub fn dag_to_cpdag(dag: &MarkedGraph) -> Result<MarkedGraph> {
    if !dag.is_dag() {
        return Err(Error::NotADag);
    }
    let mut g = dag.skeleton();
    let n = dag.n();
    for z in 0..n {
        let parents = dag.parents(z);
        for (i, &x) in parents.iter().enumerate() {
            for &y in &parents[i + 1..] {
                if !dag.is_adjacent(x, y) {
                    g.add_directed(x, z);
                    g.add_directed(y, z);
                }
            }
        }
    }
    Ok(meek_rules(&g))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    /// `None` when nothing was predicted.
    pub fn precision(&self) -> Option<f64> {
        let d = self.tp + self.fp;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }

    /// `None` when the truth has no positives.
    pub fn recall(&self) -> Option<f64> {
        let d = self.tp + self.fn_;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }

    /// Matthews correlation; 0 when any marginal is empty.
    pub fn mcc(&self) -> f64 {
        let (tp, fp, fn_, tn) = (self.tp as f64, self.fp as f64, self.fn_ as f64, self.tn as f64);
        let den = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
        if den == 0.0 {
            0.0
        } else {
            (tp * tn - fp * fn_) / den.sqrt()
        }
    }

    fn tally(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Scope {
    All,
    Cc,
    Cd,
    Dd,
}

impl Scope {
    pub const ALL: [Scope; 4] = [Scope::All, Scope::Cc, Scope::Cd, Scope::Dd];

    pub fn contains(self, t: EdgeType) -> bool {
        match self {
            Scope::All => true,
            Scope::Cc => t == EdgeType::Cc,
            Scope::Cd => t == EdgeType::Cd,
            Scope::Dd => t == EdgeType::Dd,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Scope::All => "all",
            Scope::Cc => "cc",
            Scope::Cd => "cd",
            Scope::Dd => "dd",
        }
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScopeReport {
    pub scope: Scope,
    pub adjacency: Confusion,
    pub direction: Confusion,
    pub shd: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub scopes: Vec<ScopeReport>,
}

/// One named statistic of a report.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub scope: Scope,
    pub metric: &'static str,
    pub value: Option<f64>,
    pub counts: Option<Confusion>,
}

impl EvalReport {
    pub fn scope(&self, s: Scope) -> &ScopeReport {
        self.scopes.iter().find(|r| r.scope == s).expect("every scope is reported")
    }

    pub fn rows(&self) -> Vec<MetricRow> {
        let mut out = Vec::new();
        for r in &self.scopes {
            for (prefix, c) in [("adj", r.adjacency), ("dir", r.direction)] {
                let stats: [(&'static str, Option<f64>); 3] = match prefix {
                    "adj" => [("adj_precision", c.precision()), ("adj_recall", c.recall()), ("adj_mcc", Some(c.mcc()))],
                    _ => [("dir_precision", c.precision()), ("dir_recall", c.recall()), ("dir_mcc", Some(c.mcc()))],
                };
                for (metric, value) in stats {
                    out.push(MetricRow { scope: r.scope, metric, value, counts: Some(c) });
                }
            }
            out.push(MetricRow { scope: r.scope, metric: "shd", value: Some(r.shd as f64), counts: None });
        }
        out
    }

    /// CSV with columns `scope,metric,value,TP,FP,FN,TN`; undefined values
    /// are written as `NA`, counts are blank for SHD.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["scope", "metric", "value", "TP", "FP", "FN", "TN"])?;
        for row in self.rows() {
            let value = row.value.map_or_else(|| "NA".to_string(), |v| v.to_string());
            let counts = match row.counts {
                Some(c) => [c.tp.to_string(), c.fp.to_string(), c.fn_.to_string(), c.tn.to_string()],
                None => Default::default(),
            };
            wtr.write_record([row.scope.label(), row.metric, &value, &counts[0], &counts[1], &counts[2], &counts[3]])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn check_same_variables(a: &MarkedGraph, b: &MarkedGraph) -> Result<()> {
    let same = a.n() == b.n() && a.variables().iter().zip(b.variables()).all(|(x, y)| x.name == y.name);
    if same {
        Ok(())
    } else {
        Err(Error::VariableMismatch)
    }
}

pub fn evaluate(est: &MarkedGraph, truth_dag: &MarkedGraph) -> Result<EvalReport> {
    check_same_variables(est, truth_dag)?;
    let truth = dag_to_cpdag(truth_dag)?;
    let n = est.n();
    let mut scopes: Vec<ScopeReport> = Scope::ALL
        .iter()
        .map(|&scope| ScopeReport { scope, adjacency: Confusion::default(), direction: Confusion::default(), shd: 0 })
        .collect();
    for a in 0..n {
        for b in a + 1..n {
            let t = truth.edge_type(a, b);
            let adj = (est.is_adjacent(a, b), truth.is_adjacent(a, b));
            let fwd = (est.is_directed(a, b), truth.is_directed(a, b));
            let bwd = (est.is_directed(b, a), truth.is_directed(b, a));
            let cost = pair_shd(est.edge(a, b), truth.edge(a, b));
            for r in scopes.iter_mut().filter(|r| r.scope.contains(t)) {
                r.adjacency.tally(adj.0, adj.1);
                r.direction.tally(fwd.0, fwd.1);
                r.direction.tally(bwd.0, bwd.1);
                r.shd += cost;
            }
        }
    }
    Ok(EvalReport { scopes })
}

/// Structural Hamming distance between two patterns. Bidirected edges
/// count as undirected.
pub fn shd(est: &MarkedGraph, truth_pattern: &MarkedGraph) -> Result<u64> {
    check_same_variables(est, truth_pattern)?;
    let n = est.n();
    let mut total = 0;
    for a in 0..n {
        for b in a + 1..n {
            total += pair_shd(est.edge(a, b), truth_pattern.edge(a, b));
        }
    }
    Ok(total)
}

/// `Some((tail, head))` for a directed edge, `None` for an undirected one.
fn orientation(e: EdgeMark) -> Option<(usize, usize)> {
    match e {
        EdgeMark::Directed { tail, head } => Some((tail, head)),
        EdgeMark::Undirected(..) | EdgeMark::Bidirected(..) => None,
    }
}

fn pair_shd(est: Option<EdgeMark>, truth: Option<EdgeMark>) -> u64 {
    match (est, truth) {
        (None, None) => 0,
        (Some(e), None) | (None, Some(e)) => {
            if orientation(e).is_some() {
                2
            } else {
                1
            }
        }
        (Some(e), Some(t)) => u64::from(orientation(e) != orientation(t)),
    }
}
