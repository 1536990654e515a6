use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;

use super::{canonical_order, Combinations, SearchConfig, SepsetMap};
use crate::citest::ci_test;
use crate::error::Result;
use crate::graph::MarkedGraph;
use crate::model::MixedDataset;

#[derive(Debug, Clone)]
pub struct Skeleton {
    pub graph: MarkedGraph,
    pub sepsets: SepsetMap,
    pub tests: usize,
}

/// Adjacency search with removals deferred to the end of each depth.
///
/// For an edge `x - y` (x before y by name) the size-`d` subsets of
/// `adj(x) \ {y}` are tried first, then those of `adj(y) \ {x}` that are not
/// also subsets of `adj(x)`. The first independent verdict removes the edge
/// and its conditioning set becomes the sepset.
pub fn pcs_skeleton(data: &MixedDataset, cfg: &SearchConfig) -> Result<Skeleton> {
    cfg.validate(data)?;
    let mut graph = match &cfg.initial_graph {
        Some(g) => g.skeleton(),
        None => MarkedGraph::complete(data.variables().to_vec()),
    };
    let (order, ranks) = canonical_order(&graph);
    let mut sepsets = SepsetMap::new();
    let tests = AtomicUsize::new(0);

    let mut depth = 0usize;
    loop {
        if cfg.max_depth.is_some_and(|m| depth > m) {
            break;
        }
        let adj: Vec<Vec<usize>> =
            (0..graph.n()).map(|a| order.iter().copied().filter(|&b| graph.is_adjacent(a, b)).collect()).collect();
        let mut edges = Vec::new();
        for (i, &x) in order.iter().enumerate() {
            for &y in &order[i + 1..] {
                if graph.is_adjacent(x, y) {
                    edges.push((x, y));
                }
            }
        }
        if !edges.iter().any(|&(x, y)| adj[x].len() > depth || adj[y].len() > depth) {
            break;
        }

        let verdicts: Vec<Option<Vec<usize>>> = edges
            .par_iter()
            .map(|&(x, y)| find_sepset(data, x, y, &adj, depth, cfg.alpha, &tests))
            .collect::<Result<_>>()?;

        for (&(x, y), sep) in edges.iter().zip(verdicts) {
            if let Some(mut s) = sep {
                s.sort_by_key(|&v| ranks[v]);
                graph.remove_edge(x, y);
                sepsets.insert(x, y, s);
            }
        }
        depth += 1;
    }
    Ok(Skeleton { graph, sepsets, tests: tests.into_inner() })
}

fn find_sepset(
    data: &MixedDataset,
    x: usize,
    y: usize,
    adj: &[Vec<usize>],
    depth: usize,
    alpha: f64,
    tests: &AtomicUsize,
) -> Result<Option<Vec<usize>>> {
    let ax: Vec<usize> = adj[x].iter().copied().filter(|&v| v != y).collect();
    let ay: Vec<usize> = adj[y].iter().copied().filter(|&v| v != x).collect();
    for comb in Combinations::new(ax.len(), depth) {
        let s: Vec<usize> = comb.iter().map(|&i| ax[i]).collect();
        tests.fetch_add(1, Ordering::Relaxed);
        if ci_test(data, x, y, &s, alpha)?.independent {
            return Ok(Some(s));
        }
    }
    for comb in Combinations::new(ay.len(), depth) {
        let s: Vec<usize> = comb.iter().map(|&i| ay[i]).collect();
        if s.iter().all(|v| ax.contains(v)) {
            continue;
        }
        tests.fetch_add(1, Ordering::Relaxed);
        if ci_test(data, x, y, &s, alpha)?.independent {
            return Ok(Some(s));
        }
    }
    Ok(None)
}
