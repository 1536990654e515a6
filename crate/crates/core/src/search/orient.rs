use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;

use super::{canonical_order, Combinations, SearchConfig, SepsetMap};
use crate::citest::ci_test;
use crate::error::Result;
use crate::graph::{EdgeMark, MarkedGraph};
use crate::model::MixedDataset;

/// Orients unshielded colliders `x -> z <- y` of an undirected skeleton.
///
/// Plain mode uses the recorded sepsets: the triple is a collider iff `z` is
/// not in `sepset(x, y)`. Pairs without a sepset (never adjacent in the
/// starting graph) are skipped.
///
/// Conservative mode re-tests `x` and `y` given every subset of `adj(x)` and
/// of `adj(y)` (up to `cfg.max_depth`). With `z` in none of the separating
/// sets the triple is a collider; in all of them it is left alone;
/// otherwise, or when no separating set is found, it is recorded as
/// ambiguous.
///
/// An edge that receives arrowheads from both sides becomes bidirected.
pub fn orient_v_structures(
    skel: &MarkedGraph,
    sepsets: &SepsetMap,
    conservative: bool,
    data: &MixedDataset,
    cfg: &SearchConfig,
) -> Result<MarkedGraph> {
    orient_v_structures_counted(skel, sepsets, conservative, data, cfg, &AtomicUsize::new(0))
}

/// [`orient_v_structures`], adding the number of tests run to `tests`.
pub fn orient_v_structures_counted(
    skel: &MarkedGraph,
    sepsets: &SepsetMap,
    conservative: bool,
    data: &MixedDataset,
    cfg: &SearchConfig,
    tests: &AtomicUsize,
) -> Result<MarkedGraph> {
    let skel = skel.skeleton();
    let (order, _) = canonical_order(&skel);
    let adj: Vec<Vec<usize>> =
        (0..skel.n()).map(|a| order.iter().copied().filter(|&b| skel.is_adjacent(a, b)).collect()).collect();

    // nonadjacent (x, y), x before y, with their common neighbors
    let mut triples: Vec<(usize, usize, Vec<usize>)> = Vec::new();
    for (i, &x) in order.iter().enumerate() {
        for &y in &order[i + 1..] {
            if skel.is_adjacent(x, y) {
                continue;
            }
            let common: Vec<usize> = adj[x].iter().copied().filter(|&z| skel.is_adjacent(z, y)).collect();
            if !common.is_empty() {
                triples.push((x, y, common));
            }
        }
    }

    let mut arrows: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut ambiguous: Vec<(usize, usize, usize)> = Vec::new();

    if conservative {
        let separating: Vec<Vec<Vec<usize>>> = triples
            .par_iter()
            .map(|(x, y, _)| separating_sets(data, *x, *y, &adj, cfg, tests))
            .collect::<Result<_>>()?;
        for ((x, y, common), sets) in triples.iter().zip(&separating) {
            for &z in common {
                let with_z = sets.iter().filter(|s| s.contains(&z)).count();
                if sets.is_empty() || (with_z > 0 && with_z < sets.len()) {
                    ambiguous.push((*x, z, *y));
                } else if with_z == 0 {
                    arrows.insert((*x, z));
                    arrows.insert((*y, z));
                }
            }
        }
    } else {
        for (x, y, common) in &triples {
            let Some(sep) = sepsets.get(*x, *y) else { continue };
            for &z in common {
                if !sep.contains(&z) {
                    arrows.insert((*x, z));
                    arrows.insert((*y, z));
                }
            }
        }
    }

    let mut g = skel.clone();
    for e in skel.edges() {
        let (a, b) = e.pair();
        let at_b = arrows.contains(&(a, b));
        let at_a = arrows.contains(&(b, a));
        match (at_a, at_b) {
            (true, true) => g.set_edge(EdgeMark::Bidirected(a, b)),
            (false, true) => g.add_directed(a, b),
            (true, false) => g.add_directed(b, a),
            (false, false) => {}
        }
    }
    for (x, z, y) in ambiguous {
        g.add_ambiguous(x, z, y);
    }
    Ok(g)
}

/// Every subset `s` of `adj(x) \ {y}` or `adj(y) \ {x}` with `x ⟂ y | s`.
fn separating_sets(
    data: &MixedDataset,
    x: usize,
    y: usize,
    adj: &[Vec<usize>],
    cfg: &SearchConfig,
    tests: &AtomicUsize,
) -> Result<Vec<Vec<usize>>> {
    let ax: Vec<usize> = adj[x].iter().copied().filter(|&v| v != y).collect();
    let ay: Vec<usize> = adj[y].iter().copied().filter(|&v| v != x).collect();
    let mut found = Vec::new();
    for (side, list) in [ax.as_slice(), ay.as_slice()].into_iter().enumerate() {
        let top = cfg.max_depth.map_or(list.len(), |m| m.min(list.len()));
        for d in 0..=top {
            for comb in Combinations::new(list.len(), d) {
                let s: Vec<usize> = comb.iter().map(|&i| list[i]).collect();
                if side == 1 && s.iter().all(|v| ax.contains(v)) {
                    continue;
                }
                tests.fetch_add(1, Ordering::Relaxed);
                if ci_test(data, x, y, &s, cfg.alpha)?.independent {
                    found.push(s);
                }
            }
        }
    }
    Ok(found)
}
