use super::canonical_order;
use crate::graph::MarkedGraph;

/// Closes a pattern under Meek rules R1–R3.
///
/// * R1: `c -> a - b`, `c` and `b` nonadjacent, `(c, a, b)` not ambiguous ⇒ `a -> b`
/// * R2: `a -> c -> b`, `a - b` ⇒ `a -> b`
/// * R3: `a - c -> b`, `a - d -> b`, `a - b`, `c` and `d` nonadjacent,
///   `(c, a, d)` not ambiguous ⇒ `a -> b`
///
/// Only undirected edges change. Undirected edges are visited in name order
/// and oriented one at a time; an orientation that would close a directed
/// cycle or create a new unshielded collider is skipped.
pub fn meek_rules(g: &MarkedGraph) -> MarkedGraph {
    let mut g = g.clone();
    let (order, _) = canonical_order(&g);
    loop {
        let mut changed = false;
        for &a in &order {
            for &b in &order {
                if a == b || !g.is_undirected(a, b) {
                    continue;
                }
                if (r1(&g, a, b) || r2(&g, a, b) || r3(&g, a, b)) && safe(&g, a, b) {
                    g.add_directed(a, b);
                    changed = true;
                }
            }
        }
        if !changed {
            return g;
        }
    }
}

fn r1(g: &MarkedGraph, a: usize, b: usize) -> bool {
    (0..g.n()).any(|c| c != b && g.is_directed(c, a) && !g.is_adjacent(c, b) && !g.is_ambiguous(c, a, b))
}

fn r2(g: &MarkedGraph, a: usize, b: usize) -> bool {
    (0..g.n()).any(|c| g.is_directed(a, c) && g.is_directed(c, b))
}

fn r3(g: &MarkedGraph, a: usize, b: usize) -> bool {
    let cands: Vec<usize> = (0..g.n()).filter(|&c| g.is_undirected(a, c) && g.is_directed(c, b)).collect();
    for (i, &c) in cands.iter().enumerate() {
        for &d in &cands[i + 1..] {
            if !g.is_adjacent(c, d) && !g.is_ambiguous(c, a, d) {
                return true;
            }
        }
    }
    false
}

fn safe(g: &MarkedGraph, a: usize, b: usize) -> bool {
    if g.has_directed_path(b, a) {
        return false;
    }
    // an arrowhead already at b from a node not adjacent to a
    !(0..g.n()).any(|c| c != a && g.is_directed(c, b) && !g.is_adjacent(c, a))
}
