//! Graphs whose edges carry endpoint marks.
//!
//! Every unordered pair holds at most one edge. An edge is stored as the two
//! endpoint marks, so `a --> b` is a tail at `a` and an arrow at `b`, `a --- b`
//! is two tails and `a <-> b` two arrows.
//!
//! # Text format
//!
//! ```text
//! nodes: A,B,C,Z
//! A --> B
//! A --- C
//! B <-> C
//! amb: A,Z,B
//! ```
//!
//! The `nodes:` header comes first. Blank lines are ignored.

use std::collections::BTreeSet;
use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{edge_type, EdgeType, VariableMeta};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Endpoint {
    Tail,
    Arrow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeMark {
    Directed { tail: usize, head: usize },
    Undirected(usize, usize),
    Bidirected(usize, usize),
}

impl EdgeMark {
    pub fn endpoints(&self) -> (usize, usize) {
        match *self {
            EdgeMark::Directed { tail, head } => (tail, head),
            EdgeMark::Undirected(a, b) | EdgeMark::Bidirected(a, b) => (a, b),
        }
    }

    /// Endpoint pair as `(min, max)`.
    pub fn pair(&self) -> (usize, usize) {
        let (a, b) = self.endpoints();
        (a.min(b), a.max(b))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkedGraph {
    variables: Vec<VariableMeta>,
    // marks[a * n + b]: mark at `b` on the edge between `a` and `b`.
    marks: Vec<Option<Endpoint>>,
    // (x, z, y) with x < y.
    ambiguous: BTreeSet<(usize, usize, usize)>,
}

impl MarkedGraph {
    pub fn empty(variables: Vec<VariableMeta>) -> Self {
        let n = variables.len();
        MarkedGraph { variables, marks: vec![None; n * n], ambiguous: BTreeSet::new() }
    }

    pub fn complete(variables: Vec<VariableMeta>) -> Self {
        let mut g = Self::empty(variables);
        let n = g.n();
        for a in 0..n {
            for b in a + 1..n {
                g.add_undirected(a, b);
            }
        }
        g
    }

    pub fn n(&self) -> usize {
        self.variables.len()
    }

    pub fn variables(&self) -> &[VariableMeta] {
        &self.variables
    }

    pub fn edge_type(&self, a: usize, b: usize) -> EdgeType {
        edge_type(&self.variables[a], &self.variables[b])
    }

    /// Mark at `b` on the edge `a`–`b`.
    #[inline]
    pub fn mark_at(&self, a: usize, b: usize) -> Option<Endpoint> {
        self.marks[a * self.n() + b]
    }

    #[inline]
    pub fn is_adjacent(&self, a: usize, b: usize) -> bool {
        self.mark_at(a, b).is_some()
    }

    /// True iff the edge is `a --> b`.
    #[inline]
    pub fn is_directed(&self, a: usize, b: usize) -> bool {
        self.mark_at(a, b) == Some(Endpoint::Arrow) && self.mark_at(b, a) == Some(Endpoint::Tail)
    }

    #[inline]
    pub fn is_undirected(&self, a: usize, b: usize) -> bool {
        self.mark_at(a, b) == Some(Endpoint::Tail) && self.mark_at(b, a) == Some(Endpoint::Tail)
    }

    #[inline]
    pub fn is_bidirected(&self, a: usize, b: usize) -> bool {
        self.mark_at(a, b) == Some(Endpoint::Arrow) && self.mark_at(b, a) == Some(Endpoint::Arrow)
    }

    fn set_marks(&mut self, a: usize, b: usize, at_b: Option<Endpoint>, at_a: Option<Endpoint>) {
        assert_ne!(a, b, "self loops are not allowed");
        let n = self.n();
        self.marks[a * n + b] = at_b;
        self.marks[b * n + a] = at_a;
    }

    pub fn add_undirected(&mut self, a: usize, b: usize) {
        self.set_marks(a, b, Some(Endpoint::Tail), Some(Endpoint::Tail));
    }

    pub fn add_directed(&mut self, tail: usize, head: usize) {
        self.set_marks(tail, head, Some(Endpoint::Arrow), Some(Endpoint::Tail));
    }

    pub fn add_bidirected(&mut self, a: usize, b: usize) {
        self.set_marks(a, b, Some(Endpoint::Arrow), Some(Endpoint::Arrow));
    }

    pub fn set_edge(&mut self, e: EdgeMark) {
        match e {
            EdgeMark::Directed { tail, head } => self.add_directed(tail, head),
            EdgeMark::Undirected(a, b) => self.add_undirected(a, b),
            EdgeMark::Bidirected(a, b) => self.add_bidirected(a, b),
        }
    }

    /// Removes the edge and any ambiguous triple that used it.
    pub fn remove_edge(&mut self, a: usize, b: usize) {
        self.set_marks(a, b, None, None);
        self.ambiguous.retain(|&(x, z, y)| {
            let uses = |p: usize, q: usize| (p == a && q == b) || (p == b && q == a);
            !(uses(x, z) || uses(z, y))
        });
    }

    pub fn edge(&self, a: usize, b: usize) -> Option<EdgeMark> {
        match (self.mark_at(b, a), self.mark_at(a, b)) {
            (None, _) | (_, None) => None,
            (Some(Endpoint::Tail), Some(Endpoint::Tail)) => Some(EdgeMark::Undirected(a, b)),
            (Some(Endpoint::Arrow), Some(Endpoint::Arrow)) => Some(EdgeMark::Bidirected(a, b)),
            (Some(Endpoint::Tail), Some(Endpoint::Arrow)) => Some(EdgeMark::Directed { tail: a, head: b }),
            (Some(Endpoint::Arrow), Some(Endpoint::Tail)) => Some(EdgeMark::Directed { tail: b, head: a }),
        }
    }

    /// All edges, visited by increasing `(min, max)` endpoint pair.
    pub fn edges(&self) -> impl Iterator<Item = EdgeMark> + '_ {
        let n = self.n();
        (0..n).flat_map(move |a| (a + 1..n).filter_map(move |b| self.edge(a, b)))
    }

    pub fn num_edges(&self) -> usize {
        self.edges().count()
    }

    pub fn neighbors(&self, a: usize) -> Vec<usize> {
        (0..self.n()).filter(|&b| self.is_adjacent(a, b)).collect()
    }

    pub fn degree(&self, a: usize) -> usize {
        (0..self.n()).filter(|&b| self.is_adjacent(a, b)).count()
    }

    /// Nodes `p` with `p --> a`.
    pub fn parents(&self, a: usize) -> Vec<usize> {
        (0..self.n()).filter(|&p| self.is_directed(p, a)).collect()
    }

    /// Records `(x, z, y)` as an ambiguous triple. Both `x`–`z` and `z`–`y`
    /// must be adjacent.
    pub fn add_ambiguous(&mut self, x: usize, z: usize, y: usize) {
        assert!(
            self.is_adjacent(x, z) && self.is_adjacent(z, y),
            "ambiguous triple over non-adjacent pairs"
        );
        self.ambiguous.insert((x.min(y), z, x.max(y)));
    }

    pub fn is_ambiguous(&self, x: usize, z: usize, y: usize) -> bool {
        self.ambiguous.contains(&(x.min(y), z, x.max(y)))
    }

    pub fn ambiguous_triples(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.ambiguous.iter().copied()
    }

    pub fn clear_ambiguous(&mut self) {
        self.ambiguous.clear();
    }

    /// Same adjacencies, every edge undirected, no ambiguous triples.
    pub fn skeleton(&self) -> MarkedGraph {
        let mut g = MarkedGraph::empty(self.variables.clone());
        for e in self.edges() {
            let (a, b) = e.pair();
            g.add_undirected(a, b);
        }
        g
    }

    /// Directed edges only, acyclic.
    pub fn is_dag(&self) -> bool {
        if self.edges().any(|e| !matches!(e, EdgeMark::Directed { .. })) {
            return false;
        }
        self.topological_order().is_some()
    }

    /// Kahn ordering over directed edges, smallest index first among ready
    /// nodes. `None` if the directed part has a cycle.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.n();
        let mut indeg = vec![0usize; n];
        for b in 0..n {
            indeg[b] = (0..n).filter(|&a| self.is_directed(a, b)).count();
        }
        let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(&a) = ready.iter().next() {
            ready.remove(&a);
            order.push(a);
            for b in 0..n {
                if self.is_directed(a, b) {
                    indeg[b] -= 1;
                    if indeg[b] == 0 {
                        ready.insert(b);
                    }
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    /// Whether a path `from --> ... --> to` of directed edges exists.
    pub fn has_directed_path(&self, from: usize, to: usize) -> bool {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut stack = vec![from];
        seen[from] = true;
        while let Some(a) = stack.pop() {
            if a == to {
                return true;
            }
            for b in 0..n {
                if !seen[b] && self.is_directed(a, b) {
                    seen[b] = true;
                    stack.push(b);
                }
            }
        }
        false
    }

    /// Same graph with every edge mark kept, variables relabelled: node `i`
    /// of the result is node `order[i]` of `self`.
    pub fn permute(&self, order: &[usize]) -> MarkedGraph {
        assert_eq!(order.len(), self.n());
        let mut inv = vec![0; order.len()];
        for (new, &old) in order.iter().enumerate() {
            inv[old] = new;
        }
        let mut g = MarkedGraph::empty(order.iter().map(|&i| self.variables[i].clone()).collect());
        for e in self.edges() {
            g.set_edge(match e {
                EdgeMark::Directed { tail, head } => EdgeMark::Directed { tail: inv[tail], head: inv[head] },
                EdgeMark::Undirected(a, b) => EdgeMark::Undirected(inv[a], inv[b]),
                EdgeMark::Bidirected(a, b) => EdgeMark::Bidirected(inv[a], inv[b]),
            });
        }
        for (x, z, y) in self.ambiguous_triples() {
            g.add_ambiguous(inv[x], inv[z], inv[y]);
        }
        g
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let names: Vec<&str> = self.variables.iter().map(|v| v.name.as_str()).collect();
        let _ = writeln!(out, "nodes: {}", names.join(","));
        for e in self.edges() {
            let _ = match e {
                EdgeMark::Directed { tail, head } => writeln!(out, "{} --> {}", names[tail], names[head]),
                EdgeMark::Undirected(a, b) => writeln!(out, "{} --- {}", names[a], names[b]),
                EdgeMark::Bidirected(a, b) => writeln!(out, "{} <-> {}", names[a], names[b]),
            };
        }
        for (x, z, y) in self.ambiguous_triples() {
            let _ = writeln!(out, "amb: {},{},{}", names[x], names[z], names[y]);
        }
        out
    }

    /// Parses the text format. With `meta`, the `nodes:` list must name the
    /// same variables in the same order and the kinds are taken from `meta`;
    /// without it every node is read as continuous.
    pub fn from_text(text: &str, meta: Option<&[VariableMeta]>) -> Result<MarkedGraph> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
        let (hline, header) = lines.next().ok_or(Error::GraphParse { line: 1, msg: "empty graph file".into() })?;
        let names: Vec<String> = header
            .strip_prefix("nodes:")
            .ok_or(Error::GraphParse { line: hline, msg: "expected `nodes:` header".into() })?
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        let variables = match meta {
            Some(m) => {
                if m.len() != names.len() || m.iter().zip(&names).any(|(v, n)| &v.name != n) {
                    return Err(Error::GraphParse { line: hline, msg: "node list does not match metadata".into() });
                }
                m.to_vec()
            }
            None => names.iter().map(VariableMeta::continuous).collect(),
        };
        let index: HashMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        if index.len() != names.len() {
            return Err(Error::GraphParse { line: hline, msg: "duplicate node name".into() });
        }
        let lookup = |name: &str, line: usize| {
            index
                .get(name.trim())
                .copied()
                .ok_or_else(|| Error::GraphParse { line, msg: format!("unknown node `{}`", name.trim()) })
        };
        let mut g = MarkedGraph::empty(variables);
        let mut ambiguous = Vec::new();
        for (line, l) in lines {
            if let Some(rest) = l.strip_prefix("amb:") {
                let parts: Vec<&str> = rest.split(',').collect();
                if parts.len() != 3 {
                    return Err(Error::GraphParse { line, msg: "ambiguous triple needs three nodes".into() });
                }
                ambiguous.push((line, lookup(parts[0], line)?, lookup(parts[1], line)?, lookup(parts[2], line)?));
                continue;
            }
            let (sep, a, b) = [" --> ", " --- ", " <-> "]
                .iter()
                .find_map(|sep| l.split_once(sep).map(|(a, b)| (*sep, a, b)))
                .ok_or_else(|| Error::GraphParse { line, msg: format!("cannot parse `{l}`") })?;
            let (a, b) = (lookup(a, line)?, lookup(b, line)?);
            if a == b {
                return Err(Error::GraphParse { line, msg: "self loop".into() });
            }
            if g.is_adjacent(a, b) {
                return Err(Error::GraphParse { line, msg: "second edge over the same pair".into() });
            }
            match sep {
                " --> " => g.add_directed(a, b),
                " --- " => g.add_undirected(a, b),
                _ => g.add_bidirected(a, b),
            }
        }
        for (line, x, z, y) in ambiguous {
            if !(g.is_adjacent(x, z) && g.is_adjacent(z, y)) {
                return Err(Error::GraphParse { line, msg: "ambiguous triple over non-adjacent pairs".into() });
            }
            g.add_ambiguous(x, z, y);
        }
        Ok(g)
    }
}
