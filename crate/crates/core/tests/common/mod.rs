#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap, VecDeque};

use nalgebra::DMatrix;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use mixcausal::citest::ci_test;
use mixcausal::metrics::{dag_to_cpdag, shd};
use mixcausal::mgm::{MgmParams, MgmProblem};
use mixcausal::regress::chi_squared_sf;
use mixcausal::rng::SimRng;
use mixcausal::simulate::{sample_parameters, simulate_data};
use mixcausal::{Column, EdgeMark, MarkedGraph, MixedDataset, VariableMeta};

/// Outcome of one oracle check: a one-line summary either way.
pub type Check = Result<String, String>;

pub fn cont(names: &[&str]) -> Vec<VariableMeta> {
    names.iter().map(|n| VariableMeta::continuous(*n)).collect()
}

pub fn dag(vars: Vec<VariableMeta>, edges: &[(usize, usize)]) -> MarkedGraph {
    let mut g = MarkedGraph::empty(vars);
    for &(a, b) in edges {
        g.add_directed(a, b);
    }
    g
}

/// Data from the SEM the simulator would attach to `dag`.
pub fn simulate_from(dag: &MarkedGraph, n: usize, seed: u64) -> MixedDataset {
    let mut rng = SimRng::new(seed);
    let model = sample_parameters(dag, &mut rng).unwrap();
    simulate_data(&model, n, &mut rng).unwrap()
}

/// Moral graph of a DAG: its skeleton plus an edge between every two
/// parents of a common child.
pub fn moralize(dag: &MarkedGraph) -> MarkedGraph {
    let mut g = dag.skeleton();
    for c in 0..dag.n() {
        let pa = dag.parents(c);
        for (i, &a) in pa.iter().enumerate() {
            for &b in &pa[i + 1..] {
                if !g.is_adjacent(a, b) {
                    g.add_undirected(a, b);
                }
            }
        }
    }
    g
}

/// Fraction of `truth` adjacencies present in `est`.
pub fn adjacency_recall(est: &MarkedGraph, truth: &MarkedGraph) -> f64 {
    let total = truth.num_edges();
    if total == 0 {
        return 1.0;
    }
    let hit = truth.edges().filter(|e| {
        let (a, b) = e.pair();
        est.is_adjacent(a, b)
    });
    hit.count() as f64 / total as f64
}

pub fn same_adjacencies(a: &MarkedGraph, b: &MarkedGraph) -> bool {
    a.skeleton() == b.skeleton()
}

// ---------------------------------------------------------------------------
// Brute-force DAG enumeration

/// Every DAG on `n` continuous nodes named `V0..`.
pub fn all_dags(n: usize) -> Vec<MarkedGraph> {
    let vars: Vec<VariableMeta> = (0..n).map(|i| VariableMeta::continuous(format!("V{i}"))).collect();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    let total = 3usize.pow(pairs.len() as u32);
    let mut out = Vec::new();
    for code in 0..total {
        let mut c = code;
        let mut g = MarkedGraph::empty(vars.clone());
        for &(a, b) in &pairs {
            match c % 3 {
                1 => g.add_directed(a, b),
                2 => g.add_directed(b, a),
                _ => {}
            }
            c /= 3;
        }
        if g.is_dag() {
            out.push(g);
        }
    }
    out
}

/// Skeleton and unshielded colliders: equal keys mean Markov equivalence.
fn equivalence_key(d: &MarkedGraph) -> (Vec<(usize, usize)>, Vec<(usize, usize, usize)>) {
    let mut skel: Vec<(usize, usize)> = d.edges().map(|e| e.pair()).collect();
    skel.sort();
    let mut colliders = Vec::new();
    for z in 0..d.n() {
        let pa = d.parents(z);
        for (i, &a) in pa.iter().enumerate() {
            for &b in &pa[i + 1..] {
                if !d.is_adjacent(a, b) {
                    colliders.push((a.min(b), z, a.max(b)));
                }
            }
        }
    }
    colliders.sort();
    (skel, colliders)
}

/// dag_to_cpdag against the equivalence classes of all DAGs on up to
/// `max_n` nodes: an edge is directed in the pattern exactly when every
/// member of the class orients it the same way.
pub fn cpdag_oracle(max_n: usize) -> Check {
    let mut checked = 0usize;
    for n in 1..=max_n {
        let dags = all_dags(n);
        let mut classes: BTreeMap<_, Vec<usize>> = BTreeMap::new();
        for (i, d) in dags.iter().enumerate() {
            classes.entry(equivalence_key(d)).or_default().push(i);
        }
        for members in classes.values() {
            let first = &dags[members[0]];
            let mut expected = MarkedGraph::empty(first.variables().to_vec());
            for e in first.edges() {
                let (a, b) = e.pair();
                let fwd = members.iter().filter(|&&m| dags[m].is_directed(a, b)).count();
                if fwd == members.len() {
                    expected.add_directed(a, b);
                } else if fwd == 0 {
                    expected.add_directed(b, a);
                } else {
                    expected.add_undirected(a, b);
                }
            }
            for &m in members {
                let got = dag_to_cpdag(&dags[m]).map_err(|e| e.to_string())?;
                if got != expected {
                    return Err(format!("pattern mismatch for {}", dags[m].to_text().replace('\n', "; ")));
                }
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} DAGs on up to {max_n} nodes"))
}

// ---------------------------------------------------------------------------
// Minimal-edit SHD

/// Per-pair state: 0 absent, 1 undirected (bidirected included), 2 `a -> b`,
/// 3 `b -> a`, for `a < b`.
fn pair_states(g: &MarkedGraph) -> Vec<u8> {
    let n = g.n();
    let mut s = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            s.push(if !g.is_adjacent(a, b) {
                0
            } else if g.is_directed(a, b) {
                2
            } else if g.is_directed(b, a) {
                3
            } else {
                1
            });
        }
    }
    s
}

/// Shortest sequence of single edits (add or remove an undirected edge,
/// orient, unorient or reverse one edge) turning `a` into `b`, by BFS over
/// whole graphs.
pub fn bfs_edit_distance(a: &MarkedGraph, b: &MarkedGraph) -> u64 {
    const MOVES: [(u8, u8); 8] = [(0, 1), (1, 0), (1, 2), (2, 1), (1, 3), (3, 1), (2, 3), (3, 2)];
    let start = pair_states(a);
    let goal = pair_states(b);
    let mut seen: HashMap<Vec<u8>, u64> = HashMap::new();
    seen.insert(start.clone(), 0);
    let mut queue = VecDeque::from([start]);
    while let Some(s) = queue.pop_front() {
        let d = seen[&s];
        if s == goal {
            return d;
        }
        for i in 0..s.len() {
            for &(from, to) in &MOVES {
                if s[i] == from {
                    let mut t = s.clone();
                    t[i] = to;
                    if !seen.contains_key(&t) {
                        seen.insert(t.clone(), d + 1);
                        queue.push_back(t);
                    }
                }
            }
        }
    }
    unreachable!("every state is reachable")
}

pub fn random_marked_graph(n: usize, rng: &mut SimRng) -> MarkedGraph {
    let vars: Vec<VariableMeta> = (0..n).map(|i| VariableMeta::continuous(format!("V{i}"))).collect();
    let mut g = MarkedGraph::empty(vars);
    for a in 0..n {
        for b in a + 1..n {
            match rng.below(5) {
                1 => g.add_undirected(a, b),
                2 => g.add_directed(a, b),
                3 => g.add_directed(b, a),
                4 => g.add_bidirected(a, b),
                _ => {}
            }
        }
    }
    g
}

pub fn shd_oracle(trials: usize, seed: u64) -> Check {
    let mut rng = SimRng::new(seed);
    for t in 0..trials {
        let n = 2 + rng.below(3);
        let a = random_marked_graph(n, &mut rng);
        let b = random_marked_graph(n, &mut rng);
        let got = shd(&a, &b).map_err(|e| e.to_string())?;
        let want = bfs_edit_distance(&a, &b);
        if got != want {
            return Err(format!("trial {t}: shd {got}, minimal edits {want}"));
        }
    }
    Ok(format!("{trials} random pattern pairs on 2-4 nodes"))
}

// ---------------------------------------------------------------------------
// MGM gradient

/// Smooth-part gradient against central differences on every free
/// parameter (symmetric entries moved together).
pub fn mgm_gradient_oracle(seed: u64) -> Check {
    let mut rng = SimRng::new(seed);
    let (pc, pd) = (3, 2);
    let n = 80;
    let mut vars = Vec::new();
    let mut cols = Vec::new();
    for i in 0..pc {
        vars.push(VariableMeta::continuous(format!("C{i}")));
        cols.push(Column::Continuous((0..n).map(|_| rng.normal()).collect()));
    }
    for i in 0..pd {
        let k = 2 + i;
        vars.push(VariableMeta::categorical_k(format!("D{i}"), k));
        cols.push(Column::Categorical((0..n).map(|r| ((r + rng.below(2)) % k) as u32).collect()));
    }
    let data = MixedDataset::new(vars, cols).unwrap();
    let problem = MgmProblem::new(&data).map_err(|e| e.to_string())?;
    let mut p = problem.initial_params();
    let mut r = || 0.3 * rng.normal();
    for i in 0..p.pc() {
        p.alpha_cont[i] = r();
        p.precision[i] = 1.0 + 0.5 * r().abs();
        for j in i + 1..p.pc() {
            let v = r();
            p.beta[(i, j)] = v;
            p.beta[(j, i)] = v;
        }
    }
    for l in 0..p.total_levels() {
        p.alpha_disc[l] = r();
        for s in 0..p.pc() {
            p.theta[(s, l)] = r();
        }
    }
    let blocks: Vec<(usize, usize)> = (0..p.pd()).map(|j| (p.offsets[j], p.levels[j])).collect();
    for (r_, &(or, kr)) in blocks.iter().enumerate() {
        for &(oj, kj) in &blocks[r_ + 1..] {
            for a in 0..kr {
                for b in 0..kj {
                    let v = 0.3 * rng.normal();
                    p.phi[(or + a, oj + b)] = v;
                    p.phi[(oj + b, or + a)] = v;
                }
            }
        }
    }

    let grad = problem.smooth_gradient(&p);
    let h = 1e-6;
    let mut worst = 0.0f64;
    let mut count = 0;
    let mut check = |name: String, analytic: f64, set: &dyn Fn(&mut MgmParams, f64)| -> Check {
        let mut plus = p.clone();
        let mut minus = p.clone();
        set(&mut plus, h);
        set(&mut minus, -h);
        let fd = (problem.smooth_value(&plus) - problem.smooth_value(&minus)) / (2.0 * h);
        let rel = (fd - analytic).abs() / analytic.abs().max(1e-3);
        worst = worst.max(rel);
        count += 1;
        if rel > 1e-5 {
            return Err(format!("{name}: finite difference {fd}, gradient {analytic}"));
        }
        Ok(String::new())
    };
    for i in 0..p.pc() {
        check(format!("alpha_cont[{i}]"), grad.alpha_cont[i], &|q, d| q.alpha_cont[i] += d)?;
        check(format!("precision[{i}]"), grad.precision[i], &|q, d| q.precision[i] += d)?;
        for j in i + 1..p.pc() {
            check(format!("beta[{i},{j}]"), grad.beta[(i, j)], &|q, d| {
                q.beta[(i, j)] += d;
                q.beta[(j, i)] += d;
            })?;
        }
    }
    for l in 0..p.total_levels() {
        check(format!("alpha_disc[{l}]"), grad.alpha_disc[l], &|q, d| q.alpha_disc[l] += d)?;
        for s in 0..p.pc() {
            check(format!("theta[{s},{l}]"), grad.theta[(s, l)], &|q, d| q.theta[(s, l)] += d)?;
        }
    }
    for (r_, &(or, kr)) in blocks.iter().enumerate() {
        for &(oj, kj) in &blocks[r_ + 1..] {
            for a in 0..kr {
                for b in 0..kj {
                    let (x, y) = (or + a, oj + b);
                    check(format!("phi[{x},{y}]"), grad.phi[(x, y)], &|q, d| {
                        q.phi[(x, y)] += d;
                        q.phi[(y, x)] += d;
                    })?;
                }
            }
        }
    }
    Ok(format!("{count} parameters, worst relative error {worst:.2e}"))
}

// ---------------------------------------------------------------------------
// Fisher-z

/// Two-sided Fisher-z p-value for the partial correlation of columns 0 and
/// 1 given the rest.
pub fn fisher_z_p(cols: &[Vec<f64>]) -> f64 {
    let k = cols.len();
    let n = cols[0].len();
    let means: Vec<f64> = cols.iter().map(|c| c.iter().sum::<f64>() / n as f64).collect();
    let cov = DMatrix::from_fn(k, k, |i, j| {
        (0..n).map(|r| (cols[i][r] - means[i]) * (cols[j][r] - means[j])).sum::<f64>() / (n as f64 - 1.0)
    });
    let prec = cov.try_inverse().expect("covariance is invertible");
    let r = -prec[(0, 1)] / (prec[(0, 0)] * prec[(1, 1)]).sqrt();
    let z = 0.5 * ((1.0 + r) / (1.0 - r)).ln() * ((n - (k - 2) - 3) as f64).sqrt();
    let normal = Normal::new(0.0, 1.0).unwrap();
    2.0 * (1.0 - normal.cdf(z.abs()))
}

/// LRT and Fisher-z verdicts at 0.05 on random Gaussian instances with
/// n = 500 and up to three conditioning variables, half of them with a weak
/// direct X - Y effect so that both verdicts occur.
pub fn fisher_z_agreement(trials: usize, seed: u64) -> (usize, usize) {
    let mut rng = SimRng::new(seed);
    let n = 500;
    let mut agree = 0;
    for t in 0..trials {
        let s = t % 4;
        let mut cols: Vec<Vec<f64>> = vec![vec![0.0; n]; 2 + s];
        let wx: Vec<f64> = (0..s).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
        let wy: Vec<f64> = (0..s).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
        let direct = if t % 2 == 0 { 0.0 } else { rng.uniform_range(0.0, 0.2) };
        for r in 0..n {
            for j in 0..s {
                cols[2 + j][r] = rng.normal();
            }
            let x = (0..s).map(|j| wx[j] * cols[2 + j][r]).sum::<f64>() + rng.normal();
            let y = (0..s).map(|j| wy[j] * cols[2 + j][r]).sum::<f64>() + direct * x + rng.normal();
            cols[0][r] = x;
            cols[1][r] = y;
        }
        let names: Vec<String> = (0..2 + s).map(|i| format!("V{i}")).collect();
        let data = MixedDataset::new(
            names.iter().map(VariableMeta::continuous).collect(),
            cols.iter().cloned().map(Column::Continuous).collect(),
        )
        .unwrap();
        let given: Vec<usize> = (2..2 + s).collect();
        let lrt = ci_test(&data, 0, 1, &given, 0.05).unwrap();
        let fz = fisher_z_p(&cols) > 0.05;
        if lrt.independent == fz {
            agree += 1;
        }
    }
    (agree, trials)
}

// ---------------------------------------------------------------------------
// χ² tail

/// `(statistic, dof, upper tail)` computed with 30-digit arithmetic.
pub const CHI2_REFERENCE: [(f64, usize, f64); 14] = [
    (3.841459, 1, 0.049999994653195766393),
    (13.2767, 4, 0.010000017972571746817),
    (0.5, 1, 0.47950012218695346232),
    (1e-3, 1, 0.97477287936996038828),
    (2.0, 2, 0.3678794411714423216),
    (7.5, 3, 0.057558451972636406967),
    (30.0, 10, 0.00085664121077530039211),
    (50.0, 25, 0.0021311519191031766514),
    (100.0, 60, 0.00091682886145607987385),
    (200.0, 150, 0.0039731859708216113254),
    (0.2, 5, 0.99911386121118755739),
    (12.0, 1, 0.00053200550513924969929),
    (45.0, 8, 3.6799837253080719815e-7),
    (5.0, 20, 0.99972264790537916395),
];

pub fn chi2_oracle() -> Check {
    let mut worst = 0.0f64;
    for &(x, k, want) in &CHI2_REFERENCE {
        let got = chi_squared_sf(x, k);
        worst = worst.max((got - want).abs());
        if (got - want).abs() > 1e-4 {
            return Err(format!("chi2 sf({x}, {k}) = {got}, reference {want}"));
        }
        let statrs = 1.0 - ChiSquared::new(k as f64).unwrap().cdf(x);
        if (got - statrs).abs() > 1e-4 {
            return Err(format!("chi2 sf({x}, {k}) = {got}, statrs {statrs}"));
        }
    }
    Ok(format!("{} reference points, worst error {worst:.1e}", CHI2_REFERENCE.len()))
}

// ---------------------------------------------------------------------------
// Null calibration

/// Asymptotic Kolmogorov-Smirnov p-value for uniformity.
pub fn ks_uniform_p(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let d = v
        .iter()
        .enumerate()
        .map(|(i, &x)| (x - i as f64 / n).abs().max(((i + 1) as f64 / n - x).abs()))
        .fold(0.0, f64::max);
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let term = 2.0 * (-1.0f64).powi(k - 1) * (-2.0 * (k as f64).powi(2) * lambda * lambda).exp();
        p += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Cont,
    Cat,
}

fn draw(kind: Kind, signal: f64, rng: &mut SimRng) -> f64 {
    match kind {
        Kind::Cont => signal + rng.normal(),
        Kind::Cat => {
            let logits = [0.0, signal, -signal];
            let m = logits.iter().cloned().fold(f64::MIN, f64::max);
            let w: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
            let u = rng.uniform() * w.iter().sum::<f64>();
            let mut acc = 0.0;
            for (i, wi) in w.iter().enumerate() {
                acc += wi;
                if u < acc {
                    return i as f64;
                }
            }
            2.0
        }
    }
}

/// Null instances: X and Y each depend on the conditioning variables
/// (alternately continuous and three-level) but not on each other.
pub fn null_instance(x: Kind, y: Kind, s: usize, n: usize, rng: &mut SimRng) -> MixedDataset {
    let kinds: Vec<Kind> = [x, y].into_iter().chain((0..s).map(|j| if j % 2 == 0 { Kind::Cont } else { Kind::Cat })).collect();
    let wx: Vec<f64> = (0..s).map(|_| rng.uniform_range(-0.8, 0.8)).collect();
    let wy: Vec<f64> = (0..s).map(|_| rng.uniform_range(-0.8, 0.8)).collect();
    let mut cols: Vec<Vec<f64>> = vec![vec![0.0; n]; kinds.len()];
    for r in 0..n {
        for j in 0..s {
            cols[2 + j][r] = draw(kinds[2 + j], 0.0, rng);
        }
        let feature = |j: usize, cols: &Vec<Vec<f64>>| match kinds[2 + j] {
            Kind::Cont => cols[2 + j][r],
            Kind::Cat => cols[2 + j][r] - 1.0,
        };
        let sx = (0..s).map(|j| wx[j] * feature(j, &cols)).sum();
        let sy = (0..s).map(|j| wy[j] * feature(j, &cols)).sum();
        cols[0][r] = draw(kinds[0], sx, rng);
        cols[1][r] = draw(kinds[1], sy, rng);
    }
    let vars = kinds
        .iter()
        .enumerate()
        .map(|(i, k)| match k {
            Kind::Cont => VariableMeta::continuous(format!("V{i}")),
            Kind::Cat => VariableMeta::categorical_k(format!("V{i}"), 3),
        })
        .collect();
    let columns = kinds
        .iter()
        .zip(cols)
        .map(|(k, c)| match k {
            Kind::Cont => Column::Continuous(c),
            Kind::Cat => Column::Categorical(c.into_iter().map(|v| v as u32).collect()),
        })
        .collect();
    MixedDataset::new(vars, columns).unwrap()
}

pub struct Calibration {
    pub label: &'static str,
    pub rejection_rate: f64,
    pub ks_p: f64,
}

/// Rejection rate at 0.05 and KS p-value over `trials` null tests, with
/// `|S|` cycling through 0, 1, 2.
pub fn calibrate(label: &'static str, x: Kind, y: Kind, trials: usize, seed: u64) -> Calibration {
    let mut rng = SimRng::new(seed);
    let mut ps = Vec::with_capacity(trials);
    for t in 0..trials {
        let s = t % 3;
        let data = null_instance(x, y, s, 500, &mut rng);
        let given: Vec<usize> = (2..2 + s).collect();
        ps.push(ci_test(&data, 0, 1, &given, 0.05).unwrap().p_value);
    }
    let rejection_rate = ps.iter().filter(|&&p| p < 0.05).count() as f64 / trials as f64;
    Calibration { label, rejection_rate, ks_p: ks_uniform_p(&ps) }
}

/// Structural Meek checks: no directed cycle, and every unshielded collider
/// of the output already was one in the input.
pub fn meek_sound(before: &MarkedGraph, after: &MarkedGraph) -> bool {
    let directed_only = {
        let mut g = MarkedGraph::empty(after.variables().to_vec());
        for e in after.edges() {
            if let EdgeMark::Directed { tail, head } = e {
                g.add_directed(tail, head);
            }
        }
        g
    };
    if !directed_only.is_dag() {
        return false;
    }
    let n = after.n();
    for z in 0..n {
        for a in 0..n {
            for b in a + 1..n {
                let collider = |g: &MarkedGraph| g.is_directed(a, z) && g.is_directed(b, z) && !g.is_adjacent(a, b);
                if collider(after) && !collider(before) {
                    return false;
                }
            }
        }
    }
    true
}
