mod common;

use common::*;
use mixcausal::cpss::{cpss_run, cpss_select, cpss_threshold, cpss_threshold_for, CpssConfig, EdgeFrequencies};
use mixcausal::metrics::{evaluate, shd, Scope};
use mixcausal::mgm::{mgm_learn, MgmConfig};
use mixcausal::model::edge_type;
use mixcausal::regress::{chi_squared_sf, fit_linear, DesignMatrix};
use mixcausal::rng::SimRng;
use mixcausal::simulate::{simulate_replicate, SimConfig};
use mixcausal::{Column, MarkedGraph, MixedDataset, VariableMeta};
use proptest::prelude::*;

// MGM

#[test]
fn mgm_edge_count_shrinks_with_lambda() {
    let rep = simulate_replicate(&SimConfig { n_vars: 20, n_samples: 300, ..SimConfig::low_dim(2) }).unwrap();
    let grid = [0.05, 0.1, 0.2, 0.4, 0.8];
    let counts: Vec<usize> =
        grid.iter().map(|&l| mgm_learn(&rep.data, &MgmConfig::new(l)).unwrap().graph.num_edges()).collect();
    let violations = counts.windows(2).filter(|w| w[1] > w[0]).count();
    assert!(violations <= 1, "{counts:?}");
    assert!(counts[0] > counts[4], "{counts:?}");
}

#[test]
fn mgm_is_order_invariant() {
    let rep = simulate_replicate(&SimConfig { n_vars: 12, n_samples: 200, ..SimConfig::low_dim(4) }).unwrap();
    let order = [5, 0, 11, 3, 8, 1, 10, 2, 7, 4, 9, 6];
    let a = mgm_learn(&rep.data, &MgmConfig::new(0.15)).unwrap().graph;
    let b = mgm_learn(&rep.data.permute_columns(&order), &MgmConfig::new(0.15)).unwrap().graph;
    assert_eq!(a.permute(&order), b);
}

#[test]
fn mgm_covers_moral_graph_on_ld_data() {
    let mut recall_01 = 0.0;
    let mut recall_small = 0.0;
    let reps = 10;
    for seed in 0..reps {
        let rep = simulate_replicate(&SimConfig::low_dim(seed)).unwrap();
        let g = mgm_learn(&rep.data, &MgmConfig::new(0.1)).unwrap().graph;
        assert!(g.edges().all(|e| matches!(e, mixcausal::EdgeMark::Undirected(..))));
        assert!(g.num_edges() > rep.model.dag.num_edges());
        recall_01 += adjacency_recall(&g, &rep.model.dag.skeleton());
        if seed < 3 {
            let g = mgm_learn(&rep.data, &MgmConfig::new(1e-3)).unwrap().graph;
            recall_small += adjacency_recall(&g, &moralize(&rep.model.dag));
        }
    }
    let recall_01 = recall_01 / reps as f64;
    let recall_small = recall_small / 3.0;
    assert!(recall_01 >= 0.8, "λ=0.1 recall {recall_01}");
    assert!(recall_small >= 0.9, "λ→0 moral recall {recall_small}");
}

// CPSS

#[test]
fn random_single_edge_base_selects_nothing() {
    let vars: Vec<VariableMeta> = (0..40).map(|i| VariableMeta::continuous(format!("V{i:02}"))).collect();
    let data = MixedDataset::new(vars.clone(), (0..40).map(|_| Column::Continuous((0..60).map(|i| i as f64).collect())).collect())
        .unwrap();
    let counter = std::sync::atomic::AtomicU64::new(0);
    let res = cpss_run(&data, &CpssConfig { q: 0.01, pairs: 50, seed: 3 }, |_| {
        let mut rng = SimRng::new(counter.fetch_add(1, std::sync::atomic::Ordering::Relaxed));
        let mut g = MarkedGraph::empty(vars.clone());
        let a = rng.below(40);
        let b = (a + 1 + rng.below(39)) % 40;
        g.add_undirected(a, b);
        Ok(g)
    })
    .unwrap();
    assert_eq!(res.graph.num_edges(), 0);
    // the most frequent pair is far below the threshold
    let max = res.frequencies.observed_pairs().map(|(a, b)| res.frequencies.adjacency_freq(a, b)).fold(0.0, f64::max);
    assert!(max < res.threshold.unwrap_or(1.0));
}

fn random_frequencies(seed: u64, n: usize, runs: usize) -> EdgeFrequencies {
    let vars: Vec<VariableMeta> = (0..n).map(|i| VariableMeta::continuous(format!("V{i}"))).collect();
    let mut rng = SimRng::new(seed);
    let bias: Vec<f64> = (0..n * n).map(|_| rng.uniform().powi(3)).collect();
    let graphs: Vec<Option<MarkedGraph>> = (0..runs)
        .map(|_| {
            let mut g = MarkedGraph::empty(vars.clone());
            for a in 0..n {
                for b in a + 1..n {
                    if rng.uniform() < bias[a * n + b] {
                        match rng.below(3) {
                            0 => g.add_undirected(a, b),
                            1 => g.add_directed(a, b),
                            _ => g.add_directed(b, a),
                        }
                    }
                }
            }
            Some(g)
        })
        .collect();
    EdgeFrequencies::from_graphs(vars, graphs.iter().map(Option::as_ref))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cpss_output_shrinks_as_q_decreases(seed in 0u64..10_000, n in 4usize..12) {
        let f = random_frequencies(seed, n, 20);
        let qs = [0.5, 0.2, 0.1, 0.05, 0.01, 0.001];
        let graphs: Vec<MarkedGraph> = qs.iter().map(|&q| cpss_select(&f, cpss_threshold_for(&f, q))).collect();
        for w in graphs.windows(2) {
            for e in w[1].edges() {
                let (a, b) = e.pair();
                prop_assert!(w[0].is_adjacent(a, b));
            }
        }
    }

    #[test]
    fn cpss_threshold_in_stability_regime(avg in 0.0f64..50.0, pairs in 1usize..5000, q in 0.001f64..1.0, runs in 1usize..200) {
        if let Some(t) = cpss_threshold(avg, pairs, q, runs) {
            prop_assert!(t > 0.5 && t <= 1.0);
        }
    }

    // Metrics

    #[test]
    fn shd_is_a_metric(seed in 0u64..100_000, n in 2usize..6) {
        let mut rng = SimRng::new(seed);
        let a = random_marked_graph(n, &mut rng);
        let b = random_marked_graph(n, &mut rng);
        let c = random_marked_graph(n, &mut rng);
        prop_assert_eq!(shd(&a, &a).unwrap(), 0);
        prop_assert_eq!(shd(&a, &b).unwrap(), shd(&b, &a).unwrap());
        prop_assert!(shd(&a, &c).unwrap() <= shd(&a, &b).unwrap() + shd(&b, &c).unwrap());
    }

    #[test]
    fn directed_hits_never_exceed_adjacency_hits(seed in 0u64..100_000, n in 2usize..8) {
        let mut rng = SimRng::new(seed);
        let order = rng.permutation(n);
        let mut truth = MarkedGraph::empty(
            (0..n).map(|i| if i % 2 == 0 { VariableMeta::continuous(format!("V{i}")) } else { VariableMeta::categorical_k(format!("V{i}"), 3) }).collect(),
        );
        for i in 0..n {
            for j in i + 1..n {
                if rng.uniform() < 0.4 {
                    truth.add_directed(order[i], order[j]);
                }
            }
        }
        let mut est = MarkedGraph::empty(truth.variables().to_vec());
        for e in random_marked_graph(n, &mut rng).edges() {
            est.set_edge(e);
        }
        let r = evaluate(&est, &truth).unwrap();
        for s in Scope::ALL {
            let sc = r.scope(s);
            prop_assert!(sc.direction.tp <= sc.adjacency.tp);
        }
    }

    #[test]
    fn edge_type_is_symmetric(a in any::<bool>(), b in any::<bool>()) {
        let meta = |c: bool, name: &str| if c { VariableMeta::continuous(name) } else { VariableMeta::categorical_k(name, 3) };
        let (x, y) = (meta(a, "x"), meta(b, "y"));
        prop_assert_eq!(edge_type(&x, &y), edge_type(&y, &x));
    }

    // Regression

    #[test]
    fn chi_squared_sf_is_monotone(x in 0.0f64..200.0, dx in 0.0f64..20.0, k in 1usize..60) {
        prop_assert!(chi_squared_sf(x + dx, k) <= chi_squared_sf(x, k) + 1e-15);
    }

    #[test]
    fn adding_a_column_never_lowers_likelihood(seed in 0u64..10_000, n in 20usize..120) {
        let mut rng = SimRng::new(seed);
        let cols: Vec<Vec<f64>> = (0..3).map(|_| (0..n).map(|_| rng.normal()).collect()).collect();
        let y: Vec<f64> = (0..n).map(|i| 0.5 * cols[0][i] + rng.normal()).collect();
        let mut x = DesignMatrix::intercept(n);
        let mut last = fit_linear(&y, &x).unwrap().log_likelihood;
        for c in &cols {
            x.push_column(c);
            let ll = fit_linear(&y, &x).unwrap().log_likelihood;
            prop_assert!(ll >= last - 1e-9);
            last = ll;
        }
    }
}
