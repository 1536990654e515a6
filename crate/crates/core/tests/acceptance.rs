//! Acceptance criteria, one test each. Every test prints a single
//! `criterion N: PASS|FAIL` line to stderr (uncaptured) before asserting.
//!
//! The high-dimensional replicate run behind criteria 1, 2, 4 and 10 is
//! computed once and shared. All tests hold one lock so that wall-clock
//! measurements are not disturbed by other tests.

mod common;

use std::io::Write;
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::Instant;

use common::*;
use mixcausal::bench::{run_benchmark, BenchResults, BenchSpec, CellSpec, Preset};
use mixcausal::cpss::{cpss_frequencies, cpss_select, cpss_threshold_for, CpssConfig};
use mixcausal::metrics::{evaluate, Scope};
use mixcausal::mgm::MgmConfig;
use mixcausal::rng::SimRng;
use mixcausal::search::{run, Algorithm, SearchConfig};
use mixcausal::simulate::{simulate_replicate, SimConfig};

const HD_REPLICATES: usize = 50;
const HD_SEED: u64 = 1000;

fn lock() -> MutexGuard<'static, ()> {
    static LOCK: Mutex<()> = Mutex::new(());
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(criterion: u32, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "[acceptance] criterion {criterion}: {verdict} - {detail}");
}

fn hd_spec() -> BenchSpec {
    let cell = |algo, alpha, lambda| CellSpec { algo, alpha, lambda };
    BenchSpec {
        replicates: HD_REPLICATES,
        seed: HD_SEED,
        cells: vec![
            cell(Algorithm::Pcs, 0.01, None),
            cell(Algorithm::MgmPcs, 0.01, Some(0.14)),
            cell(Algorithm::Cpcs, 0.01, None),
            cell(Algorithm::MgmCpcs, 0.1, Some(0.4)),
            cell(Algorithm::Pcs, 0.05, None),
            cell(Algorithm::MgmPcs, 0.05, Some(0.14)),
        ],
        ..BenchSpec::preset(Preset::Hd)
    }
}

fn hd_results() -> &'static BenchResults {
    static RESULTS: OnceLock<BenchResults> = OnceLock::new();
    RESULTS.get_or_init(|| {
        let start = Instant::now();
        let res = run_benchmark(&hd_spec()).expect("benchmark runs");
        let _ = writeln!(
            std::io::stderr(),
            "[acceptance] shared HD run: {HD_REPLICATES} replicates in {:.0}s",
            start.elapsed().as_secs_f64()
        );
        res
    })
}

fn stat(res: &BenchResults, algo: Algorithm, alpha: f64, lambda: Option<f64>, metric: &str) -> (f64, f64) {
    res.mean_se(algo.label(), alpha, lambda, "all", metric).unwrap_or((f64::NAN, f64::NAN))
}

#[test]
fn criterion_1_hybrids_lower_shd() {
    let _g = lock();
    let res = hd_results();
    let failures = res.cells.iter().filter(|c| c.error.is_some()).count();
    let pc = stat(res, Algorithm::Pcs, 0.01, None, "shd");
    let mgm_pcs = stat(res, Algorithm::MgmPcs, 0.01, Some(0.14), "shd");
    let cpc = stat(res, Algorithm::Cpcs, 0.01, None, "shd");
    let mgm_cpcs = stat(res, Algorithm::MgmCpcs, 0.1, Some(0.4), "shd");

    let beats = |hybrid: (f64, f64), base: (f64, f64)| base.0 - hybrid.0 > 2.0 * (hybrid.1 + base.1);
    let near = |x: f64, target: f64| (x - target).abs() <= 0.15 * target;
    let order_pc = beats(mgm_pcs, pc);
    let order_cpc = beats(mgm_cpcs, cpc);
    let magnitudes = [(pc.0, 600.95), (mgm_pcs.0, 567.75), (cpc.0, 588.10), (mgm_cpcs.0, 564.90)];
    let sizes_ok = magnitudes.iter().all(|&(x, t)| near(x, t));
    let pass = order_pc && order_cpc && sizes_ok && failures == 0;
    report(
        1,
        pass,
        &format!(
            "SHD PC {:.2} ({:.2}) vs MGM-PCS {:.2} ({:.2}) [{}]; CPC {:.2} ({:.2}) vs MGM-CPCS {:.2} ({:.2}) [{}]; \
             magnitudes within 15% of 600.95/567.75/588.10/564.90: {}; failed cells {failures}",
            pc.0,
            pc.1,
            mgm_pcs.0,
            mgm_pcs.1,
            if order_pc { "ordered" } else { "not ordered" },
            cpc.0,
            cpc.1,
            mgm_cpcs.0,
            mgm_cpcs.1,
            if order_cpc { "ordered" } else { "not ordered" },
            sizes_ok,
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_2_adjacency_precision() {
    let _g = lock();
    let res = hd_results();
    let pc = stat(res, Algorithm::Pcs, 0.05, None, "adj_precision");
    let mgm = stat(res, Algorithm::MgmPcs, 0.05, Some(0.14), "adj_precision");
    let pc_ok = (pc.0 - 0.744).abs() <= 0.05;
    let mgm_ok = (mgm.0 - 0.739).abs() <= 0.05;
    let similar = (pc.0 - mgm.0).abs() <= 2.0 * (pc.1 * pc.1 + mgm.1 * mgm.1).sqrt();
    let pass = pc_ok && mgm_ok && similar;
    report(
        2,
        pass,
        &format!(
            "adjacency precision PC {:.3} ({:.3}) target 0.744; MGM-PCS {:.3} ({:.3}) target 0.739; \
             difference within 2 se: {similar}",
            pc.0, pc.1, mgm.0, mgm.1
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_3_tiny_lambda_matches_pc() {
    let _g = lock();
    let mut same = 0;
    let total = 10;
    for seed in 0..total {
        let rep = simulate_replicate(&SimConfig::low_dim(2000 + seed)).unwrap();
        let cfg = SearchConfig::new(0.05);
        let pc = run(Algorithm::Pcs, &rep.data, &cfg, None).unwrap().graph;
        let hybrid = run(Algorithm::MgmPcs, &rep.data, &cfg, Some(&MgmConfig::new(1e-6))).unwrap().graph;
        same += (pc == hybrid) as usize;
    }
    let pass = same == total as usize;
    report(3, pass, &format!("MGM-PCS with lambda 1e-6 equals PC-stable on {same}/{total} LD datasets"));
    assert!(pass);
}

#[test]
fn criterion_4_pc_and_cpc_adjacencies() {
    let _g = lock();
    let res = hd_results();
    let spec = hd_spec();
    let mut same = 0;
    for r in 0..HD_REPLICATES {
        let pc = res
            .cells
            .iter()
            .find(|c| c.replicate == r && c.algo == "pcs" && c.alpha == Some(0.01))
            .and_then(|c| c.graph.clone())
            .expect("PC cell present");
        // an independent CPC run, not the benchmark's shared skeleton
        let rep = simulate_replicate(&spec.sim_config(r)).unwrap();
        let cpc = run(Algorithm::Cpcs, &rep.data, &SearchConfig::new(0.01), None).unwrap().graph;
        same += same_adjacencies(&pc, &cpc) as usize;
    }
    let pass = same == HD_REPLICATES;
    report(4, pass, &format!("PC-stable and CPC-stable skeletons identical on {same}/{HD_REPLICATES} HD datasets"));
    assert!(pass);
}

#[test]
fn criterion_5_order_independence() {
    let _g = lock();
    let rep = simulate_replicate(&SimConfig::high_dim(3000)).unwrap();
    let cfg = SearchConfig::new(0.01);
    let mgm = MgmConfig::new(0.14);
    let base: Vec<_> = Algorithm::ALL.iter().map(|&a| run(a, &rep.data, &cfg, Some(&mgm)).unwrap().graph).collect();
    let mut rng = SimRng::new(3001);
    let mut mismatches = Vec::new();
    let perms = 20;
    for p in 0..perms {
        let order = rng.permutation(rep.data.n_vars());
        let permuted = rep.data.permute_columns(&order);
        for (a, g) in Algorithm::ALL.iter().zip(&base) {
            let out = run(*a, &permuted, &cfg, Some(&mgm)).unwrap().graph;
            if g.permute(&order) != out {
                mismatches.push(format!("{a} on permutation {p}"));
            }
        }
    }
    let pass = mismatches.is_empty();
    report(
        5,
        pass,
        &format!("{perms} column permutations x 4 algorithms on one HD dataset; mismatches: {mismatches:?}"),
    );
    assert!(pass);
}

#[test]
fn criterion_6_null_calibration() {
    let _g = lock();
    let cells = [
        calibrate("cc", Kind::Cont, Kind::Cont, 1000, 61),
        calibrate("cd", Kind::Cont, Kind::Cat, 1000, 62),
        calibrate("dd", Kind::Cat, Kind::Cat, 1000, 63),
    ];
    let pass = cells.iter().all(|c| (c.rejection_rate - 0.05).abs() <= 0.02 && c.ks_p > 0.01);
    let detail = cells
        .iter()
        .map(|c| format!("{} rejection {:.3} KS p {:.3}", c.label, c.rejection_rate, c.ks_p))
        .collect::<Vec<_>>()
        .join("; ");
    report(6, pass, &format!("n=500, |S| in 0..=2, 1000 null tests per edge type: {detail}"));
    assert!(pass);
}

#[test]
fn criterion_7_cpss_is_strict() {
    let _g = lock();
    let reps = 3;
    let mut directed = Vec::new();
    let mut precisions = Vec::new();
    for r in 0..reps {
        let rep = simulate_replicate(&SimConfig::high_dim(4000 + r)).unwrap();
        let cfg = SearchConfig::new(0.05);
        let mgm = MgmConfig::new(0.2);
        let ccfg = CpssConfig { q: 0.05, pairs: 50, seed: 4000 + r };
        let freqs = cpss_frequencies(&rep.data, &ccfg, |d| Ok(run(Algorithm::MgmCpcs, d, &cfg, Some(&mgm))?.graph)).unwrap();
        let g = cpss_select(&freqs, cpss_threshold_for(&freqs, 0.05));
        let dir = evaluate(&g, &rep.model.dag).unwrap().scope(Scope::All).direction;
        directed.push((dir.tp + dir.fp) as f64);
        if let Some(p) = dir.precision() {
            precisions.push(p);
        }
    }
    let mean_directed = directed.iter().sum::<f64>() / reps as f64;
    let mean_precision = (!precisions.is_empty()).then(|| precisions.iter().sum::<f64>() / precisions.len() as f64);
    let pass = mean_directed < 10.0 && mean_precision.is_none_or(|p| p >= 0.95);
    report(
        7,
        pass,
        &format!(
            "CPSS over MGM-CPCS, q=0.05, B=50, {reps} HD replicates: directed predictions {directed:?} (mean {mean_directed:.1}), \
             direction precision {}",
            mean_precision.map_or_else(|| "undefined".to_string(), |p| format!("{p:.3}"))
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_8_run_time_trend() {
    let _g = lock();
    let cell = |algo, alpha, lambda| CellSpec { algo, alpha, lambda };
    let spec = BenchSpec {
        replicates: 10,
        seed: 5000,
        threads: Some(1),
        cells: vec![
            cell(Algorithm::Pcs, 0.05, None),
            cell(Algorithm::MgmPcs, 0.05, Some(0.4)),
            cell(Algorithm::Pcs, 0.001, None),
            cell(Algorithm::MgmPcs, 0.001, Some(0.1)),
        ],
        ..BenchSpec::preset(Preset::Hd)
    };
    let res = run_benchmark(&spec).unwrap();
    let secs = |algo: &str, alpha: f64| {
        let v: Vec<f64> =
            res.cells.iter().filter(|c| c.algo == algo && c.alpha == Some(alpha) && c.error.is_none()).map(|c| c.seconds).collect();
        (v.iter().sum::<f64>() / v.len() as f64, v.len())
    };
    let (pc_05, n1) = secs("pcs", 0.05);
    let (mgm_05, n2) = secs("mgm-pcs", 0.05);
    let (pc_001, n3) = secs("pcs", 0.001);
    let (mgm_001, n4) = secs("mgm-pcs", 0.001);
    let pass = mgm_05 < pc_05 && mgm_001 > pc_001 && [n1, n2, n3, n4].iter().all(|&n| n >= 10);
    report(
        8,
        pass,
        &format!(
            "mean seconds over 10 HD replicates: alpha .05 PC {pc_05:.2} vs MGM-PCS(lambda .4) {mgm_05:.2}; \
             alpha .001 PC {pc_001:.2} vs MGM-PCS(lambda .1) {mgm_001:.2}"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_9_oracle_suites() {
    let _g = lock();
    let (agree, total) = fisher_z_agreement(400, 91);
    let fisher: Check = if agree as f64 >= 0.95 * total as f64 {
        Ok(format!("{agree}/{total} verdicts agree"))
    } else {
        Err(format!("only {agree}/{total} verdicts agree"))
    };
    let parts = [
        ("dag_to_cpdag vs equivalence classes", cpdag_oracle(5)),
        ("SHD vs minimal edits", shd_oracle(400, 92)),
        ("MGM gradient vs finite differences", mgm_gradient_oracle(93)),
        ("cc LRT vs Fisher-z", fisher),
        ("chi-squared tail vs reference", chi2_oracle()),
    ];
    let pass = parts.iter().all(|(_, r)| r.is_ok());
    let detail = parts
        .iter()
        .map(|(name, r)| match r {
            Ok(s) => format!("{name}: ok ({s})"),
            Err(s) => format!("{name}: FAILED ({s})"),
        })
        .collect::<Vec<_>>()
        .join("; ");
    report(9, pass, &detail);
    assert!(pass);
}

#[test]
fn criterion_10_hybrid_direction_recall() {
    let _g = lock();
    let res = hd_results();
    let pc = stat(res, Algorithm::Pcs, 0.05, None, "dir_recall");
    let mgm = stat(res, Algorithm::MgmPcs, 0.05, Some(0.14), "dir_recall");
    let pass = mgm.0 > pc.0;
    report(
        10,
        pass,
        &format!("directed-edge recall at alpha .05: MGM-PCS(lambda .14) {:.3} ({:.3}) vs PC-stable {:.3} ({:.3})", mgm.0, mgm.1, pc.0, pc.1),
    );
    assert!(pass);
}
