use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use mixcausal::bench::{run_benchmark, BenchSpec, Preset};
use mixcausal::citest::ci_test;
use mixcausal::cpss::{cpss_run, CpssConfig};
use mixcausal::io::{read_dataset, read_graph, read_meta, sibling_meta, write_dataset, write_graph};
use mixcausal::metrics::evaluate;
use mixcausal::mgm::{mgm_learn, MgmConfig};
use mixcausal::search::{self, Algorithm, SearchConfig};
use mixcausal::simulate::{simulate_replicate, SimConfig};
use mixcausal::{MarkedGraph, MixedDataset};

#[derive(Parser)]
#[command(name = "mixcausal", version, about = "Causal structure learning for mixed continuous and categorical data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a mixed SEM dataset and its generating DAG.
    Simulate(SimulateArgs),
    /// Run one conditional independence test.
    Citest(CitestArgs),
    /// Learn an undirected mixed graphical model.
    Mgm(MgmArgs),
    /// Learn a pattern with PC-stable, CPC-stable or an MGM hybrid.
    Learn(LearnArgs),
    /// Stability selection over complementary half-samples.
    Cpss(CpssArgs),
    /// Score an estimated graph against a true DAG.
    Evaluate(EvaluateArgs),
    /// Replicated simulation benchmark.
    Bench(BenchArgs),
}

#[derive(Args)]
struct DataArgs {
    /// CSV file with a header of variable names.
    #[arg(long)]
    data: PathBuf,
    /// Variable kinds and levels; defaults to `meta.json` beside the data.
    #[arg(long)]
    meta: Option<PathBuf>,
}

impl DataArgs {
    fn load(&self) -> Result<MixedDataset> {
        read_dataset(&self.data, self.meta.as_deref()).with_context(|| format!("reading {}", self.data.display()))
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_parser = parse_preset)]
    preset: Option<Preset>,
    #[arg(long)]
    vars: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    frac_discrete: Option<f64>,
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long)]
    max_degree: Option<usize>,
    #[arg(long)]
    avg_degree: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for `data.csv`, `meta.json` and `truth.graph`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CitestArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    x: String,
    #[arg(long)]
    y: String,
    /// Comma-separated conditioning variables.
    #[arg(long, value_delimiter = ',')]
    given: Vec<String>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
}

#[derive(Args)]
struct MgmArgs {
    #[command(flatten)]
    data: DataArgs,
    /// One penalty, or three for cc,cd,dd edges.
    #[arg(long, value_delimiter = ',', required = true)]
    lambda: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long, value_parser = parse_algo)]
    algo: Algorithm,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// MGM penalty (one or three values) for the hybrids.
    #[arg(long, value_delimiter = ',')]
    lambda: Vec<f64>,
    /// Largest conditioning-set size.
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
}

impl SearchArgs {
    fn configs(&self) -> Result<(SearchConfig, Option<MgmConfig>)> {
        let cfg = SearchConfig { max_depth: self.depth, ..SearchConfig::new(self.alpha) };
        let mgm = if self.algo.uses_mgm() {
            Some(mgm_config(&self.lambda)?)
        } else {
            if !self.lambda.is_empty() {
                log::warn!("--lambda is ignored by {}", self.algo);
            }
            None
        };
        Ok((cfg, mgm))
    }
}

#[derive(Args)]
struct LearnArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    search: SearchArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CpssArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    search: SearchArgs,
    /// Target error rate.
    #[arg(long, default_value_t = 0.05)]
    q: f64,
    /// Number of complementary pairs B.
    #[arg(long, default_value_t = 50)]
    pairs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Run each base search single-threaded; the half-samples still run in
    /// parallel.
    #[arg(long)]
    serial_base: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Edge frequency table.
    #[arg(long)]
    freq_out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    est: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    /// Variable kinds for the per-type scopes; defaults to `meta.json`
    /// beside the true graph, else every node counts as continuous.
    #[arg(long)]
    meta: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// TOML benchmark description; command-line values override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_preset)]
    preset: Option<Preset>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

fn parse_preset(s: &str) -> std::result::Result<Preset, String> {
    match s.to_ascii_lowercase().as_str() {
        "ld" => Ok(Preset::Ld),
        "hd" => Ok(Preset::Hd),
        _ => Err(format!("unknown preset `{s}` (expected ld or hd)")),
    }
}

fn parse_algo(s: &str) -> std::result::Result<Algorithm, String> {
    s.parse().map_err(|e: mixcausal::Error| e.to_string())
}

fn mgm_config(lambda: &[f64]) -> Result<MgmConfig> {
    let cfg = match *lambda {
        [l] => MgmConfig::new(l),
        [cc, cd, dd] => MgmConfig::with_lambdas(cc, cd, dd),
        [] => bail!("--lambda is required"),
        _ => bail!("--lambda takes one or three values"),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn emit_graph(g: &MarkedGraph, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => write_graph(p, g).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{}", g.to_text());
            Ok(())
        }
    }
}

fn set_threads(threads: Option<usize>) -> Result<()> {
    if let Some(t) = threads {
        if t == 0 {
            bail!("--threads must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let mut cfg = match a.preset {
        Some(Preset::Hd) => SimConfig::high_dim(a.seed),
        _ => SimConfig::low_dim(a.seed),
    };
    if let Some(v) = a.vars {
        cfg.n_vars = v;
    }
    if let Some(v) = a.samples {
        cfg.n_samples = v;
    }
    if let Some(v) = a.frac_discrete {
        cfg.frac_discrete = v;
    }
    if let Some(v) = a.levels {
        cfg.n_levels = v;
    }
    if let Some(v) = a.max_degree {
        cfg.max_degree = v;
    }
    if let Some(v) = a.avg_degree {
        cfg.max_avg_degree = v;
    }
    let rep = simulate_replicate(&cfg)?;
    write_dataset(&a.out, &rep.data)?;
    write_graph(&a.out.join("truth.graph"), &rep.model.dag)?;
    eprintln!(
        "wrote {} samples of {} variables and a DAG with {} edges to {}",
        rep.data.n(),
        rep.data.n_vars(),
        rep.model.dag.num_edges(),
        a.out.display()
    );
    Ok(())
}

fn citest(a: CitestArgs) -> Result<()> {
    let data = a.data.load()?;
    let index = |name: &str| data.index_of(name).ok_or_else(|| anyhow!("no variable named `{name}`"));
    let x = index(&a.x)?;
    let y = index(&a.y)?;
    let s = a.given.iter().filter(|g| !g.is_empty()).map(|g| index(g)).collect::<Result<Vec<_>>>()?;
    let r = ci_test(&data, x, y, &s, a.alpha)?;
    println!("statistic\t{}", r.statistic);
    println!("dof\t{}", r.dof);
    println!("p_value\t{}", r.p_value);
    println!("independent\t{}", r.independent);
    if r.degenerate {
        eprintln!("warning: a regression did not converge; the result used a ridge fallback");
    }
    Ok(())
}

fn mgm(a: MgmArgs) -> Result<()> {
    let data = a.data.load()?;
    let start = Instant::now();
    let fit = mgm_learn(&data, &mgm_config(&a.lambda)?)?;
    emit_graph(&fit.graph, a.out.as_deref())?;
    eprintln!(
        "edges: {}  iterations: {}  converged: {}  objective: {:.6}  seconds: {:.3}",
        fit.graph.num_edges(),
        fit.iterations,
        fit.converged,
        fit.objective,
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

fn learn(a: LearnArgs) -> Result<()> {
    set_threads(a.search.threads)?;
    let data = a.data.load()?;
    let (cfg, mgm) = a.search.configs()?;
    let out = search::run(a.search.algo, &data, &cfg, mgm.as_ref())?;
    emit_graph(&out.graph, a.out.as_deref())?;
    let s = out.stats;
    eprintln!(
        "tests: {}  edges: {}  seconds: {:.3} (mgm {:.3}, skeleton {:.3}, orientation {:.3})",
        s.tests,
        out.graph.num_edges(),
        s.total_seconds(),
        s.mgm_seconds,
        s.skeleton_seconds,
        s.orient_seconds
    );
    if !s.mgm_converged {
        eprintln!("warning: MGM stopped at the iteration limit");
    }
    Ok(())
}

fn cpss(a: CpssArgs) -> Result<()> {
    set_threads(a.search.threads)?;
    let data = a.data.load()?;
    let (cfg, mgm) = a.search.configs()?;
    let ccfg = CpssConfig { q: a.q, pairs: a.pairs, seed: a.seed };
    let algo = a.search.algo;
    let serial = a.serial_base.then(|| rayon::ThreadPoolBuilder::new().num_threads(1).build()).transpose()?;
    let start = Instant::now();
    let res = cpss_run(&data, &ccfg, |d| {
        let go = || search::run(algo, d, &cfg, mgm.as_ref()).map(|o| o.graph);
        match &serial {
            Some(pool) => pool.install(go),
            None => go(),
        }
    })?;
    emit_graph(&res.graph, a.out.as_deref())?;
    if let Some(p) = &a.freq_out {
        res.frequencies.write_csv(fs::File::create(p)?)?;
    }
    eprintln!(
        "runs: {}  mean selected: {:.2}  threshold: {}  edges: {}  seconds: {:.3}",
        res.frequencies.runs(),
        res.frequencies.avg_selected(),
        res.threshold.map_or_else(|| "none".to_string(), |t| t.to_string()),
        res.graph.num_edges(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

fn evaluate_cmd(a: EvaluateArgs) -> Result<()> {
    let meta = a.meta.clone().or_else(|| sibling_meta(&a.truth)).map(|p| read_meta(&p)).transpose()?;
    let truth = read_graph(&a.truth, meta.as_deref())?;
    let est = read_graph(&a.est, Some(truth.variables()))?;
    let report = evaluate(&est, &truth)?;
    match &a.out {
        Some(p) => report.write_csv(fs::File::create(p)?)?,
        None => report.write_csv(std::io::stdout().lock())?,
    }
    Ok(())
}

fn bench(a: BenchArgs) -> Result<()> {
    let mut spec = match &a.config {
        Some(p) => BenchSpec::from_toml(&fs::read_to_string(p)?).with_context(|| format!("reading {}", p.display()))?,
        None => BenchSpec::preset(a.preset.unwrap_or(Preset::Hd)),
    };
    if let Some(p) = a.preset {
        spec.preset = p;
    }
    if let Some(r) = a.replicates {
        spec.replicates = r;
    }
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    if a.threads.is_some() {
        spec.threads = a.threads;
    }
    let start = Instant::now();
    let res = run_benchmark(&spec)?;
    res.write_all(&a.out)?;
    let failed = res.cells.iter().filter(|c| c.error.is_some()).count();
    eprintln!(
        "{} cells over {} replicates ({} failed) in {:.1}s; tables in {}",
        res.cells.len(),
        spec.replicates,
        failed,
        start.elapsed().as_secs_f64(),
        a.out.display()
    );
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Simulate(a) => simulate(a),
        Command::Citest(a) => citest(a),
        Command::Mgm(a) => mgm(a),
        Command::Learn(a) => learn(a),
        Command::Cpss(a) => cpss(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Bench(a) => bench(a),
    }
}
