use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use fastarm_cli::config::{Algo, RunConfig};
use fastarm_cli::{bounds, report, runner, workloads};
use fastarm_core::{
    AdaptiveMipsIndex, BackendKind, Environment, InstanceKind, MipsSpec, PointSet,
};

#[derive(Parser)]
#[command(
    name = "fastarm",
    about = "Sublinear bandit arm selection: experiments, instances, index statistics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a bandit experiment and emit per-step and summary CSV files.
    Run(RunArgs),
    /// Generate a synthetic instance and serialize it.
    Gen(GenArgs),
    /// Build an index over a point CSV and print its statistics.
    IndexStats(IndexStatsArgs),
    /// Evaluate the closed-form regret ceiling for a configuration.
    Bound(BoundArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Config file of `key = value` lines; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// oful | oful-exact | lints | lints-exact
    #[arg(long)]
    algo: Option<String>,
    /// Number of arms.
    #[arg(long = "K")]
    k: Option<usize>,
    /// Feature dimension.
    #[arg(long)]
    d: Option<usize>,
    /// Horizon.
    #[arg(long = "T")]
    t: Option<usize>,
    /// Accuracy parameter in (0, 1) for accelerated variants.
    #[arg(long)]
    eta: Option<f64>,
    /// Target failure probability in (0, 1).
    #[arg(long)]
    delta: Option<f64>,
    /// lsh | brute
    #[arg(long)]
    oracle: Option<String>,
    /// Per-oracle failure probability in (0, 1).
    #[arg(long)]
    oracle_fail: Option<f64>,
    /// sphere-uniform | clustered | planted-gap
    #[arg(long)]
    instance: Option<String>,
    /// Reward noise standard deviation in [0, 1].
    #[arg(long)]
    sigma: Option<f64>,
    /// Planted-gap margin in (0, 1).
    #[arg(long)]
    gap: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Independent repetitions (parallel, derived seeds).
    #[arg(long)]
    reps: Option<usize>,
    /// Output base path; writes <out>.rep<N>.steps.csv, <out>.summary.csv,
    /// and <out>.index.txt for hash-backend runs.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Load a serialized instance (base path of `gen`) instead of generating.
    #[arg(long)]
    instance_file: Option<PathBuf>,
    /// Skip per-step approximation-loss tracking.
    #[arg(long)]
    no_delta: bool,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    instance: String,
    #[arg(long = "K")]
    k: usize,
    #[arg(long)]
    d: usize,
    #[arg(long, default_value_t = 0.5)]
    sigma: f64,
    #[arg(long, default_value_t = 0.3)]
    gap: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Base path; writes <out>.points.csv and <out>.env.txt.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct IndexStatsArgs {
    /// Point CSV (one row per point).
    #[arg(long)]
    points: PathBuf,
    #[arg(long)]
    c: f64,
    #[arg(long)]
    r: f64,
    #[arg(long)]
    eps: f64,
    #[arg(long)]
    q_bar: f64,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, default_value = "lsh")]
    oracle: String,
    #[arg(long, default_value_t = 0.2)]
    oracle_fail: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Planted-answer queries used to measure mean probes.
    #[arg(long, default_value_t = 200)]
    queries: usize,
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long)]
    algo: String,
    #[arg(long)]
    d: usize,
    #[arg(long = "T")]
    t: usize,
    #[arg(long, default_value_t = 0.0)]
    eta: f64,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// Observed regret to compare against the ceiling.
    #[arg(long)]
    empirical: Option<f64>,
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Run(args) => run(args),
        Command::Gen(args) => gen(args),
        Command::IndexStats(args) => index_stats(args),
        Command::Bound(args) => bound(args),
    }
}

fn run(args: RunArgs) -> anyhow::Result<()> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &args.config {
        cfg.load_file(path)
            .with_context(|| format!("reading config {}", path.display()))?;
    }
    if let Some(v) = &args.algo {
        cfg.algo = v.parse()?;
    }
    if let Some(v) = args.k {
        cfg.k = v;
    }
    if let Some(v) = args.d {
        cfg.d = v;
    }
    if let Some(v) = args.t {
        cfg.horizon = v;
    }
    if let Some(v) = args.eta {
        cfg.eta = v;
    }
    if let Some(v) = args.delta {
        cfg.delta = v;
    }
    if let Some(v) = &args.oracle {
        cfg.oracle = v.parse()?;
    }
    if let Some(v) = args.oracle_fail {
        cfg.oracle_fail = v;
    }
    if let Some(v) = &args.instance {
        cfg.instance = v.parse()?;
    }
    if let Some(v) = args.sigma {
        cfg.noise_std = v;
    }
    if let Some(v) = args.gap {
        cfg.gap = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.reps {
        cfg.reps = v;
    }
    if args.out.is_some() {
        cfg.out = args.out.clone();
    }
    if args.instance_file.is_some() {
        cfg.instance_file = args.instance_file.clone();
    }
    if args.no_delta {
        cfg.track_delta = false;
    }
    cfg.validate()?;

    let outputs = match &cfg.out {
        Some(base) => {
            let base = base.clone();
            runner::run_and_write(&cfg, &base)?
        }
        None => runner::run_many(&cfg)?,
    };

    println!("{}", report::SUMMARY_HEADER);
    for output in &outputs {
        println!("{}", report::summary_csv_row(&output.summary));
    }
    Ok(())
}

fn gen(args: GenArgs) -> anyhow::Result<()> {
    let kind: InstanceKind = args.instance.parse()?;
    let env = Environment::make_instance(kind, args.k, args.d, args.sigma, args.gap, args.seed)?;
    env.save(&args.out)?;
    println!(
        "wrote {}.points.csv and {}.env.txt ({} arms, d = {})",
        args.out.display(),
        args.out.display(),
        args.k,
        args.d
    );
    Ok(())
}

fn index_stats(args: IndexStatsArgs) -> anyhow::Result<()> {
    let points = Arc::new(PointSet::load_csv(&args.points)?);
    let spec = MipsSpec::new(args.c, args.r, args.eps, args.q_bar, args.delta)?;
    let backend: BackendKind = args.oracle.parse()?;
    let index = AdaptiveMipsIndex::build(points, spec, backend, args.oracle_fail, args.seed)?;
    print!("{}", report::index_report_text(&index.stats()));
    if !index.is_vacuous() {
        let mean = workloads::mean_probes_planted(&index, args.queries, args.seed)?;
        println!("mean_probes = {mean}");
        println!("probe_ratio = {}", mean / index.points().len() as f64);
    }
    Ok(())
}

fn bound(args: BoundArgs) -> anyhow::Result<()> {
    let algo: Algo = args.algo.parse()?;
    if !algo.is_exact() && !(0.0 < args.eta && args.eta < 1.0) {
        bail!("accelerated variants need --eta in (0, 1)");
    }
    let value = bounds::regret_bound(algo, args.d, args.t, args.eta, args.delta);
    match args.empirical {
        Some(empirical) => {
            let report = bounds::compare_bound(algo, args.d, args.t, args.eta, args.delta, empirical);
            println!("bound = {}", report.bound);
            println!("empirical = {}", report.empirical);
            println!("ratio = {}", report.ratio);
        }
        None => println!("bound = {value}"),
    }
    Ok(())
}
