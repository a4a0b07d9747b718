//! `saddle` subcommands. [`cli_main`] returns the process exit code:
//! 0 on success, 1 when a solve stops without certifying ε (or a certificate
//! fails to check), 2 on usage and I/O errors.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use saddle_core::algorithms::{best_response_gap, rcpi_delta_limit, run_rcpi, SolveReport, SolverConfig};
use saddle_core::benchgen::{generate, Domain, GenSpec};
use saddle_core::counterexamples::{verify_ft_failure_example1, verify_ft_failure_example2};
use saddle_core::harness::{emit_trace_csv, run_bench, Algorithm, BenchPlan};
use saddle_core::model::{load_model, save_model};
use saddle_core::Model;

pub const THREADS_ENV: &str = "SADDLE_SOLVE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "saddle", version, about = "Solve zero-sum Markov games and L1 robust MDPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a benchmark instance as JSON.
    Generate(GenerateArgs),
    /// Solve a model file and write its residual trace next to it.
    Solve(SolveArgs),
    /// Run the benchmark sweep.
    Bench(BenchArgs),
    /// Print one of the line-search failure certificates.
    Counterexample(CounterexampleArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long)]
    domain: Domain,
    /// States (mg, inventory), maximum capital (gambler) or side length (gridworld).
    #[arg(long)]
    states: usize,
    #[arg(long, default_value_t = 0.9)]
    gamma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    xi: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Alg {
    Vi,
    Pai,
    Ft,
    Hk,
    Ws,
    Rcpi,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_enum, default_value = "rcpi")]
    alg: Alg,
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,
    /// Backup accuracy; defaults to 1e-9, lowered to half the RCPI limit when needed.
    #[arg(long)]
    delta: Option<f64>,
    /// Recovery evaluations per RCPI step: a count or `inf`.
    #[arg(long, default_value = "inf", value_parser = parse_m)]
    m: Recoveries,
    /// Overrides the discount stored in the model.
    #[arg(long)]
    gamma: Option<f64>,
    /// Wall-clock limit in seconds.
    #[arg(long)]
    time_cap: Option<f64>,
    /// Also report best-response gaps of the returned policies.
    #[arg(long)]
    audit: bool,
    /// Trace file; defaults to `<model stem>.<alg>.trace.csv` beside the model.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    paper_scale: bool,
    #[arg(long)]
    audit: bool,
    #[arg(long)]
    single_thread: bool,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Per-run limit in seconds.
    #[arg(long)]
    time_cap: Option<f64>,
    /// Restrict to these domains (comma separated).
    #[arg(long, value_delimiter = ',')]
    domain: Vec<Domain>,
    /// Restrict to these algorithms (comma separated).
    #[arg(long, value_delimiter = ',')]
    alg: Vec<Algorithm>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Which {
    Ft1,
    Ft2,
}

#[derive(Debug, Args)]
struct CounterexampleArgs {
    #[arg(long, value_enum)]
    which: Which,
    /// Write the increments as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// `None` is unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Recoveries(Option<usize>);

fn parse_m(s: &str) -> std::result::Result<Recoveries, String> {
    match s.to_ascii_lowercase().as_str() {
        "inf" | "infinity" | "unbounded" => Ok(Recoveries(None)),
        n => n.parse().map(|k| Recoveries(Some(k))).map_err(|_| format!("expected a count or `inf`, got {s:?}")),
    }
}

fn seconds(s: f64) -> Result<Duration> {
    Duration::try_from_secs_f64(s).with_context(|| format!("invalid time cap {s}"))
}

fn solve_threads() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => {
            let n: usize = v.trim().parse().with_context(|| format!("{THREADS_ENV}={v:?} is not a thread count"))?;
            Ok(Some(n.max(1)))
        }
        Err(_) => Ok(None),
    }
}

/// `<dir>/<stem>.<alg>.trace.csv`.
pub fn default_trace_path(model: &Path, alg: &str) -> PathBuf {
    let stem = model.file_stem().map_or_else(|| "model".into(), |s| s.to_string_lossy().into_owned());
    model.with_file_name(format!("{stem}.{alg}.trace.csv"))
}

enum Outcome {
    Ok,
    NotConverged,
}

fn generate_cmd(a: GenerateArgs) -> Result<Outcome> {
    let mut spec = GenSpec::new(a.domain, a.states, a.gamma, a.seed);
    if let Some(eta) = a.eta {
        spec.eta = eta;
    }
    if let Some(xi) = a.xi {
        spec.xi = xi;
    }
    if !(spec.gamma > 0.0 && spec.gamma < 1.0) {
        bail!("gamma {} outside (0,1)", spec.gamma);
    }
    let min = if spec.domain == Domain::RandomMg { 1 } else { 2 };
    if spec.size < min {
        bail!("{} needs --states of at least {min}", spec.domain);
    }
    if !(spec.eta > 0.0 && spec.eta <= 1.0) {
        bail!("eta {} outside (0,1]", spec.eta);
    }
    if !(spec.xi >= 0.0) {
        bail!("xi {} is negative", spec.xi);
    }
    let model = generate(&spec);
    save_model(&model, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    println!("wrote {} ({} {} states, gamma {}) to {}", spec.label(), model.kind(), model.n_states(), spec.gamma, a.out.display());
    Ok(Outcome::Ok)
}

fn with_gamma(model: Model, gamma: f64) -> Model {
    match model {
        Model::Game(mut g) => {
            g.gamma = gamma;
            Model::Game(g)
        }
        Model::Robust(mut r) => {
            r.gamma = gamma;
            Model::Robust(r)
        }
    }
}

fn run_solver(alg: Alg, model: &Model, cfg: &SolverConfig) -> Result<SolveReport> {
    let v0 = vec![0.0; model.n_states()];
    let report = match alg {
        Alg::Vi => Algorithm::Vi.run(model, cfg, &v0),
        Alg::Pai => Algorithm::Pai.run(model, cfg, &v0),
        Alg::Ft => Algorithm::Ft.run(model, cfg, &v0),
        Alg::Hk => Algorithm::Hk.run(model, cfg, &v0),
        Alg::Ws => Algorithm::Ws.run(model, cfg, &v0),
        Alg::Rcpi => run_rcpi(model, cfg, &v0),
    };
    Ok(report?)
}

fn solve_cmd(a: SolveArgs) -> Result<Outcome> {
    let mut model = load_model(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    if let Some(g) = a.gamma {
        model = with_gamma(model, g);
    }
    let problems = model.validate();
    if let Some(p) = problems.first() {
        bail!("{} has {} problem(s), first: {p:?}", a.model.display(), problems.len());
    }
    let cfg = SolverConfig {
        epsilon: a.epsilon,
        delta: a.delta.unwrap_or_else(|| 1e-9f64.min(0.5 * rcpi_delta_limit(model.gamma(), a.epsilon))),
        m: a.m.0,
        time_cap: a.time_cap.map(seconds).transpose()?,
        ..SolverConfig::default()
    };
    cfg.validate()?;
    let report = match solve_threads()? {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build()?.install(|| run_solver(a.alg, &model, &cfg))?,
        None => run_solver(a.alg, &model, &cfg)?,
    };
    let trace = a.trace.unwrap_or_else(|| default_trace_path(&a.model, &report.algorithm));
    emit_trace_csv(&report, &trace).with_context(|| format!("writing {}", trace.display()))?;

    println!("algorithm      {}", report.algorithm);
    println!("termination    {}", report.termination);
    println!("iterations     {}", report.iterations);
    println!("backups        {}", report.backups());
    println!("evaluations    {}", report.evaluations());
    println!("certified eps  {:.3e}", report.certified_epsilon);
    println!("elapsed        {:.3}s", report.elapsed.as_secs_f64());
    println!("value at s0    {:.10}", report.final_value[model.initial_state()]);
    if a.audit {
        let (gmax, gmin) = best_response_gap(&model, &report.final_policies)?;
        println!("audit gaps     max {gmax:.3e}, min {gmin:.3e}");
    }
    println!("trace          {}", trace.display());
    Ok(if report.converged() { Outcome::Ok } else { Outcome::NotConverged })
}

fn bench_cmd(a: BenchArgs) -> Result<Outcome> {
    let mut plan = if a.paper_scale { BenchPlan::paper_scale() } else { BenchPlan::desk() };
    plan.out_dir = Some(a.out.clone());
    plan.audit = a.audit;
    if a.single_thread {
        plan.threads = 1;
    }
    if let Some(e) = a.epsilon {
        plan.epsilon = e;
    }
    if let Some(t) = a.time_cap {
        plan.time_cap = seconds(t)?;
    }
    if !a.domain.is_empty() {
        plan.specs.retain(|s| a.domain.contains(&s.domain));
    }
    if !a.alg.is_empty() {
        plan.algorithms = a.alg.clone();
    }
    let summary = run_bench(&plan).with_context(|| format!("benchmark output in {}", a.out.display()))?;
    print!("{}", summary.to_csv());
    let failed = summary.records.iter().filter(|r| r.result.is_err()).count();
    if failed > 0 {
        eprintln!("{failed} run(s) failed; see runs.csv");
    }
    println!("wrote {} runs to {}", summary.records.len(), a.out.display());
    Ok(Outcome::Ok)
}

fn counterexample_cmd(a: CounterexampleArgs) -> Result<Outcome> {
    let cert = match a.which {
        Which::Ft1 => verify_ft_failure_example1()?,
        Which::Ft2 => verify_ft_failure_example2()?,
    };
    println!("{cert}");
    if let Some(out) = &a.out {
        std::fs::write(out, cert.to_csv()).with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(if cert.is_valid() { Outcome::Ok } else { Outcome::NotConverged })
}

pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Generate(a) => generate_cmd(a),
        Command::Solve(a) => solve_cmd(a),
        Command::Bench(a) => bench_cmd(a),
        Command::Counterexample(a) => counterexample_cmd(a),
    };
    match result {
        Ok(Outcome::Ok) => 0,
        Ok(Outcome::NotConverged) => 1,
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}
