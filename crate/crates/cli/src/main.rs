//! `errw-lab` command-line tool.
//!
//! Every command writes its result to `--output` (stdout by default). On
//! failure a single JSON object `{"error", "message", "field", "path"}` goes
//! to stderr and the exit code is nonzero.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use errw_lab::environment::{sample_environment_longrun, sample_environments, EnvSampler};
use errw_lab::errw::simulate_batch;
use errw_lab::estimator::{adjacent_pairs, estimate, sample_size_plan, theoretical_bounds};
use errw_lab::io::{self, EnvironmentRecord, IoError, LongRunRecord};
use errw_lab::moments::kl_mixing;
use errw_lab::{rng, selftest, Graph, McmcConfig, MomentOracle, PairChoice};
use rayon::prelude::*;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "errw-lab", version, about = "Edge-reinforced random walks: simulation, environments and weight recovery")]
struct Cli {
    /// Worker threads for parallel sections; results do not depend on it.
    #[arg(long, global = true, env = "ERRW_LAB_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate K independent ERRW trajectories of T steps.
    Simulate(SimulateArgs),
    /// Draw N environments from the mixing measure.
    SampleEnv(SampleEnvArgs),
    /// Estimate the initial weights from trajectories.
    Estimate(EstimateArgs),
    /// Closed-form moments against environment Monte Carlo, as CSV.
    VerifyMoments(VerifyArgs),
    /// KL divergence between the mixing measures of two weight vectors.
    Kl(KlArgs),
    /// Cover-time and conductance bounds (log-space).
    Bounds(BoundsArgs),
    /// Sample sizes required by the analysis (log-space).
    Plan(PlanArgs),
    /// Reduced-scale versions of the acceptance checks.
    Selftest(SelftestArgs),
}

#[derive(Args)]
struct Output {
    /// Output file; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct Problem {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    weights: PathBuf,
    #[arg(long)]
    v0: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum TrajectoryFormat {
    Jsonl,
    Csv,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    problem: Problem,
    #[arg(long = "K")]
    k: usize,
    #[arg(long = "T")]
    t: usize,
    #[arg(long)]
    seed: u64,
    /// Defaults to CSV when the output file ends in `.csv`, JSON lines otherwise.
    #[arg(long, value_enum)]
    format: Option<TrajectoryFormat>,
    #[command(flatten)]
    out: Output,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum SamplerKind {
    Tree,
    Mcmc,
    Longrun,
}

#[derive(Args)]
struct SamplerArgs {
    /// `tree` is exact and needs a tree; `longrun` emits transition matrices.
    #[arg(long, value_enum, default_value = "mcmc")]
    sampler: SamplerKind,
    #[arg(long, default_value_t = McmcConfig::default().burn_in)]
    burn_in: usize,
    #[arg(long, default_value_t = McmcConfig::default().thinning)]
    thinning: usize,
    #[arg(long, default_value_t = McmcConfig::default().step_size)]
    step_size: f64,
    /// Share draws among this many long chains instead of one chain per draw.
    #[arg(long)]
    chains: Option<usize>,
    /// Walk length for the long-run sampler.
    #[arg(long, default_value_t = 10_000)]
    t_long: usize,
}

#[derive(Args)]
struct SampleEnvArgs {
    #[command(flatten)]
    problem: Problem,
    #[arg(long = "N")]
    count: usize,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    sampler: SamplerArgs,
    #[command(flatten)]
    out: Output,
}

#[derive(Clone, Copy, ValueEnum)]
enum PairChoiceArg {
    Canonical,
    Average,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    trajectories: PathBuf,
    #[arg(long)]
    m: usize,
    /// True weights; adds `d(A, Â)` to the report.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "canonical")]
    pair_choice: PairChoiceArg,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    problem: Problem,
    /// Environment file from `sample-env`; otherwise environments are drawn here.
    #[arg(long, conflicts_with_all = ["count", "seed"])]
    environments: Option<PathBuf>,
    #[arg(long = "N", required_unless_present = "environments")]
    count: Option<usize>,
    #[arg(long, required_unless_present = "environments")]
    seed: Option<u64>,
    #[command(flatten)]
    sampler: SamplerArgs,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct KlArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    v0: usize,
    /// Weights of the first measure.
    #[arg(long)]
    weights: PathBuf,
    /// Weights of the second measure.
    #[arg(long)]
    weights_tilde: PathBuf,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct Shape {
    /// Vertex count; taken from `--graph` when omitted.
    #[arg(long, required_unless_present = "graph")]
    n: Option<usize>,
    /// Diameter; taken from `--graph` when omitted.
    #[arg(long, required_unless_present = "graph")]
    diam: Option<usize>,
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    a_lo: f64,
    #[arg(long)]
    a_hi: f64,
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    shape: Shape,
    #[arg(long)]
    delta: f64,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    shape: Shape,
    #[arg(long)]
    eps: f64,
    #[arg(long)]
    delta: f64,
    /// Constant of the m-cover-time bound, which has no published value.
    #[arg(long, default_value_t = 1.0)]
    g2: f64,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct SelftestArgs {
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    out: Output,
}

/// Error reported as JSON on stderr.
#[derive(Debug)]
struct Failure {
    kind: &'static str,
    message: String,
    field: Option<String>,
    path: Option<String>,
    code: u8,
}

impl Failure {
    fn domain(field: &str, message: impl Into<String>) -> Self {
        Self { kind: "DomainError", message: message.into(), field: Some(field.into()), path: None, code: 2 }
    }

    fn to_json(&self) -> Value {
        json!({ "error": self.kind, "message": self.message, "field": self.field, "path": self.path })
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        let message = e.to_string();
        let (kind, path) = match &e {
            IoError::File { path, .. } if e.is_not_found() => ("FileNotFound", path.clone()),
            IoError::File { path, .. } => ("IoError", path.clone()),
            IoError::Parse { path, .. } => ("ParseError", path.clone()),
            IoError::Invalid { path, .. } => ("DomainError", path.clone()),
        };
        Self { kind, message, field: None, path: Some(path), code: 1 }
    }
}

macro_rules! domain_from {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Self { kind: "DomainError", message: e.to_string(), field: None, path: None, code: 2 }
            }
        }
    )*};
}
domain_from!(
    errw_lab::GraphError,
    errw_lab::ErrwError,
    errw_lab::EnvironmentError,
    errw_lab::MomentError
);

impl From<errw_lab::EstimatorError> for Failure {
    fn from(e: errw_lab::EstimatorError) -> Self {
        let field = match &e {
            errw_lab::EstimatorError::Domain { field, .. } => Some(field.to_string()),
            _ => None,
        };
        Self { kind: "DomainError", message: e.to_string(), field, path: None, code: 2 }
    }
}

type Result<T> = std::result::Result<T, Failure>;

fn load_graph(path: &Path) -> Result<Graph> {
    Ok(io::parse_graph(&io::read_text(path)?, &path.display().to_string())?)
}

fn load_weights(path: &Path, g: &Graph) -> Result<Vec<f64>> {
    Ok(io::parse_weights(&io::read_text(path)?, &path.display().to_string(), g)?.into_inner())
}

fn emit(out: &Output, text: &str) -> Result<()> {
    match &out.output {
        Some(path) => Ok(io::write_text(path, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit_json(out: &Output, value: &Value) -> Result<()> {
    emit(out, &format!("{}\n", serde_json::to_string_pretty(value).expect("JSON values serialize")))
}

fn check_vertex(g: &Graph, v0: usize) -> Result<()> {
    if v0 < g.n() {
        Ok(())
    } else {
        Err(Failure::domain("v0", format!("v0 = {v0} is not a vertex of a graph with {} vertices", g.n())))
    }
}

fn at_least_one(field: &str, value: usize) -> Result<()> {
    if value >= 1 {
        Ok(())
    } else {
        Err(Failure::domain(field, format!("{field} must be at least 1")))
    }
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let g = load_graph(&args.problem.graph)?;
    let a = load_weights(&args.problem.weights, &g)?;
    check_vertex(&g, args.problem.v0)?;
    at_least_one("K", args.k)?;
    let trajs = simulate_batch(&g, &a, args.problem.v0, args.t, args.k, args.seed)?;
    let csv = match args.format {
        Some(f) => matches!(f, TrajectoryFormat::Csv),
        None => args.out.output.as_ref().and_then(|p| p.extension()).is_some_and(|e| e.eq_ignore_ascii_case("csv")),
    };
    let text = if csv { io::trajectories_to_csv(&trajs) } else { io::trajectories_to_jsonl(&trajs) };
    emit(&args.out, &text)
}

fn draw_records(
    g: &Graph,
    a: &[f64],
    v0: usize,
    count: usize,
    seed: u64,
    s: &SamplerArgs,
) -> Result<Vec<EnvironmentRecord>> {
    at_least_one("N", count)?;
    if s.sampler == SamplerKind::Longrun {
        return (0..count)
            .into_par_iter()
            .map(|k| {
                let p = sample_environment_longrun(g, a, v0, s.t_long, &mut rng::stream(seed, k as u64))?;
                Ok(EnvironmentRecord::LongRun(LongRunRecord { v0, n: p.n, p: p.p }))
            })
            .collect();
    }
    let sampler = match s.sampler {
        SamplerKind::Tree => EnvSampler::Tree,
        _ => EnvSampler::Mcmc(McmcConfig {
            burn_in: s.burn_in,
            thinning: s.thinning,
            step_size: s.step_size,
            chains: s.chains,
        }),
    };
    let envs = sample_environments(g, a, v0, count, &sampler, seed)?;
    Ok(envs.into_iter().map(EnvironmentRecord::Full).collect())
}

fn sample_env(args: SampleEnvArgs) -> Result<()> {
    let g = load_graph(&args.problem.graph)?;
    let a = load_weights(&args.problem.weights, &g)?;
    check_vertex(&g, args.problem.v0)?;
    let records = draw_records(&g, &a, args.problem.v0, args.count, args.seed, &args.sampler)?;
    emit(&args.out, &io::records_to_jsonl(&records))
}

fn run_estimate(args: EstimateArgs) -> Result<()> {
    let g = load_graph(&args.graph)?;
    let trajs = io::read_trajectories(&args.trajectories)?;
    at_least_one("m", args.m)?;
    let truth = args.truth.as_deref().map(|p| load_weights(p, &g)).transpose()?;
    let choice = match args.pair_choice {
        PairChoiceArg::Canonical => PairChoice::Canonical,
        PairChoiceArg::Average => PairChoice::Average,
    };
    let report = estimate(&g, &trajs, args.m, choice, truth.as_deref())?;
    emit_json(&args.out, &serde_json::to_value(&report).expect("report serializes"))
}

/// Mean and standard error.
fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn verify_moments(args: VerifyArgs) -> Result<()> {
    let g = load_graph(&args.problem.graph)?;
    let a = load_weights(&args.problem.weights, &g)?;
    let v0 = args.problem.v0;
    check_vertex(&g, v0)?;
    let records = match &args.environments {
        Some(path) => {
            let recs = io::parse_environment_records(&io::read_text(path)?, &path.display().to_string())?;
            if recs.is_empty() {
                return Err(Failure::domain("environments", "environment file is empty"));
            }
            if let Some(r) = recs.iter().find(|r| r.v0() != v0) {
                return Err(Failure::domain("v0", format!("environment drawn from v0 = {}, expected {v0}", r.v0())));
            }
            recs
        }
        None => draw_records(&g, &a, v0, args.count.unwrap_or(0), args.seed.unwrap_or(0), &args.sampler)?,
    };
    let oracle = MomentOracle::new(&g, &a, v0)?;
    let us = records
        .iter()
        .map(|r| Ok(r.transition_matrix(&g)?.u_values(&g)))
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let mut csv = String::from("moment,edge,edge2,closed_form,monte_carlo,std_error,z\n");
    let mut row = |name: &str, e: usize, f: Option<usize>, exact: f64, xs: Vec<f64>| {
        let (mean, se) = mean_se(&xs);
        let f = f.map(|f| f.to_string()).unwrap_or_default();
        let _ = writeln!(csv, "{name},{e},{f},{exact},{mean},{se},{}", (mean - exact) / se);
    };
    for e in 0..g.num_edges() {
        row("E_sqrt_U", e, None, oracle.expected_sqrt_u(e)?, us.iter().map(|u| u[e].sqrt()).collect());
        row("E_U", e, None, oracle.expected_u(e)?, us.iter().map(|u| u[e]).collect());
        row("E_U2", e, None, oracle.expected_u_sq(e)?, us.iter().map(|u| u[e] * u[e]).collect());
    }
    for p in adjacent_pairs(&g) {
        row("E_UU", p.e, Some(p.f), oracle.expected_uu(p.e, p.f)?, us.iter().map(|u| u[p.e] * u[p.f]).collect());
    }
    emit(&args.out, &csv)
}

fn kl(args: KlArgs) -> Result<()> {
    let g = load_graph(&args.graph)?;
    let a = load_weights(&args.weights, &g)?;
    let b = load_weights(&args.weights_tilde, &g)?;
    check_vertex(&g, args.v0)?;
    emit_json(&args.out, &json!({ "kl": kl_mixing(&g, args.v0, &a, &b)? }))
}

fn shape(s: &Shape) -> Result<(usize, usize)> {
    let from_graph = s.graph.as_deref().map(load_graph).transpose()?;
    let n = s.n.or(from_graph.as_ref().map(Graph::n)).expect("clap requires --n or --graph");
    let diam = s.diam.or(from_graph.as_ref().map(Graph::diameter)).expect("clap requires --diam or --graph");
    Ok((n, diam))
}

/// `{"ln_x": v, "log10_x": v / ln 10}` entries for each named log value.
fn log_fields(obj: &mut serde_json::Map<String, Value>, entries: &[(&str, f64)]) {
    for &(name, ln) in entries {
        obj.insert(format!("ln_{name}"), json!(ln));
        obj.insert(format!("log10_{name}"), json!(ln / std::f64::consts::LN_10));
    }
}

fn bounds(args: BoundsArgs) -> Result<()> {
    let (n, diam) = shape(&args.shape)?;
    let b = theoretical_bounds(n, diam, args.shape.a_lo, args.shape.a_hi, args.delta)?;
    let mut obj = serde_json::Map::new();
    obj.insert("n".into(), json!(n));
    obj.insert("diam".into(), json!(diam));
    obj.insert("g1".into(), json!(b.g1));
    log_fields(
        &mut obj,
        &[
            ("q_lo", b.ln_q_lo),
            ("q_hi", b.ln_q_hi),
            ("tcov_bound", b.ln_tcov),
            ("pi_star_bound", b.ln_pi_star),
            ("p_min_bound", b.ln_p_min),
        ],
    );
    emit_json(&args.out, &Value::Object(obj))
}

fn plan(args: PlanArgs) -> Result<()> {
    let (n, diam) = shape(&args.shape)?;
    let p = sample_size_plan(n, diam, args.shape.a_lo, args.shape.a_hi, args.eps, args.delta, args.g2)?;
    let mut obj = serde_json::Map::new();
    obj.insert("n".into(), json!(n));
    obj.insert("diam".into(), json!(diam));
    obj.insert("delta_prime".into(), json!(p.delta_prime));
    obj.insert("eps_prime".into(), json!(p.eps_prime));
    log_fields(&mut obj, &[("m", p.ln_m), ("T", p.ln_t), ("K", p.ln_k)]);
    emit_json(&args.out, &Value::Object(obj))
}

fn run_selftest(args: SelftestArgs) -> Result<bool> {
    let checks = selftest::run(args.seed);
    let passed = checks.iter().all(|c| c.passed);
    emit_json(&args.out, &json!({ "seed": args.seed, "passed": passed, "checks": checks }))?;
    Ok(passed)
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(t) = cli.threads {
        at_least_one("threads", t)?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::domain("threads", e.to_string()))?;
    }
    match cli.command {
        Command::Simulate(a) => simulate(a)?,
        Command::SampleEnv(a) => sample_env(a)?,
        Command::Estimate(a) => run_estimate(a)?,
        Command::VerifyMoments(a) => verify_moments(a)?,
        Command::Kl(a) => kl(a)?,
        Command::Bounds(a) => bounds(a)?,
        Command::Plan(a) => plan(a)?,
        Command::Selftest(a) => return run_selftest(a),
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let f = Failure { kind: "UsageError", message: e.to_string(), field: None, path: None, code: 2 };
            eprintln!("{}", f.to_json());
            return ExitCode::from(f.code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        // Self-test completed with failing checks; the report says which.
        Ok(false) => ExitCode::from(3),
        Err(f) => {
            eprintln!("{}", f.to_json());
            ExitCode::from(f.code)
        }
    }
}
