//! `affineopt`: generate instances, run the solvers, and write traces.
//!
//! Exit codes: 0 on success, 2 for usage or input errors, 3 for numerical
//! failures such as divergence.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use affineopt::diagnostics::ConvergenceTrace;
use affineopt::experiments::{
    e_from_kappa, exact_bounds, gen_compressed_sensing, gen_random_quadratic, reference_solution, run_comparison,
    write_comparison, CsConfig, MethodRun, RunSummary, SingularGrid,
};
use affineopt::problem::{load_instance, save_instance, PrimalDualPair, ProblemInstance};
use affineopt::solvers::{solve, Method, MethodConfig, ParamSource, SolveOptions, StoppingRule};
use affineopt::spectral::{summarize, Spectrum, DEFAULT_RANK_TOL};
use affineopt::{Error, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "affineopt", version, about = "Primal-dual solvers for affinely constrained smooth convex problems")]
#[command(after_help = "Any flag may also come from `--config file.json`, whose keys mirror the flag names.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a problem instance.
    #[command(subcommand)]
    Gen(GenKind),
    /// Run one method on an instance.
    #[command(args_override_self = true)]
    Solve(SolveArgs),
    /// Run several methods under a shared matvec budget.
    #[command(args_override_self = true)]
    Compare(CompareArgs),
    /// Print the spectral summary of `K^T K`.
    #[command(args_override_self = true)]
    Spectral(SpectralArgs),
}

#[derive(Subcommand, Debug)]
enum GenKind {
    /// Compressed sensing: smoothed l1 objective, Gaussian K with prescribed conditioning.
    #[command(args_override_self = true)]
    Cs(CsArgs),
    /// Random strongly convex quadratic with prescribed kappa and chi.
    #[command(args_override_self = true)]
    Quad(QuadArgs),
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Base name of the instance files.
    #[arg(long, default_value = "instance")]
    name: String,
}

#[derive(Args, Debug)]
struct SeedArg {
    #[arg(long, env = "AFFINEOPT_SEED")]
    seed: u64,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum GridArg {
    Equispaced,
    Log,
}

#[derive(Args, Debug)]
struct CsArgs {
    #[arg(long)]
    d: usize,
    #[arg(long)]
    p: usize,
    /// Number of nonzeros in the planted signal.
    #[arg(long)]
    s: usize,
    #[arg(long)]
    chi: f64,
    #[arg(long)]
    kappa: f64,
    #[arg(long, value_enum, default_value = "equispaced")]
    grid: GridArg,
    #[command(flatten)]
    seed: SeedArg,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct QuadArgs {
    #[arg(long)]
    d: usize,
    #[arg(long)]
    p: usize,
    #[arg(long)]
    kappa: f64,
    #[arg(long)]
    chi: f64,
    #[command(flatten)]
    seed: SeedArg,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct Overrides {
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Chebyshev steps per iteration (algo1).
    #[arg(long = "N", id = "n_inner")]
    n_inner: Option<usize>,
}

impl Overrides {
    fn any(&self) -> bool {
        self.tau.is_some() || self.eta.is_some() || self.theta.is_some() || self.alpha.is_some() || self.n_inner.is_some()
    }
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    method: Method,
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long, default_value_t = 10_000)]
    max_iters: usize,
    /// Stop once the KKT residual drops below this value.
    #[arg(long, default_value_t = 1e-10)]
    kkt_tol: f64,
    /// Evaluate the stopping test every this many iterations.
    #[arg(long, default_value_t = 1)]
    check_every: usize,
    /// Record the squared distance to a reference solution in the trace.
    #[arg(long)]
    oracle: bool,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct CompareArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Comma-separated list of at least two methods.
    #[arg(long, value_delimiter = ',', required = true)]
    methods: Vec<Method>,
    /// Total applications of K and K^T allowed per method.
    #[arg(long, default_value_t = 60_000)]
    budget: u64,
    #[arg(long)]
    oracle: bool,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SpectralArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
    rank_tol: f64,
}

#[derive(Serialize)]
struct GenManifest {
    kind: &'static str,
    instance: PathBuf,
    matrix: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    signal: Option<PathBuf>,
    seed: u64,
    d: usize,
    p: usize,
    kappa_target: f64,
    chi_target: f64,
    kappa: f64,
    chi: f64,
    lambda_max: f64,
    lambda_min_plus: f64,
    rank: usize,
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?).map_err(|e| Error::io(path, e))
}

fn gen_manifest(
    kind: &'static str,
    inst: &ProblemInstance,
    (json, matrix): (PathBuf, PathBuf),
    seed: u64,
    (kappa_target, chi_target): (f64, f64),
) -> Result<GenManifest> {
    let (spec, bounds) = exact_bounds(inst)?;
    Ok(GenManifest {
        kind,
        instance: json,
        matrix,
        signal: None,
        seed,
        d: inst.dim(),
        p: inst.n_constraints(),
        kappa_target,
        chi_target,
        kappa: inst.objective.kappa(),
        chi: bounds.chi(),
        lambda_max: bounds.lambda1,
        lambda_min_plus: bounds.lambda2,
        rank: spec.rank(DEFAULT_RANK_TOL),
    })
}

fn instance_paths(out: &OutputArgs) -> Result<(PathBuf, PathBuf)> {
    create_dir(&out.out)?;
    Ok((out.out.join(format!("{}.json", out.name)), out.out.join(format!("{}_K.csv", out.name))))
}

fn cmd_gen(kind: GenKind) -> Result<()> {
    match kind {
        GenKind::Cs(a) => {
            let cfg = CsConfig {
                d: a.d,
                p: a.p,
                sparsity: a.s,
                chi_target: a.chi,
                e: e_from_kappa(a.kappa)?,
                seed: a.seed.seed,
                grid: match a.grid {
                    GridArg::Equispaced => SingularGrid::Equispaced,
                    GridArg::Log => SingularGrid::Log,
                },
            };
            let (inst, x_sharp) = gen_compressed_sensing(&cfg)?;
            let paths = instance_paths(&a.output)?;
            save_instance(&inst, &paths.0, &paths.1)?;
            let signal = a.output.out.join(format!("{}_signal.json", a.output.name));
            write_json(&signal, &x_sharp)?;
            let mut manifest = gen_manifest("cs", &inst, paths, a.seed.seed, (a.kappa, a.chi))?;
            manifest.signal = Some(signal);
            print_json(&manifest)
        }
        GenKind::Quad(a) => {
            let inst = gen_random_quadratic(a.d, a.p, a.kappa, a.chi, a.seed.seed)?;
            let paths = instance_paths(&a.output)?;
            save_instance(&inst, &paths.0, &paths.1)?;
            print_json(&gen_manifest("quad", &inst, paths, a.seed.seed, (a.kappa, a.chi))?)
        }
    }
}

fn apply_overrides(config: &mut MethodConfig, o: &Overrides) -> Result<()> {
    if !o.any() {
        return Ok(());
    }
    match config {
        MethodConfig::Papc(p) => {
            if o.tau.is_some() || o.alpha.is_some() || o.n_inner.is_some() {
                return Err(Error::InvalidInput("papc accepts only --eta and --theta".into()));
            }
            p.eta = o.eta.unwrap_or(p.eta);
            p.theta = o.theta.unwrap_or(p.theta);
            p.source = ParamSource::Custom;
        }
        MethodConfig::Algo3(p) | MethodConfig::Algo1(p) => {
            if o.n_inner.is_some() && p.n_inner == 0 {
                return Err(Error::InvalidInput("--N applies to algo1 only".into()));
            }
            p.tau = o.tau.unwrap_or(p.tau);
            p.eta = o.eta.unwrap_or(p.eta);
            p.theta = o.theta.unwrap_or(p.theta);
            p.alpha = o.alpha.unwrap_or(p.alpha);
            p.n_inner = o.n_inner.unwrap_or(p.n_inner);
            p.source = ParamSource::Custom;
        }
    }
    Ok(())
}

fn load_with_spectrum(path: &Path) -> Result<(ProblemInstance, Spectrum, MethodDefaults)> {
    let inst = load_instance(path)?;
    let (spec, bounds) = exact_bounds(&inst)?;
    let defaults = MethodDefaults {
        mu: inst.objective.mu(),
        lip: inst.objective.lip(),
        bounds,
    };
    Ok((inst, spec, defaults))
}

struct MethodDefaults {
    mu: f64,
    lip: f64,
    bounds: affineopt::spectral::SpectralBounds,
}

impl MethodDefaults {
    fn config(&self, method: Method) -> Result<MethodConfig> {
        MethodConfig::prescribed(method, self.mu, self.lip, &self.bounds)
    }
}

fn oracle_for(inst: &ProblemInstance, spec: &Spectrum, enabled: bool) -> Result<Option<PrimalDualPair>> {
    if enabled {
        reference_solution(inst, spec, 1e-12, 1_000_000).map(Some)
    } else {
        Ok(None)
    }
}

fn cmd_solve(a: SolveArgs) -> Result<()> {
    let (inst, spec, defaults) = load_with_spectrum(&a.instance)?;
    let mut config = defaults.config(a.method)?;
    apply_overrides(&mut config, &a.overrides)?;
    let oracle = oracle_for(&inst, &spec, a.oracle)?;
    let mut stop = StoppingRule::new(a.max_iters, a.kkt_tol);
    stop.check_every = a.check_every;
    let options = SolveOptions {
        oracle: oracle.as_ref(),
        transformed: None,
    };
    let report = solve(&config, &inst, &vec![0.0; inst.dim()], &stop, &options)?;

    create_dir(&a.out)?;
    let trace_name = format!("{}.csv", a.method);
    report.trace.save_csv(&a.out.join(&trace_name))?;
    let final_err_sq = oracle
        .as_ref()
        .map(|star| affineopt::vecops::dist_sq(&report.state.x, &star.x_star));
    let run = MethodRun {
        config,
        iterations: report.state.k,
        trace: ConvergenceTrace::default(),
        stop_reason: report.stop_reason,
        residual: report.residual,
        counts: report.counts,
        final_err_sq,
    };
    let summary = RunSummary::from_run(&run, Some(trace_name));
    write_json(&a.out.join("summary.json"), &summary)?;
    print_json(&summary)
}

fn cmd_compare(a: CompareArgs) -> Result<()> {
    if a.methods.len() < 2 {
        return Err(Error::InvalidInput("compare needs at least two methods".into()));
    }
    let (inst, spec, defaults) = load_with_spectrum(&a.instance)?;
    let configs = a.methods.iter().map(|m| defaults.config(*m)).collect::<Result<Vec<_>>>()?;
    let oracle = oracle_for(&inst, &spec, a.oracle)?;
    let runs = run_comparison(&inst, &configs, a.budget, oracle.as_ref())?;
    let manifest = write_comparison(&a.out, serde_json::to_value(&a)?, &runs)?;
    print_json(&manifest)
}

fn cmd_spectral(a: SpectralArgs) -> Result<()> {
    let inst = load_instance(&a.instance)?;
    let spec = affineopt::spectral::eigendecompose_gram(inst.k())?;
    print_json(&summarize(&spec, a.rank_tol)?)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(kind) => cmd_gen(kind),
        Command::Solve(a) => cmd_solve(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Spectral(a) => cmd_spectral(a),
    }
}

fn main() -> ExitCode {
    let args = match config::expand_args(std::env::args_os().collect()) {
        Ok(args) => args,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::try_parse_from(args).unwrap_or_else(|e| e.exit());
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
