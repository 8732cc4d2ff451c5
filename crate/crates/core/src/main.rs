use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use ddtruss::datagen::GenConfig;
use ddtruss::harness::{run_equilibrium_path, run_monte_carlo, LoadCase, Method, MonteCarloConfig, PathConfig};
use ddtruss::ko16::{ko16_solve, Ko16Config};
use ddtruss::material::MaterialDataSet;
use ddtruss::regression::{least_squares_fit, HuberConfig};
use ddtruss::solver::{dd_solve, FitMethod, SolveStatus, SolverConfig};
use ddtruss::truss::TrussModel;

/// Data-driven equilibrium analysis of trusses from raw stress-strain data.
///
/// All files use SI units: coordinates in m, areas in m^2 (200 mm^2 = 2.0e-4),
/// loads in N, stresses in Pa.
#[derive(Parser)]
#[command(name = "ddtruss", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one load case and print the state as JSON.
    Solve(SolveArgs),
    /// Trace an equilibrium path and print `lambda,probe_disp,status,iterations`.
    Path(PathArgs),
    /// Replicate paths over generated data sets and print per-step statistics.
    Montecarlo(MonteCarloArgs),
    /// Generate a synthetic material data set.
    GenData(GenDataArgs),
}

#[derive(Args, Clone)]
struct MethodArgs {
    /// Neighborhood size.
    #[arg(long, default_value_t = 15)]
    k: usize,
    /// Huber threshold multiplier (threshold = tune * robust residual scale).
    #[arg(long, default_value_t = 1e-3)]
    tune: f64,
    #[arg(long, default_value_t = 50)]
    max_iter: usize,
    /// Metric constant for the ko16 baseline, Pa [default: |global least-squares slope| of the data].
    #[arg(long = "c-e")]
    c_e: Option<f64>,
}

impl MethodArgs {
    fn solver(&self) -> SolverConfig {
        SolverConfig {
            k: self.k,
            huber: HuberConfig::with_tune(self.tune),
            max_iter: self.max_iter,
            ..SolverConfig::default()
        }
    }

    fn ko16(&self, data: Option<&MaterialDataSet>) -> Result<Ko16Config> {
        let c_e = match (self.c_e, data) {
            (Some(c), _) => c,
            (None, Some(data)) => least_squares_fit(data.points())
                .context("cannot derive --c-e from the data; pass it explicitly")?
                .w
                .abs(),
            (None, None) => bail!("--c-e is required for the ko16 method here"),
        };
        Ok(Ko16Config { c_e, max_iter: self.max_iter.max(100) })
    }
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    load: PathBuf,
    /// Load multiplier [default: the last multiplier in the load file].
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value = "robust")]
    method: Method,
    #[command(flatten)]
    opts: MethodArgs,
}

#[derive(Args)]
struct PathArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    load: PathBuf,
    /// Free dof whose displacement is reported.
    #[arg(long)]
    probe: usize,
    #[arg(long, default_value = "robust")]
    method: Method,
    /// Start every step from the configured initialization instead of the previous step.
    #[arg(long)]
    cold: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    opts: MethodArgs,
}

#[derive(Args)]
struct MonteCarloArgs {
    #[arg(long)]
    model: PathBuf,
    /// Generator JSON (`{"family":"sigmoid", ...}` or `{"family":"linear", ...}`).
    #[arg(long)]
    gen: PathBuf,
    #[arg(long)]
    load: PathBuf,
    #[arg(long, default_value_t = 100)]
    n_sets: usize,
    /// Comma-separated subset of robust, lsq, ko16.
    #[arg(long, default_value = "robust,lsq")]
    methods: String,
    #[arg(long)]
    probe: usize,
    /// Master seed; replicate r draws from stream r.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads [default: all cores]. Output does not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    opts: MethodArgs,
}

#[derive(Args)]
struct GenDataArgs {
    #[arg(long)]
    gen: PathBuf,
    /// Overrides the seed in the generator file.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct StateOutput {
    status: SolveStatus,
    iterations: usize,
    u: Vec<f64>,
    eps: Vec<f64>,
    sig: Vec<f64>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(stdout.flush()?)
        }
    }
}

fn load_inputs(model: &Path, load: &Path) -> Result<(TrussModel, LoadCase)> {
    let model = TrussModel::from_json(&read(model)?).with_context(|| format!("loading model {}", model.display()))?;
    let load = LoadCase::from_json(&read(load)?).with_context(|| format!("loading load case {}", load.display()))?;
    load.validate(model.dof_count())?;
    Ok((model, load))
}

fn load_data(path: &Path) -> Result<MaterialDataSet> {
    MaterialDataSet::from_csv(&read(path)?).with_context(|| format!("loading data {}", path.display()))
}

/// Returns whether every solve converged.
fn solve(args: SolveArgs) -> Result<bool> {
    let (model, load) = load_inputs(&args.model, &args.load)?;
    let data = load_data(&args.data)?;
    let lambda = args.lambda.unwrap_or(*load.multipliers.last().expect("validated nonempty"));
    let p = load.load(lambda);
    let sol = match args.method {
        Method::Ko16 => ko16_solve(&model, &data, &p, &args.opts.ko16(Some(&data))?)?,
        Method::Robust | Method::LeastSquares => {
            let method = if args.method == Method::Robust { FitMethod::Robust } else { FitMethod::LeastSquares };
            dd_solve(&model, &data, &p, &SolverConfig { method, ..args.opts.solver() })?
        }
    };
    let state = sol.state.unwrap_or_else(|| ddtruss::EquilibriumState { u: vec![], eps: vec![], sig: vec![], laws: vec![] });
    let out = StateOutput { status: sol.report.status, iterations: sol.report.iterations, u: state.u, eps: state.eps, sig: state.sig };
    emit(None, &(serde_json::to_string_pretty(&out)? + "\n"))?;
    Ok(sol.report.status == SolveStatus::Converged)
}

fn path(args: PathArgs) -> Result<bool> {
    let (model, load) = load_inputs(&args.model, &args.load)?;
    let data = load_data(&args.data)?;
    let ko16 = if args.method == Method::Ko16 { args.opts.ko16(Some(&data))? } else { Ko16Config::new(1.0) };
    let cfg = PathConfig { warm_start: !args.cold, ..PathConfig::new(args.opts.solver(), ko16) };
    let result = run_equilibrium_path(&model, &data, &load, args.probe, &cfg, args.method)?;
    emit(args.out.as_deref(), &result.to_csv())?;
    Ok(result.all_converged())
}

fn montecarlo(args: MonteCarloArgs) -> Result<bool> {
    let (model, load) = load_inputs(&args.model, &args.load)?;
    let gen = GenConfig::from_json(&read(&args.gen)?).with_context(|| format!("loading generator {}", args.gen.display()))?;
    let methods = Method::parse_list(&args.methods)?;
    if methods.is_empty() {
        bail!("--methods must name at least one method");
    }
    let ko16 = if methods.contains(&Method::Ko16) { args.opts.ko16(None)? } else { Ko16Config::new(1.0) };
    let cfg = MonteCarloConfig {
        n_sets: args.n_sets,
        seed: args.seed,
        methods,
        path: PathConfig::new(args.opts.solver(), ko16),
        shared_stream: false,
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(threads) = args.threads {
        pool = pool.num_threads(threads);
    }
    let pool = pool.build()?;
    let run = pool.install(|| run_monte_carlo(&model, &gen, &load, args.probe, &cfg))?;
    emit(args.out.as_deref(), &run.stats.to_csv())?;
    Ok(run.stats.rows.iter().all(|r| r.failures == 0))
}

fn gen_data(args: GenDataArgs) -> Result<bool> {
    let gen = GenConfig::from_json(&read(&args.gen)?).with_context(|| format!("loading generator {}", args.gen.display()))?;
    let gen = match args.seed {
        Some(seed) => gen.with_seed(seed),
        None => gen,
    };
    let data = gen.generate(0)?;
    emit(args.out.as_deref(), &data.to_csv())?;
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match cli.command {
        Command::Solve(a) => solve(a),
        Command::Path(a) => path(a),
        Command::Montecarlo(a) => montecarlo(a),
        Command::GenData(a) => gen_data(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
