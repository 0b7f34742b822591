use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ptbd::experiment::{self, initial_factors, BenchPlan, Init};
use ptbd::io::{self, AnyTensor, DiskScalar};
use ptbd::parse;
use ptbd::report::{save_trace, RunSummary};
use ptbd_core::clock::StdClock;
use ptbd_core::{
    generate_problem, BlockPartition, Complex64, Field, Method, ProblemBinding, ProblemSpec, SolveStatus,
    SolverConfig, Tensor,
};
use serde::Serialize;

const DEFAULT_BLOCKS: &str = "2,2,2,2x3,3,3,3x2,2,2,2";

#[derive(Parser)]
#[command(name = "ptbd", version, about = "Principal tensor block-diagonalization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a planted test problem and write it as DTEN1.
    Generate(GenerateArgs),
    /// Solve a problem read from a DTEN1 file.
    Solve(SolveArgs),
    /// Run η and size sweeps and write CSV/JSON reports.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value = "60,55,50", value_delimiter = ',')]
    dims: Vec<usize>,
    /// Block sizes per mode, modes separated by `x`.
    #[arg(long, default_value = DEFAULT_BLOCKS)]
    blocks: BlockPartition,
    /// Noise level; `2^-7` style powers are accepted.
    #[arg(long, default_value = "2^-7", value_parser = parse::eta)]
    eta: f64,
    #[arg(long, default_value = "real")]
    field: Field,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write the problem settings and planted quantities as JSON.
    #[arg(long)]
    meta: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct SolverArgs {
    #[arg(long, default_value_t = 1e-9)]
    tol_kkt: f64,
    #[arg(long, default_value_t = 1e-12)]
    tol_obj: f64,
    /// Also require the relative objective change to fall below --tol-obj.
    #[arg(long)]
    use_obj_stop: bool,
    #[arg(long, default_value_t = 2000)]
    max_outer: usize,
    #[arg(long, default_value_t = 50)]
    max_inner: usize,
    #[arg(long, default_value_t = 0.125)]
    inner_fraction: f64,
    /// Stagnant iterations before giving up as stalled; 0 disables.
    #[arg(long, default_value_t = 10)]
    stall_window: usize,
    /// Seed of the random start.
    #[arg(long = "init-seed", default_value_t = 0)]
    init_seed: u64,
    #[arg(long, default_value = "random")]
    init: Init,
    /// Record per-step diagnostics (gains, angles, σ_min).
    #[arg(long)]
    diagnostics: bool,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            tol_obj: self.tol_obj,
            tol_kkt: self.tol_kkt,
            max_outer: self.max_outer,
            inner_fraction: self.inner_fraction,
            max_inner: self.max_inner,
            use_obj_stop: self.use_obj_stop,
            record_diagnostics: self.diagnostics,
            seed: self.init_seed,
            stall_window: self.stall_window,
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = DEFAULT_BLOCKS)]
    blocks: BlockPartition,
    #[arg(long, default_value = "npdo")]
    method: Method,
    #[command(flatten)]
    solver: SolverArgs,
    /// Per-iteration CSV trace.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// JSON run summary.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Directory for the factors, core and diagonal blocks as DTEN1 files.
    #[arg(long)]
    factors_out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodChoice {
    Npdo,
    Accnpdo,
    Both,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value = "2^-8")]
    eta_from: String,
    #[arg(long, default_value = "2^-3")]
    eta_to: String,
    /// Scale factors `s` for dims `s · base-dims`: `1..8`, `2`, or `1,2,4`.
    #[arg(long, default_value = "1")]
    sizes: String,
    #[arg(long, default_value = "60,55,50", value_delimiter = ',')]
    base_dims: Vec<usize>,
    #[arg(long, default_value = DEFAULT_BLOCKS)]
    blocks: BlockPartition,
    #[arg(long, default_value = "real")]
    field: Field,
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    /// Seed of the first repeat; repeat `r` uses `seed + r`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "both")]
    method: MethodChoice,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct GenerateMeta<'a> {
    spec: &'a ProblemSpec,
    planted_objective: f64,
    noise_norm: f64,
    tensor_norm: f64,
}

fn generate(args: GenerateArgs) -> anyhow::Result<()> {
    let spec = ProblemSpec { dims: args.dims, partition: args.blocks, eta: args.eta, field: args.field, seed: args.seed };
    let (planted, noise, norm) = match spec.field {
        Field::Real => write_instance::<f64>(&spec, &args.out)?,
        Field::Complex => write_instance::<Complex64>(&spec, &args.out)?,
    };
    if let Some(meta) = args.meta {
        let m = GenerateMeta { spec: &spec, planted_objective: planted, noise_norm: noise, tensor_norm: norm };
        fs::write(&meta, serde_json::to_string_pretty(&m)? + "\n").with_context(|| format!("writing {}", meta.display()))?;
    }
    println!("wrote {} ({} {:?}, eta {})", args.out.display(), spec.field, spec.dims, spec.eta);
    Ok(())
}

fn write_instance<S: DiskScalar>(spec: &ProblemSpec, out: &Path) -> anyhow::Result<(f64, f64, f64)> {
    let inst = generate_problem::<S>(spec)?;
    io::save_tensor(out, &inst.tensor).with_context(|| format!("writing {}", out.display()))?;
    Ok((inst.planted_objective(), inst.noise_norm, inst.tensor.frobenius_norm()))
}

fn solve(args: SolveArgs) -> anyhow::Result<SolveStatus> {
    let tensor = io::load_tensor(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    match tensor {
        AnyTensor::Real(t) => solve_typed(t, &args),
        AnyTensor::Complex(t) => solve_typed(t, &args),
    }
}

fn solve_typed<S: DiskScalar>(tensor: Tensor<S>, args: &SolveArgs) -> anyhow::Result<SolveStatus> {
    let config = args.solver.config();
    let binding = ProblemBinding::new(tensor, args.blocks.clone())?;
    let init = initial_factors::<S>(binding.dims(), &args.blocks.ranks(), args.solver.init, config.seed)?;
    let t0 = Instant::now();
    let result = args.method.solve(&binding, &init, &config, &StdClock::default())?;
    let wall = t0.elapsed().as_secs_f64();
    let summary = RunSummary::from_result(args.method, None, &config, &binding, &result, wall)?;
    if let Some(path) = &args.trace {
        save_trace(path, &result.trace).with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = &args.summary {
        summary.save(path).with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(dir) = &args.factors_out {
        write_factors(dir, &result)?;
    }
    println!(
        "{} {}: {} after {} iterations, objective {:.12e}, kkt {:.3e}, {:.2}s",
        args.method,
        args.input.display(),
        result.status,
        result.iterations(),
        result.objective(),
        result.kkt_full().unwrap_or(result.kkt_cheap()),
        wall
    );
    Ok(result.status)
}

fn write_factors<S: DiskScalar>(dir: &Path, result: &ptbd_core::SolveResult<S>) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (mode, p) in result.factors.factors().iter().enumerate() {
        io::save_matrix(dir.join(format!("factor_{mode}.dten")), p)?;
    }
    io::save_tensor(dir.join("core.dten"), &result.core)?;
    for (s, b) in result.blocks.iter().enumerate() {
        io::save_tensor(dir.join(format!("block_{s}.dten")), b)?;
    }
    Ok(())
}

fn bench(args: BenchArgs) -> anyhow::Result<()> {
    let (from, to) = (parse::power_of_two_exponent(&args.eta_from)?, parse::power_of_two_exponent(&args.eta_to)?);
    if args.repeats == 0 {
        bail!("--repeats must be positive");
    }
    let methods = match args.method {
        MethodChoice::Npdo => vec![Method::Npdo],
        MethodChoice::Accnpdo => vec![Method::AccNpdo],
        MethodChoice::Both => vec![Method::Npdo, Method::AccNpdo],
    };
    let plan = BenchPlan {
        base_dims: args.base_dims,
        partition: args.blocks,
        field: args.field,
        etas: experiment::eta_ladder(from, to),
        sizes: parse::sizes(&args.sizes)?,
        repeats: args.repeats,
        methods,
        seed: args.seed,
    };
    let threads = experiment::threads_from_env()?;
    let report = experiment::run_bench(&plan, &args.solver.config(), args.solver.init, threads, Some(&args.out))?;
    for t in &report.trends {
        let rho = t.spearman_eta_iterations.map_or("n/a".to_string(), |r| format!("{r:.3}"));
        println!("{} size {}: {} runs, spearman(eta, iterations) {rho}", t.method, t.size, t.runs);
    }
    let failed = report.rows.iter().filter(|r| r.error.is_some()).count();
    let unconverged = report.rows.iter().filter(|r| r.status.is_some_and(|s| s != SolveStatus::Converged)).count();
    println!("{} runs, {unconverged} not converged, {failed} failed; report in {}", report.rows.len(), args.out.display());
    Ok(())
}

fn exit_code(status: SolveStatus) -> ExitCode {
    ExitCode::from(match status {
        SolveStatus::Converged => 0,
        SolveStatus::MaxIter => 2,
        SolveStatus::Stalled => 3,
    })
}

fn main() -> ExitCode {
    // clap exits with 2 on usage errors, which would read as max-iter.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match cli.command {
        Command::Generate(a) => generate(a).map(|()| ExitCode::SUCCESS),
        Command::Solve(a) => solve(a).map(exit_code),
        Command::Bench(a) => bench(a).map(|()| ExitCode::SUCCESS),
    };
    outcome.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::from(1)
    })
}

