//! Experiment orchestration: η sweeps, size sweeps and paired method runs.

use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use anyhow::Context;
use ptbd_core::clock::StdClock;
use ptbd_core::random::NormalRng;
use ptbd_core::{
    generate_problem, BlockPartition, Complex64, FactorTuple, Field, IterationRecord, Method, ProblemSpec, Scalar,
    SolveStatus, SolverConfig,
};
use serde::{Deserialize, Serialize};

use crate::report::{save_trace, RunSummary};

/// Environment variable capping worker threads. Unset means one thread.
pub const THREADS_VAR: &str = "PTBD_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Init {
    /// Random orthonormal factors, seeded by [`init_seed`].
    #[default]
    Random,
    /// Leading identity columns.
    Identity,
}

impl std::str::FromStr for Init {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        match s {
            "random" => Ok(Init::Random),
            "identity" => Ok(Init::Identity),
            _ => anyhow::bail!("unknown init `{s}` (expected random or identity)"),
        }
    }
}

/// Seed of the random start for a problem drawn with `problem_seed`.
pub fn init_seed(problem_seed: u64, config_seed: u64) -> u64 {
    config_seed ^ problem_seed.wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

pub fn initial_factors<S: Scalar>(dims: &[usize], ranks: &[usize], init: Init, seed: u64) -> ptbd_core::Result<FactorTuple<S>> {
    match init {
        Init::Random => FactorTuple::random(dims, ranks, &mut NormalRng::seed_from(seed)),
        Init::Identity => Ok(FactorTuple::identity_columns(dims, ranks)),
    }
}

/// Thread cap from `PTBD_THREADS`.
pub fn threads_from_env() -> anyhow::Result<usize> {
    match std::env::var(THREADS_VAR) {
        Err(std::env::VarError::NotPresent) => Ok(1),
        Err(e) => Err(e).context(THREADS_VAR),
        Ok(v) => {
            let n: usize = v.trim().parse().with_context(|| format!("{THREADS_VAR}={v} is not a count"))?;
            anyhow::ensure!(n > 0, "{THREADS_VAR} must be positive");
            Ok(n)
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub trace: Vec<IterationRecord>,
}

/// Generates and solves one problem. Failures are recorded in the summary.
pub fn run_one(spec: &ProblemSpec, method: Method, config: &SolverConfig, init: Init) -> RunOutput {
    let out = match spec.field {
        Field::Real => run_typed::<f64>(spec, method, config, init),
        Field::Complex => run_typed::<Complex64>(spec, method, config, init),
    };
    out.unwrap_or_else(|e| RunOutput {
        summary: RunSummary::failed(method, Some(spec.clone()), config, e.to_string()),
        trace: Vec::new(),
    })
}

fn run_typed<S: Scalar>(
    spec: &ProblemSpec,
    method: Method,
    config: &SolverConfig,
    init: Init,
) -> ptbd_core::Result<RunOutput> {
    let inst = generate_problem::<S>(spec)?;
    let binding = inst.binding()?;
    let start = initial_factors(&spec.dims, &spec.partition.ranks(), init, init_seed(spec.seed, config.seed))?;
    let clock = StdClock::default();
    let t0 = Instant::now();
    let result = method.solve(&binding, &start, config, &clock)?;
    let wall = t0.elapsed().as_secs_f64();
    let mut summary = RunSummary::from_result(method, Some(spec.clone()), config, &binding, &result, wall)?;
    summary.planted_objective = Some(inst.planted_objective());
    Ok(RunOutput { summary, trace: result.trace })
}

/// Runs `jobs` on up to `threads` workers and returns results in job order.
pub fn parallel_map<T: Sync, R: Send>(jobs: &[T], threads: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    if threads <= 1 || jobs.len() <= 1 {
        return jobs.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..threads.min(jobs.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(i) else { break };
                let r = f(job);
                slots.lock().expect("no worker panicked")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("no worker panicked")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect()
}

/// Solves every spec with `method`. With `out_dir` set, each run `i` writes
/// `run_<i>_<method>.csv` and `run_<i>_<method>.json` there.
pub fn run_experiment(
    specs: &[ProblemSpec],
    method: Method,
    config: &SolverConfig,
    init: Init,
    threads: usize,
    out_dir: Option<&Path>,
) -> anyhow::Result<Vec<RunOutput>> {
    config.validate()?;
    let runs = parallel_map(specs, threads, |spec| run_one(spec, method, config, init));
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for (i, run) in runs.iter().enumerate() {
            let stem = format!("run_{i:04}_{method}");
            save_trace(dir.join(format!("{stem}.csv")), &run.trace)?;
            run.summary.save(dir.join(format!("{stem}.json")))?;
        }
    }
    Ok(runs)
}

/// Specs for an η sweep. With `shared_base` every η reuses the draws of
/// `seed`; otherwise η number `i` uses seed `seed + i`.
pub fn eta_sweep(
    dims: &[usize],
    partition: &BlockPartition,
    field: Field,
    etas: &[f64],
    seed: u64,
    shared_base: bool,
) -> Vec<ProblemSpec> {
    etas.iter()
        .enumerate()
        .map(|(i, &eta)| ProblemSpec {
            dims: dims.to_vec(),
            partition: partition.clone(),
            eta,
            field,
            seed: if shared_base { seed } else { seed.wrapping_add(i as u64) },
        })
        .collect()
}

/// `2^from, 2^(from+1), ..., 2^to` for integer exponents.
pub fn eta_ladder(from_exp: i32, to_exp: i32) -> Vec<f64> {
    let (lo, hi) = (from_exp.min(to_exp), from_exp.max(to_exp));
    (lo..=hi).map(|e| 2f64.powi(e)).collect()
}

/// Ranks with ties averaged.
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let j = (i..idx.len()).take_while(|&j| v[idx[j]] == v[idx[i]]).last().unwrap_or(i);
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation. `None` for fewer than two points or a
/// constant input.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    (vx > 0.0 && vy > 0.0).then(|| cov / (vx * vy).sqrt())
}

#[derive(Debug, Clone)]
pub struct BenchPlan {
    pub base_dims: Vec<usize>,
    pub partition: BlockPartition,
    pub field: Field,
    pub etas: Vec<f64>,
    /// Scale factors `s`; the dimensions are `s · base_dims`.
    pub sizes: Vec<usize>,
    pub repeats: usize,
    pub methods: Vec<Method>,
    pub seed: u64,
}

impl BenchPlan {
    /// One spec per (size, repeat, η); repeat `r` draws from seed `seed + r`
    /// and shares it across η.
    pub fn specs(&self) -> Vec<(usize, ProblemSpec)> {
        let mut out = Vec::new();
        for &s in &self.sizes {
            let dims: Vec<usize> = self.base_dims.iter().map(|&n| n * s).collect();
            for r in 0..self.repeats {
                let seed = self.seed.wrapping_add(r as u64);
                for spec in eta_sweep(&dims, &self.partition, self.field, &self.etas, seed, true) {
                    out.push((s, spec));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub method: Method,
    pub size: usize,
    pub eta: f64,
    pub seed: u64,
    pub status: Option<SolveStatus>,
    pub iterations: usize,
    pub wall_seconds: f64,
    pub objective: Option<f64>,
    pub kkt_cheap: Option<f64>,
    pub kkt_full: Option<f64>,
    pub reconstruction_error: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupRow {
    pub size: usize,
    pub eta: f64,
    pub seed: u64,
    pub npdo_iterations: usize,
    pub accnpdo_iterations: usize,
    pub npdo_seconds: f64,
    pub accnpdo_seconds: f64,
    /// `npdo_seconds / accnpdo_seconds`.
    pub speedup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendRow {
    pub method: Method,
    pub size: usize,
    pub runs: usize,
    /// Spearman correlation of η against the iteration count.
    pub spearman_eta_iterations: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub speedups: Vec<SpeedupRow>,
    pub trends: Vec<TrendRow>,
}

/// Runs every method on every spec of `plan`. With `out_dir` set, writes
/// `runs.csv`, `trend.csv`, `speedup.csv` (both methods only) and the
/// per-run traces and summaries under `runs/<method>/`.
pub fn run_bench(
    plan: &BenchPlan,
    config: &SolverConfig,
    init: Init,
    threads: usize,
    out_dir: Option<&Path>,
) -> anyhow::Result<BenchReport> {
    let jobs = plan.specs();
    let specs: Vec<ProblemSpec> = jobs.iter().map(|(_, s)| s.clone()).collect();
    let mut report = BenchReport::default();
    let mut per_method = Vec::new();
    for &method in &plan.methods {
        let dir = out_dir.map(|d| d.join("runs").join(method.to_string()));
        let runs = run_experiment(&specs, method, config, init, threads, dir.as_deref())?;
        for ((size, spec), run) in jobs.iter().zip(&runs) {
            let s = &run.summary;
            report.rows.push(BenchRow {
                method,
                size: *size,
                eta: spec.eta,
                seed: spec.seed,
                status: s.status,
                iterations: s.iterations,
                wall_seconds: s.wall_seconds,
                objective: s.objective,
                kkt_cheap: s.kkt_cheap,
                kkt_full: s.kkt_full,
                reconstruction_error: s.reconstruction_error,
                error: s.error.clone(),
            });
        }
        for &size in &plan.sizes {
            let (eta, its): (Vec<f64>, Vec<f64>) = jobs
                .iter()
                .zip(&runs)
                .filter(|((s, _), run)| *s == size && run.summary.error.is_none())
                .map(|((_, spec), run)| (spec.eta, run.summary.iterations as f64))
                .unzip();
            report.trends.push(TrendRow { method, size, runs: eta.len(), spearman_eta_iterations: spearman(&eta, &its) });
        }
        per_method.push((method, runs));
    }
    let find = |m: Method| per_method.iter().find(|(x, _)| *x == m).map(|(_, r)| r);
    if let (Some(plain), Some(acc)) = (find(Method::Npdo), find(Method::AccNpdo)) {
        for (((size, spec), a), b) in jobs.iter().zip(plain).zip(acc) {
            if a.summary.error.is_some() || b.summary.error.is_some() {
                continue;
            }
            report.speedups.push(SpeedupRow {
                size: *size,
                eta: spec.eta,
                seed: spec.seed,
                npdo_iterations: a.summary.iterations,
                accnpdo_iterations: b.summary.iterations,
                npdo_seconds: a.summary.wall_seconds,
                accnpdo_seconds: b.summary.wall_seconds,
                speedup: a.summary.wall_seconds / b.summary.wall_seconds,
            });
        }
    }
    if let Some(dir) = out_dir {
        write_rows(&dir.join("runs.csv"), &report.rows)?;
        write_rows(&dir.join("trend.csv"), &report.trends)?;
        if !report.speedups.is_empty() {
            write_rows(&dir.join("speedup.csv"), &report.speedups)?;
        }
    }
    Ok(report)
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spearman_cases() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]), Some(1.0));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 1.0, 0.0]), Some(-1.0));
        assert_eq!(spearman(&[1.0, 1.0], &[1.0, 2.0]), None);
        assert_eq!(spearman(&[1.0], &[1.0]), None);
        // Ties get averaged ranks: x ranks (1, 2.5, 2.5, 4).
        let rho = spearman(&[1.0, 2.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((rho - 0.9486832980505138).abs() < 1e-12);
    }

    #[test]
    fn parallel_map_keeps_order() {
        let jobs: Vec<u64> = (0..37).collect();
        let seq = parallel_map(&jobs, 1, |x| x * x);
        let par = parallel_map(&jobs, 4, |x| x * x);
        assert_eq!(seq, par);
    }

    #[test]
    fn ladder_and_sweep() {
        assert_eq!(eta_ladder(-3, -5), vec![0.03125, 0.0625, 0.125]);
        let part: BlockPartition = "1x1x1".parse().unwrap();
        let shared = eta_sweep(&[3, 3, 3], &part, Field::Real, &[0.1, 0.2], 7, true);
        assert!(shared.iter().all(|s| s.seed == 7));
        let fresh = eta_sweep(&[3, 3, 3], &part, Field::Real, &[0.1, 0.2], 7, false);
        assert_eq!(fresh[1].seed, 8);
    }

    #[test]
    fn init_parsing() {
        assert_eq!("identity".parse::<Init>().unwrap(), Init::Identity);
        assert!("zeros".parse::<Init>().is_err());
    }
}
