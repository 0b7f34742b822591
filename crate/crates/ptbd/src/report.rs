//! Per-iteration CSV traces and per-run JSON summaries.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ptbd_core::blocks::reconstruct;
use ptbd_core::{IterationRecord, Method, ProblemBinding, ProblemSpec, Scalar, SolveResult, SolveStatus, SolverConfig};
use serde::{Deserialize, Serialize};

/// Column order of trace files.
pub const TRACE_COLUMNS: [&str; 6] = ["iter", "objective", "kkt_cheap", "kkt_full", "elapsed_seconds", "inner_iters"];

/// One CSV row. Absent optional values are written as empty fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub objective: f64,
    pub kkt_cheap: f64,
    pub kkt_full: Option<f64>,
    pub elapsed_seconds: f64,
    pub inner_iters: Option<usize>,
}

impl From<&IterationRecord> for TraceRow {
    fn from(r: &IterationRecord) -> Self {
        TraceRow {
            iter: r.outer_index,
            objective: r.objective,
            kkt_cheap: r.kkt_cheap,
            kkt_full: r.kkt_full,
            elapsed_seconds: r.elapsed_seconds,
            inner_iters: r.inner_iterations,
        }
    }
}

pub fn write_trace(w: impl Write, trace: &[IterationRecord]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    if trace.is_empty() {
        out.write_record(TRACE_COLUMNS)?;
    }
    for r in trace {
        out.serialize(TraceRow::from(r))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_trace(r: impl Read) -> csv::Result<Vec<TraceRow>> {
    csv::Reader::from_reader(r).deserialize().collect()
}

pub fn save_trace(path: impl AsRef<Path>, trace: &[IterationRecord]) -> anyhow::Result<()> {
    write_trace(BufWriter::new(File::create(path)?), trace)?;
    Ok(())
}

pub fn load_trace(path: impl AsRef<Path>) -> anyhow::Result<Vec<TraceRow>> {
    Ok(read_trace(BufReader::new(File::open(path)?))?)
}

/// Final metrics of one solve. `error` is set, and the metrics are absent,
/// when the run failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub method: Method,
    pub spec: Option<ProblemSpec>,
    pub config: SolverConfig,
    pub status: Option<SolveStatus>,
    pub iterations: usize,
    pub objective: Option<f64>,
    pub kkt_cheap: Option<f64>,
    pub kkt_full: Option<f64>,
    pub wall_seconds: f64,
    /// `|B - reconstruct|_F / |B|_F`.
    pub reconstruction_error: Option<f64>,
    /// `Σ_s |T_sss|_F^2` for generated problems.
    pub planted_objective: Option<f64>,
    pub error: Option<String>,
}

impl RunSummary {
    pub fn from_result<S: Scalar>(
        method: Method,
        spec: Option<ProblemSpec>,
        config: &SolverConfig,
        binding: &ProblemBinding<S>,
        result: &SolveResult<S>,
        wall_seconds: f64,
    ) -> ptbd_core::Result<Self> {
        let back = reconstruct(&result.blocks, &result.factors, binding.partition())?;
        let norm = binding.norm();
        let diff = back.sub(binding.tensor())?.frobenius_norm();
        Ok(RunSummary {
            method,
            spec,
            config: config.clone(),
            status: Some(result.status),
            iterations: result.iterations(),
            objective: Some(result.objective()),
            kkt_cheap: Some(result.kkt_cheap()),
            kkt_full: result.kkt_full(),
            wall_seconds,
            reconstruction_error: Some(if norm > 0.0 { diff / norm } else { 0.0 }),
            planted_objective: None,
            error: None,
        })
    }

    pub fn failed(method: Method, spec: Option<ProblemSpec>, config: &SolverConfig, error: String) -> Self {
        RunSummary {
            method,
            spec,
            config: config.clone(),
            status: None,
            iterations: 0,
            objective: None,
            kkt_cheap: None,
            kkt_full: None,
            wall_seconds: 0.0,
            reconstruction_error: None,
            planted_objective: None,
            error: Some(error),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> anyhow::Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> anyhow::Result<Self> {
        Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
    }
}
