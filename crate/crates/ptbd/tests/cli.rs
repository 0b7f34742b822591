use std::path::Path;
use std::process::{Command, Output};

use ptbd::io::{load_matrix, load_tensor};
use ptbd::report::{load_trace, RunSummary, TRACE_COLUMNS};

fn ptbd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ptbd")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

const BLOCKS: &str = "2,2x2,2x1,2";

#[test]
fn generate_then_solve() {
    let dir = tempfile::tempdir().unwrap();
    let prob = dir.path().join("prob.dten");
    let meta = dir.path().join("meta.json");
    let out = ptbd(&[
        "generate", "--dims", "12,10,9", "--blocks", BLOCKS, "--eta", "2^-7", "--seed", "42", "--out", path(&prob),
        "--meta", path(&meta),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(load_tensor(&prob).unwrap().dims(), &[12, 10, 9]);
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&meta).unwrap()).unwrap();
    assert_eq!(meta["spec"]["eta"], 0.0078125);
    assert_eq!(meta["spec"]["partition"], BLOCKS);

    let trace = dir.path().join("trace.csv");
    let summary = dir.path().join("run.json");
    let factors = dir.path().join("factors");
    let out = ptbd(&[
        "solve", "--input", path(&prob), "--blocks", BLOCKS, "--method", "accnpdo", "--tol-kkt", "1e-9",
        "--trace", path(&trace), "--summary", path(&summary), "--factors-out", path(&factors),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = RunSummary::load(&summary).unwrap();
    assert_eq!(load_trace(&trace).unwrap().len(), s.iterations);
    let header = std::fs::read_to_string(&trace).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header, TRACE_COLUMNS.join(","));
    assert!(s.kkt_full.unwrap() <= 1e-9);
    let p0 = load_matrix::<f64>(factors.join("factor_0.dten")).unwrap();
    assert_eq!(p0.shape(), (12, 4));
    assert!(factors.join("core.dten").is_file() && factors.join("block_1.dten").is_file());
}

#[test]
fn exit_codes_follow_the_status() {
    let dir = tempfile::tempdir().unwrap();
    let prob = dir.path().join("p.dten");
    assert!(ptbd(&["generate", "--dims", "10,9,8", "--blocks", BLOCKS, "--eta", "0.125", "--field", "complex", "--out", path(&prob)])
        .status
        .success());
    let capped = ptbd(&["solve", "--input", path(&prob), "--blocks", BLOCKS, "--max-outer", "2"]);
    assert_eq!(capped.status.code(), Some(2));
    let missing = ptbd(&["solve", "--input", path(&dir.path().join("nope.dten")), "--blocks", BLOCKS]);
    assert_eq!(missing.status.code(), Some(1));
    let misfit = ptbd(&["solve", "--input", path(&prob), "--blocks", "9,9x1x1"]);
    assert_eq!(misfit.status.code(), Some(1));
    assert_eq!(ptbd(&["solve", "--bogus"]).status.code(), Some(1));
    assert_eq!(ptbd(&["--help"]).status.code(), Some(0));
    std::fs::write(&prob, b"DTEN1 r 3 2 2 2\n\0\0").unwrap();
    let corrupt = ptbd(&["solve", "--input", path(&prob), "--blocks", "1x1x1"]);
    assert_eq!(corrupt.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&corrupt.stderr).contains("truncated"));
}

#[test]
fn bench_runs_a_small_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let out = ptbd(&[
        "bench", "--eta-from", "2^-5", "--eta-to", "2^-4", "--sizes", "1", "--base-dims", "8,8,7", "--blocks", BLOCKS,
        "--repeats", "1", "--method", "both", "--out", path(dir.path()),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let runs = std::fs::read_to_string(dir.path().join("runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 5);
    assert!(dir.path().join("speedup.csv").is_file());
}
