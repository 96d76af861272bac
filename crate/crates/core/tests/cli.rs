use std::fs;
use std::path::Path;
use std::process::Command;

use cubemu::cli::{run, EXIT_DOMAIN, EXIT_FAILURE, EXIT_OK, EXIT_USAGE};
use cubemu::sgcm::{self, AnyMatrix};
use cubemu::Matrix;

struct Outcome {
    code: i32,
    stdout: String,
    stderr: String,
}

fn cubemu(args: &[&str]) -> Outcome {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("cubemu").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    Outcome { code, stdout: String::from_utf8(out).unwrap(), stderr: String::from_utf8(err).unwrap() }
}

fn names(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    v.sort();
    v
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn split_identity_has_zero_residual_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("eye.sgcm");
    sgcm::save(&input, &AnyMatrix::F32(Matrix::identity(5).unwrap())).unwrap();
    let prefix = dir.path().join("eye");
    let first = cubemu(&["split", "--input", p(&input), "--sb", "12", "--output", p(&prefix)]);
    assert_eq!(first.code, EXIT_OK, "{}", first.stderr);
    assert!(first.stdout.contains("zero_residuals,25"));
    let low = sgcm::load(&dir.path().join("eye.low.sgcm")).unwrap();
    let AnyMatrix::F16(low) = low else { panic!("low part must be half precision") };
    assert!(low.as_slice().iter().all(|h| h.to_bits() == 0));
    let high_bytes = fs::read(dir.path().join("eye.high.sgcm")).unwrap();

    let again = cubemu(&["split", "--input", p(&input), "--sb", "12", "--output", p(&prefix)]);
    assert_eq!(again.code, EXIT_OK);
    assert_eq!(again.stdout, first.stdout);
    assert_eq!(fs::read(dir.path().join("eye.high.sgcm")).unwrap(), high_bytes);
}

#[test]
fn split_rejects_tiny_value_with_position_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("tiny.sgcm");
    let mut m = Matrix::filled(3, 4, 1.0f32).unwrap();
    m.set(2, 1, 1e-9);
    sgcm::save(&input, &AnyMatrix::F32(m)).unwrap();
    let out = cubemu(&["split", "--input", p(&input), "--output", p(&dir.path().join("t"))]);
    assert_eq!(out.code, EXIT_DOMAIN);
    assert!(out.stderr.contains("(2, 1)"), "{}", out.stderr);
    assert_eq!(names(dir.path()), vec!["tiny.sgcm"]);
}

#[test]
fn missing_input_is_an_io_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = cubemu(&["split", "--input", p(&dir.path().join("nope.sgcm")), "--output", p(&dir.path().join("x"))]);
    assert_eq!(out.code, EXIT_FAILURE);
    assert!(names(dir.path()).is_empty());
}

#[test]
fn corrupt_input_reports_offset() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.sgcm");
    fs::write(&input, b"SGCX0000").unwrap();
    let out = cubemu(&["split", "--input", p(&input), "--output", p(&dir.path().join("x"))]);
    assert_eq!(out.code, EXIT_DOMAIN);
    assert!(out.stderr.contains("offset"), "{}", out.stderr);
}

#[test]
fn oracle_only_reports_zero_error() {
    let out = cubemu(&["gemm", "--m", "8", "--k", "8", "--n", "8", "--methods", "oracle"]);
    assert_eq!(out.code, EXIT_OK, "{}", out.stderr);
    let lines: Vec<&str> = out.stdout.lines().collect();
    assert_eq!(lines[0], "method,m,k,n,e_offset,signed,sb,seed,err");
    assert_eq!(lines[1], "oracle_f64,8,8,8,0,true,,1,0e0");
}

#[test]
fn gemm_sweep_is_ordered_and_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    let args = [
        "gemm", "--m", "16", "--k", "32", "--n", "16", "--e-offset", "-3:-1", "--seeds", "1,2", "--nonneg", "--output",
        p(&csv),
    ];
    assert_eq!(cubemu(&args).code, EXIT_OK);
    let first = fs::read(&csv).unwrap();
    assert_eq!(cubemu(&args).code, EXIT_OK);
    assert_eq!(fs::read(&csv).unwrap(), first);

    let text = String::from_utf8(first).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3 * 2 * 4);
    let keys: Vec<(i32, u64)> = rows.iter().map(|r| (r[4].parse().unwrap(), r[7].parse().unwrap())).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    assert!(rows.iter().all(|r| r[5] == "false"));
}

#[test]
fn gemm_from_files_matches_methods() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.sgcm"), dir.path().join("b.sgcm"));
    sgcm::save(&a, &AnyMatrix::F32(Matrix::from_fn(4, 3, |i, j| (i + 2 * j) as f32 * 0.25).unwrap())).unwrap();
    sgcm::save(&b, &AnyMatrix::F32(Matrix::from_fn(3, 2, |i, j| 1.0 + (i * j) as f32).unwrap())).unwrap();
    let out = cubemu(&["gemm", "--a", p(&a), "--b", p(&b), "--methods", "cube_termwise,f32_reference"]);
    assert_eq!(out.code, EXIT_OK, "{}", out.stderr);
    // small integers times quarters are exact in every method
    assert!(out.stdout.contains("cube_termwise,4,3,2,,,12,,0e0"), "{}", out.stdout);
    assert!(out.stdout.contains("f32_reference,4,3,2,,,,,0e0"));
}

#[test]
fn bad_flags_exit_with_usage_and_leave_no_files() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("out.csv");
    let out = cubemu(&["gemm", "--methods", "quantum", "--output", p(&csv)]);
    assert_eq!(out.code, EXIT_USAGE);
    assert!(out.stderr.contains("Usage"), "{}", out.stderr);
    let out = cubemu(&["gemm", "--e-offset", "5:1", "--output", p(&csv)]);
    assert_eq!(out.code, EXIT_DOMAIN);
    let out = cubemu(&["gemm", "--e-offset", "300", "--output", p(&csv)]);
    assert_eq!(out.code, EXIT_DOMAIN);
    assert!(names(dir.path()).is_empty());
}

#[test]
fn errmodel_curve_columns() {
    let out = cubemu(&["errmodel", "--e-min", "-2", "--e-max", "0", "--sb", "0,12", "--mc-samples", "10000"]);
    assert_eq!(out.code, EXIT_OK, "{}", out.stderr);
    let lines: Vec<&str> = out.stdout.lines().collect();
    assert_eq!(lines[0], "e_offset,p_underflow,p_underflow_gradual,bits_sb0,bits_sb12,mc_p_underflow,mc_p_underflow_gradual");
    assert_eq!(lines.len(), 4);
    assert!(lines[3].starts_with("0,0,0.1248779296875,22,22,"));
}

#[test]
fn plan_searches_or_evaluates() {
    let out = cubemu(&["plan", "--m", "1024", "--k", "1024", "--n", "1024", "--block", "176,64,176"]);
    assert_eq!(out.code, EXIT_OK, "{}", out.stderr);
    assert!(out.stdout.lines().nth(1).unwrap().starts_with("176,64,176,21,"));
    assert!(out.stderr.contains("96"));
    let out = cubemu(&["plan", "--m", "1024", "--k", "1024", "--n", "1024", "--block", "176,64,176", "--n-fused", "44"]);
    assert_eq!(out.code, EXIT_DOMAIN);
    let out = cubemu(&["plan", "--m", "1024", "--k", "1024", "--n", "1024", "--block", "24,64,176"]);
    assert_eq!(out.code, EXIT_DOMAIN);
}

#[test]
fn hardware_file_overrides_and_rejects_unknown_fields() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("hw.json");
    fs::write(&good, r#"{"l1_bytes": 1048576}"#).unwrap();
    let out = cubemu(&["plan", "--hw", p(&good), "--m", "512", "--k", "512", "--n", "512", "--block", "176,64,176", "--n-fused", "44"]);
    assert_eq!(out.code, EXIT_OK, "{}", out.stderr);
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"l1_size": 1}"#).unwrap();
    let out = cubemu(&["plan", "--hw", p(&bad), "--m", "512", "--k", "512", "--n", "512"]);
    assert_eq!(out.code, EXIT_DOMAIN);
}

#[test]
fn pipesim_writes_summary_and_trace_together() {
    let dir = tempfile::tempdir().unwrap();
    let (summary, trace) = (dir.path().join("sum.csv"), dir.path().join("trace.csv"));
    let out = cubemu(&[
        "pipesim", "--m", "256", "--k", "256", "--n", "256", "--block", "64,64,64", "--trace", p(&trace), "--output",
        p(&summary),
    ]);
    assert_eq!(out.code, EXIT_OK, "{}", out.stderr);
    assert!(out.stderr.contains("speedup"));
    let s = fs::read_to_string(&summary).unwrap();
    assert!(s.starts_with("mode,total_s,cube_busy_s,utilization,effective_tflops\nsingle,"));
    assert!(s.contains("\ndouble,"));
    let t = fs::read_to_string(&trace).unwrap();
    assert!(t.starts_with("mode,stage,block_id,start_s,end_s\n"));
    assert!(t.lines().any(|l| l.starts_with("double,cube,")));
    assert_eq!(names(dir.path()), vec!["sum.csv", "trace.csv"]);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_cubemu");
    let status = Command::new(bin).args(["plan", "--m", "4", "--k", "4", "--n", "4"]).output().unwrap();
    assert_eq!(status.status.code(), Some(EXIT_DOMAIN));
    let status = Command::new(bin).arg("--frobnicate").output().unwrap();
    assert_eq!(status.status.code(), Some(EXIT_USAGE));
    let status = Command::new(bin).arg("--help").output().unwrap();
    assert_eq!(status.status.code(), Some(EXIT_OK));
    assert!(String::from_utf8_lossy(&status.stdout).contains("pipesim"));
}
