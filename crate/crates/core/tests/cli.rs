use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use picardo::bench::{read_matrix_csv, read_trace_csv};

fn picardo(args: &[&str], paths: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_picardo"));
    cmd.args(args);
    for (flag, path) in paths {
        cmd.arg(flag).arg(path);
    }
    cmd.output().unwrap()
}

#[test]
fn gen_then_run_both_algorithms() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("x.csv");
    let gen = picardo(
        &[
            "gen",
            "--n",
            "3",
            "--t",
            "3000",
            "--uniform",
            "1",
            "--laplace",
            "2",
            "--seed",
            "4",
        ],
        &[("--out", &data)],
    );
    assert!(gen.status.success());
    assert_eq!(read_matrix_csv(&data).unwrap().n_channels(), 3);

    for algo in ["picardo", "fastica"] {
        let trace = dir.path().join(format!("{algo}.csv"));
        let out = dir.path().join(format!("{algo}-y.csv"));
        let run = picardo(
            &["run", "--algo", algo, "--score", "tanh", "--seed", "4"],
            &[("--input", &data), ("--trace", &trace), ("--output", &out)],
        );
        assert!(
            run.status.success(),
            "{}",
            String::from_utf8_lossy(&run.stderr)
        );
        let rows = read_trace_csv(&trace).unwrap();
        assert!(rows.iter().all(|r| r.algorithm == algo && r.seed == 4));
        assert!(rows.last().unwrap().grad_norm < 1e-8);
        let y = read_matrix_csv(&out).unwrap();
        assert!(y.whiteness_error() < 1e-8);
    }
}

#[test]
fn other_scores_and_literal_rho() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("x.bin");
    assert!(picardo(
        &[
            "gen",
            "--n",
            "2",
            "--t",
            "2000",
            "--laplace",
            "2",
            "--seed",
            "1"
        ],
        &[("--out", &data)]
    )
    .status
    .success());
    for score in ["cube", "exp_quad"] {
        let run = picardo(
            &["run", "--score", score, "--max-iter", "50", "--rho-literal"],
            &[("--input", &data)],
        );
        assert!(
            run.status.success(),
            "{score}: {}",
            String::from_utf8_lossy(&run.stderr)
        );
    }
}

#[test]
fn bench_writes_records_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("records.csv");
    let svg = dir.path().join("curves.svg");
    let bench = picardo(
        &[
            "bench",
            "--preset",
            "synthetic-small",
            "--n",
            "4",
            "--t",
            "2000",
            "--repeats",
            "2",
            "--seed",
            "3",
        ],
        &[("--out", &out), ("--svg", &svg)],
    );
    assert!(
        bench.status.success(),
        "{}",
        String::from_utf8_lossy(&bench.stderr)
    );
    let rows = read_trace_csv(&out).unwrap();
    assert!(rows.iter().any(|r| r.algorithm == "fastica"));
    assert!(rows.iter().any(|r| r.algorithm == "picardo" && r.seed == 4));
    roxmltree::Document::parse(&fs::read_to_string(&svg).unwrap()).unwrap();
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let usage = picardo(&["run", "--algo", "nope"], &[]);
    assert_eq!(usage.status.code(), Some(2));
    let usage = picardo(&["frobnicate"], &[]);
    assert_eq!(usage.status.code(), Some(2));

    let ragged = dir.path().join("ragged.csv");
    fs::write(&ragged, "1,2\n3\n").unwrap();
    let data_err = picardo(&["run"], &[("--input", &ragged)]);
    assert_eq!(data_err.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&data_err.stderr).contains("line 2"));
    let missing = picardo(&["run"], &[("--input", &dir.path().join("missing.csv"))]);
    assert_eq!(missing.status.code(), Some(3));
    let bad_spec = picardo(
        &["gen", "--n", "3", "--t", "10", "--uniform", "1"],
        &[("--out", &dir.path().join("g.csv"))],
    );
    assert_eq!(bad_spec.status.code(), Some(3));

    // two identical channels: the covariance is singular
    let dup = dir.path().join("dup.csv");
    let row: Vec<String> = (0..200)
        .map(|k| format!("{}", ((k * 37) % 101) as f64 - 50.0))
        .collect();
    fs::write(&dup, format!("{0}\n{0}\n", row.join(","))).unwrap();
    let numeric = picardo(&["run"], &[("--input", &dup)]);
    assert_eq!(
        numeric.status.code(),
        Some(4),
        "{}",
        String::from_utf8_lossy(&numeric.stderr)
    );
}
