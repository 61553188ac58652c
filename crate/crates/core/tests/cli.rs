use std::path::Path;
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use smoothspec::harness::RejectionTable;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_smoothspec"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write_dataset(path: &Path, n: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = String::from("x,y\n");
    for _ in 0..n {
        let x: f64 = rng.random_range(-1.0..1.0);
        let e: f64 = StandardNormal.sample(&mut rng);
        s.push_str(&format!("{x},{}\n", 1.0 + 2.0 * x + (10.0 * x).cos() + e));
    }
    std::fs::write(path, s).unwrap();
}

#[test]
fn no_arguments_prints_usage_and_exits_2() {
    let out = run(&[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn test_subcommand_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    write_dataset(&data, 150, 1);
    let args = [
        "test", "--data", data.to_str().unwrap(), "--model", "linear", "--family", "piecewise:0",
        "--h0", "0.25", "--a", "2", "--Jn", "5", "--c", "1", "--alpha", "0.05",
        "--mode", "bootstrap:199", "--seed", "42",
    ];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("adaptive:1: statistic = "));
    assert_eq!(lines.next().unwrap(), "h,T_h,v_h_h0,v_h,objective");
    assert_eq!(lines.count(), 6);
    assert!(!text.contains('\r'));
}

#[test]
fn table_goes_to_file_when_requested() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    let table = dir.path().join("t.csv");
    write_dataset(&data, 80, 2);
    let out = run(&[
        "test", "--data", data.to_str().unwrap(), "--mode", "asymptotic", "--family", "kernel:gaussian",
        "--h0", "0.5", "--Jn", "3", "--output", table.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 1);
    assert_eq!(std::fs::read_to_string(table).unwrap().lines().count(), 5);
}

#[test]
fn data_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    let mut s = String::from("x,y\n");
    for i in 0..20 {
        if i == 6 {
            s.push_str("0.5,abc\n");
        } else {
            s.push_str(&format!("{},{}\n", i as f64 / 19.0, i));
        }
    }
    std::fs::write(&bad, s).unwrap();
    let out = run(&["test", "--data", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("row 8, column 2"), "{err}");

    let short = dir.path().join("short.csv");
    std::fs::write(&short, "0,1\n1,2\n2,3\n").unwrap();
    assert_eq!(run(&["test", "--data", short.to_str().unwrap()]).status.code(), Some(3));

    let missing = dir.path().join("missing.csv");
    assert_eq!(run(&["test", "--data", missing.to_str().unwrap()]).status.code(), Some(3));
}

#[test]
fn usage_and_numerical_errors() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    write_dataset(&data, 60, 3);
    let d = data.to_str().unwrap();
    assert_eq!(run(&["test", "--data", d, "--family", "spline"]).status.code(), Some(2));
    assert_eq!(run(&["test", "--data", d, "--a", "1.5"]).status.code(), Some(2));
    assert_eq!(run(&["test", "--data", d, "--test", "max", "--mode", "asymptotic"]).status.code(), Some(2));
    assert_eq!(run(&["test", "--bogus"]).status.code(), Some(2));
    let out = run(&["weights", "--data", d, "--family", "kernel:triangular", "--h", "0.000001"]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn weights_export_is_dense_csv() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    write_dataset(&data, 30, 4);
    let out = run(&["weights", "--data", data.to_str().unwrap(), "--family", "piecewise:0", "--h", "0.5"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 30);
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r.len(), 30);
        assert_eq!(r[i], 0.0);
        for (j, v) in r.iter().enumerate() {
            assert_eq!(*v, rows[j][i]);
        }
    }
}

#[test]
fn simulate_from_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.conf");
    std::fs::write(
        &cfg,
        "# small run\nseed = 3\ndraws = 19\nreplications = 12\ntests = adaptive:1, max, fixed-h0\nlevels = 0.05, 0.1\n\n\
         [scenario.null]\nn = 60\n\n[scenario.alt]\nn = 60\nr = sqrt(2/3)\nt = 2\n",
    )
    .unwrap();
    let csv_path = dir.path().join("out.csv");
    let args = ["simulate", "--config", cfg.to_str().unwrap(), "--output", csv_path.to_str().unwrap()];
    let a = run(&args);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    let first = std::fs::read(&csv_path).unwrap();
    assert!(csv_path.with_extension("txt").exists());
    let b = run(&[&args[..], &["--jobs", "2"]].concat());
    assert_eq!(b.status.code(), Some(0));
    assert_eq!(std::fs::read(&csv_path).unwrap(), first);
    assert_eq!(a.stdout, b.stdout);

    let table = RejectionTable::read_csv(first.as_slice()).unwrap();
    assert_eq!(table.cells.len(), 2 * 3 * 2);
    let mut again = Vec::new();
    table.write_csv(&mut again).unwrap();
    assert_eq!(again, first);
    assert_eq!(RejectionTable::read_csv(again.as_slice()).unwrap(), table);
}

#[test]
fn simulate_rejects_conflicting_sources() {
    assert_eq!(run(&["simulate"]).status.code(), Some(2));
    assert_eq!(run(&["simulate", "--preset", "table9"]).status.code(), Some(2));
}
