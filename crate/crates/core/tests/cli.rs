//! End-to-end runs of the `surfhps` binary.

use std::path::Path;
use std::process::{Command, Output};

fn surfhps(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_surfhps")).args(args).output().unwrap()
}

fn csv_row(path: &Path) -> Vec<(String, String)> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let head: Vec<String> = lines.next().unwrap().split(',').map(String::from).collect();
    let row: Vec<String> = lines.next().unwrap().split(',').map(String::from).collect();
    head.into_iter().zip(row).collect()
}

fn field(row: &[(String, String)], name: &str) -> String {
    row.iter().find(|(k, _)| k == name).unwrap().1.clone()
}

#[test]
fn missing_mesh_is_a_usage_error_naming_the_path() {
    let out = surfhps(&["solve", "--mesh", "/nonexistent/bunny.mesh"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/bunny.mesh"));
}

#[test]
fn bad_coefficient_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "[pde]\npreset = \"custom\"\na11 = \"1\"\na22 = \"1\"\na33 = \"1\"\nc = \"sqrt(x - 2)\"\n",
    )
    .unwrap();
    let d = dir.path().to_str().unwrap();
    let out = surfhps(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--gen",
        "cube",
        "--refine",
        "0",
        "--order",
        "4",
        "--out",
        d,
    ]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn harmonic_preset_accuracy_and_thread_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: &str| {
        let d = dir.path().join(threads);
        let out = surfhps(&[
            "solve",
            "--gen",
            "sphere",
            "--refine",
            "2",
            "--order",
            "12",
            "--threads",
            threads,
            "--out",
            d.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        d
    };
    let (a, b) = (run("1"), run("8"));
    let row = csv_row(&a.join("stats.csv"));
    let err: f64 = field(&row, "rel_max_error").parse().unwrap();
    assert!(err <= 1e-7, "{err:e}");
    assert_eq!(field(&row, "elements"), "96");
    assert_eq!(
        std::fs::read(a.join("solution.txt")).unwrap(),
        std::fs::read(b.join("solution.txt")).unwrap()
    );
}

#[test]
fn factorization_cache_reproduces_solution() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("fact.bin");
    let run = |name: &str| {
        let d = dir.path().join(name);
        let out = surfhps(&[
            "solve",
            "--gen",
            "torus",
            "--refine",
            "0",
            "--order",
            "6",
            "--pde",
            "helmholtz-beltrami",
            "--cache-factorization",
            cache.to_str().unwrap(),
            "--out",
            d.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read(d.join("solution.txt")).unwrap()
    };
    let first = run("a");
    assert!(cache.exists());
    assert_eq!(first, run("b"));
}

#[test]
fn converge_fits_and_rejects_two_levels() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(
        &cfg,
        "[mesh]\ngen = \"sphere\"\norder = 6\n[converge]\nlevels = [0, 1, 2]\n",
    )
    .unwrap();
    let d = dir.path().to_str().unwrap();
    let out = surfhps(&["converge", "--config", cfg.to_str().unwrap(), "--out", d]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let fit = csv_row(&dir.path().join("fit.csv"));
    let order: f64 = field(&fit, "fitted_order").parse().unwrap();
    assert!(order > 3.0, "{order}");
    let rows = std::fs::read_to_string(dir.path().join("converge.csv")).unwrap();
    assert_eq!(rows.lines().count(), 4);

    std::fs::write(&cfg, "[mesh]\ngen = \"sphere\"\n[converge]\nlevels = [0, 1]\n").unwrap();
    let out = surfhps(&["converge", "--config", cfg.to_str().unwrap(), "--out", d]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_writes_requested_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.toml");
    std::fs::write(&cfg, "[time]\nmodel = \"cgl\"\npreset = \"stellarator\"\nevery = 5\n").unwrap();
    let d = dir.path().join("out");
    let out = surfhps(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--gen",
        "torus",
        "--refine",
        "0",
        "--order",
        "5",
        "--steps",
        "20",
        "--dt",
        "0.05",
        "--out",
        d.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let snaps = std::fs::read_dir(&d)
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .file_name()
                .to_string_lossy()
                .starts_with("snapshot_")
        })
        .count();
    assert_eq!(snaps, 5);
    let csv = std::fs::read_to_string(d.join("simulate.csv")).unwrap();
    assert!(csv.starts_with("step,time,species,min,max,l2"));
}
