use std::fs;

use mongeampere::cli::{run, EXIT_OK, EXIT_SOLVER, EXIT_USAGE};
use mongeampere::io::write_mesh;
use mongeampere_core::mesh::build_square_mesh;
use mongeampere_core::problems::STUDY_HEADER;

fn cli(args: &[&str], out: &std::path::Path) -> i32 {
    let mut argv = vec!["mongeampere"];
    argv.extend_from_slice(args);
    argv.extend_from_slice(&["--out", out.to_str().unwrap()]);
    run(argv)
}

#[test]
fn solve_writes_solution_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let code = cli(&["solve", "--problem", "test1", "--method", "newton", "--degree", "5", "--h", "0.25"], dir.path());
    assert_eq!(code, EXIT_OK);
    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(trace.starts_with("k,residual,increment_h1,min_eig,min_lap\n"));
    let coeffs = fs::read_to_string(dir.path().join("coeffs.txt")).unwrap();
    assert_eq!(coeffs.lines().count(), 32 * 21);
}

#[test]
fn study_has_one_row_per_level() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["study", "--problem", "test1", "--method", "march-laplace", "--nu", "50", "--degree", "5", "--levels", "4", "--max-iter", "1000"];
    assert_eq!(cli(&args, dir.path()), EXIT_OK);
    let csv = fs::read_to_string(dir.path().join("study.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], STUDY_HEADER);
    assert_eq!(lines.len(), 5);
    let cols = STUDY_HEADER.split(',').count();
    assert!(lines[1..].iter().all(|l| l.split(',').count() == cols));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cli(&["solve", "--bogus"], dir.path()), EXIT_USAGE);
    assert_eq!(cli(&["solve", "--method", "gradient"], dir.path()), EXIT_USAGE);
    assert_eq!(cli(&["solve", "--problem", "test9"], dir.path()), EXIT_USAGE);
    assert_eq!(cli(&["solve", "--method", "newton", "--nu", "3"], dir.path()), EXIT_USAGE);
    assert_eq!(cli(&["solve", "--h", "0.25", "--levels", "2"], dir.path()), EXIT_USAGE);
    assert_eq!(cli(&["frobnicate"], dir.path()), EXIT_USAGE);
}

#[test]
fn non_convergence_exits_two_and_keeps_the_trace() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["solve", "--problem", "test1", "--method", "march-laplace", "--max-iter", "3", "--h", "0.5"];
    assert_eq!(cli(&args, dir.path()), EXIT_SOLVER);
    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 5);
}

#[test]
fn external_mesh_defaults_to_the_quadratic() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = dir.path().join("square.mesh");
    write_mesh(&mesh, &build_square_mesh(2)).unwrap();
    let args = ["solve", "--mesh", mesh.to_str().unwrap(), "--threads", "2"];
    assert_eq!(cli(&args, dir.path()), EXIT_OK);
    assert_eq!(cli(&["solve", "--mesh", "/nonexistent.mesh"], dir.path()), EXIT_USAGE);
}

#[test]
fn threads_do_not_change_results() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["solve", "--problem", "test4", "--degree", "3", "--h", "0.25"];
    assert_eq!(cli(&args, a.path()), EXIT_OK);
    let mut more = args.to_vec();
    more.extend_from_slice(&["--threads", "4"]);
    assert_eq!(cli(&more, b.path()), EXIT_OK);
    let ca = fs::read_to_string(a.path().join("coeffs.txt")).unwrap();
    let cb = fs::read_to_string(b.path().join("coeffs.txt")).unwrap();
    assert_eq!(ca, cb);
}

#[test]
fn compare_export_and_fd_check() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cli(&["compare", "--problem", "quadratic", "--degree", "4", "--h", "0.5", "--max-iter", "3000"], dir.path()), EXIT_OK);
    let compare = fs::read_to_string(dir.path().join("compare.csv")).unwrap();
    assert_eq!(compare.lines().count(), 6);
    assert_eq!(cli(&["export-surface", "--problem", "quadratic", "--degree", "3", "--h", "0.5"], dir.path()), EXIT_OK);
    assert!(dir.path().join("surface.txt").exists());
    assert!(dir.path().join("surface.txt.section").exists());
    let args = ["fd-check", "--problem", "quadratic", "--degree", "3", "--h", "0.5", "--grid", "17"];
    assert_eq!(cli(&args, dir.path()), EXIT_OK);
    let fd = fs::read_to_string(dir.path().join("fd_check.csv")).unwrap();
    let diff: f64 = fd.lines().nth(1).unwrap().split(',').nth(2).unwrap().parse().unwrap();
    assert!(diff < 1e-9);
    assert_eq!(cli(&["fd-check", "--problem", "test5"], dir.path()), EXIT_USAGE);
}
