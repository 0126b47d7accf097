use std::process::{Command, Output};

use euler_alpha::grid::{make_grid, write_eaf1, ScalarField};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_euler-alpha"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["bogus"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["solve", "--grid", "8by8"]).status.code(), Some(1));
    assert_eq!(run(&["sweep", "--alphas", "0.2,0.1"]).status.code(), Some(1));
    assert_eq!(run(&["norms", "/nonexistent.eaf1"]).status.code(), Some(1));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "grid = 8x24\nsmoothing = 3\n").unwrap();
    let o = run(&["--config", cfg.to_str().unwrap(), "parallel"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sweep_from_config_writes_four_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.cfg");
    std::fs::write(
        &cfg,
        "grid = 8x24\nT = 0.05\ndt = 0.005\nalphas = 0.2,0.1,0.05,0.025\n# comment\nu0 = cell\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    // the command line wins over the file
    let o = run(&["--config", cfg.to_str().unwrap(), "--T", "0.04", "--out", out.to_str().unwrap(), "sweep"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    let summary = std::fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("reference energy_drift"));
    let written = std::fs::read_to_string(out.join("sweep.cfg")).unwrap();
    assert!(written.contains("T = 0.04"));
    assert!(out.join("sweep.svg").exists());
}

#[test]
fn norms_of_a_zero_field() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("z.eaf1");
    write_eaf1(&f, &ScalarField::zeros(&make_grid(2.0, 8, 12).unwrap())).unwrap();
    let o = run(&["norms", f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("grid 8x12"));
    assert!(s.contains("l2 0e0"));
}

#[test]
fn parallel_and_corrector_smoke() {
    let o = run(&["--grid", "8x32", "--T", "0.02", "parallel", "--profile", "poiseuille"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("stationarity"));
    let o = run(&["corrector"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("slopes"));
}

#[test]
fn oversized_step_is_a_numerical_failure() {
    let o = run(&["--grid", "16x24", "--dt", "5", "--T", "10", "solve", "--u0", "cell"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}
