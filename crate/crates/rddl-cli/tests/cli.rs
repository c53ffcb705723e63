use std::path::PathBuf;
use std::process::{Command, Output};

fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name)
}

fn rddl(args: &[&str]) -> Output {
    rddl_env(args, &[])
}

fn rddl_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_rddl"));
    for key in ["RDDL_STEP", "RDDL_HORIZON", "RDDL_SAMPLES", "RDDL_SEED", "RDDL_TOLERANCE"] {
        cmd.env_remove(key);
    }
    cmd.args(args).envs(env.iter().copied()).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn path(p: &PathBuf) -> &str {
    p.to_str().unwrap()
}

/// Last CSV row as (header name, value) pairs.
fn last_row(csv: &str) -> Vec<(String, f64)> {
    let mut lines = csv.lines();
    let header: Vec<String> = lines.next().unwrap().split(',').map(String::from).collect();
    let row: Vec<f64> = lines.last().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    header.into_iter().zip(row).collect()
}

fn column(row: &[(String, f64)], name: &str) -> f64 {
    row.iter().find(|(n, _)| n == name).unwrap().1
}

#[test]
fn check_unconditional_script() {
    let o = rddl(&["check", path(&corpus("phi_C.rdl"))]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.starts_with("status: unconditional"), "{out}");
    assert!(out.contains("wall_ms:"));
}

#[test]
fn check_strict_without_experimental_rules() {
    let o = rddl(&["check", "--strict", path(&corpus("decay_7.rdl"))]);
    assert_eq!(code(&o), 0);
}

#[test]
fn check_rejected_script_reports_path() {
    let o = rddl(&["check", path(&corpus("phi_C_broken.rdl"))]);
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).contains("at /0/0"), "{}", stdout(&o));
}

#[test]
fn check_conditional_and_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let open = dir.path().join("open.rdl");
    std::fs::write(&open, "param x\nsequent { assume x >= 0 goal x^4 - 2*x^2 + 1 >= 0 }\n(ARITH)\n").unwrap();
    let o = rddl(&["check", open.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("obligations: 1"));

    let bad = dir.path().join("bad.rdl");
    std::fs::write(&bad, "sequent { assume x >= goal x > 0 }\n(ARITH)\n").unwrap();
    assert_eq!(code(&rddl(&["check", bad.to_str().unwrap()])), 3);
    assert_eq!(code(&rddl(&["check", "/nonexistent.rdl"])), 3);
}

#[test]
fn usage_errors_exit_3() {
    assert_eq!(code(&rddl(&["frobnicate"])), 3);
    assert_eq!(code(&rddl(&["--step=0", "sync", path(&corpus("models/phi_C.rdl"))])), 3);
    assert_eq!(code(&rddl(&["--help"])), 0);
}

#[test]
fn simulate_left_car_to_exit() {
    let o = rddl(&["simulate", path(&corpus("models/left_car.rdl"))]);
    assert_eq!(code(&o), 0);
    let row = last_row(&stdout(&o));
    assert!((column(&row, "v") - 2f64.sqrt()).abs() < 1e-3);
    assert_eq!(column(&row, "exit"), 1.0);
}

#[test]
fn simulate_each_side_of_a_pair() {
    let m = corpus("models/cars.rdl");
    let left = last_row(&stdout(&rddl(&["simulate", path(&m)])));
    let right = last_row(&stdout(&rddl(&["simulate", path(&m), "--side", "right"])));
    assert!((column(&left, "v") - 1.41421).abs() < 1e-3);
    assert!((column(&right, "v#") - 2.0).abs() < 1e-3);
}

#[test]
fn simulate_init_and_exit_level() {
    let o = rddl(&["simulate", path(&corpus("models/left_car.rdl")), "--init", "v=1", "--exit-level", "2"]);
    let row = last_row(&stdout(&o));
    assert!((column(&row, "x") - 2.0).abs() < 1e-6);
    // x = t + t^2/2 reaches 2 at t = sqrt(5) - 1, where v = sqrt(5).
    assert!((column(&row, "t") - (5f64.sqrt() - 1.0)).abs() < 1e-6);
    assert!((column(&row, "v") - 5f64.sqrt()).abs() < 1e-6);
}

#[test]
fn zero_horizon_gives_header_only() {
    let o = rddl(&["--horizon", "0", "simulate", path(&corpus("models/left_car.rdl"))]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), "t,v,x,exit\n");
}

#[test]
fn flags_override_environment() {
    let m = corpus("models/left_car.rdl");
    let env = [("RDDL_HORIZON", "0")];
    assert_eq!(stdout(&rddl_env(&["simulate", path(&m)], &env)).lines().count(), 1);
    assert!(stdout(&rddl_env(&["--horizon", "5", "simulate", path(&m)], &env)).lines().count() > 1);
}

#[test]
fn synchronized_drag_pair_keeps_positions_together() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sync.csv");
    let o = rddl(&["--horizon", "3", "simulate", path(&corpus("models/drag.rdl")), "--sync", "--csv", path(&csv)]);
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("t,v,v#,x,x#,residual\n"));
    for line in text.lines().skip(1) {
        let residual: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(residual <= 1e-5, "{line}");
    }
}

#[test]
fn sync_requires_a_pair() {
    assert_eq!(code(&rddl(&["simulate", path(&corpus("models/left_car.rdl")), "--sync"])), 3);
    assert_eq!(code(&rddl(&["sync", path(&corpus("models/left_car.rdl"))])), 3);
}

#[test]
fn falsify_negated_example_finds_counterexample() {
    let o = rddl(&["falsify", path(&corpus("models/cars_negated.rdl"))]);
    assert_eq!(code(&o), 4);
    let out = stdout(&o);
    assert!(out.contains("violated: v# <= v"), "{out}");
    let again = stdout(&rddl(&["falsify", path(&corpus("models/cars_negated.rdl"))]));
    assert_eq!(out, again);
}

#[test]
fn falsify_stated_example_passes() {
    let o = rddl(&["falsify", path(&corpus("models/cars.rdl"))]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("counterexample: none"));
}

#[test]
fn falsify_reports_are_seed_reproducible() {
    let m = corpus("models/drag.rdl");
    let args = ["--samples", "20", "--horizon", "2", "--seed", "7", "falsify", path(&m), "--box", "v=0.5:3"];
    let a = rddl(&args);
    assert_eq!(stdout(&a), stdout(&rddl(&args)));
    assert!(stdout(&a).starts_with("seed: 7\n"));
}

#[test]
fn falsify_empty_region_is_an_error() {
    let o = rddl(&["falsify", path(&corpus("models/cars.rdl")), "--box", "x=5:6"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("no sample"));
}

#[test]
fn lie_derivatives() {
    let drag = corpus("models/drag.rdl");
    assert_eq!(stdout(&rddl(&["lie", path(&drag), "--term", "v"])).trim(), "-v");
    assert_eq!(stdout(&rddl(&["lie", path(&drag), "--term", "1", "--order", "5"])).trim(), "0");
    assert_eq!(stdout(&rddl(&["lie", path(&drag), "--term", "x#", "--side", "right"])).trim(), "v#");
    assert_eq!(code(&rddl(&["lie", path(&drag), "--term", "v +"])), 3);
}

#[test]
fn synchronized_dynamics_text() {
    let o = rddl(&["sync", path(&corpus("models/phi_C.rdl"))]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).trim(), "{x' = v, v' = a, x#' = v#*(v/v#), v#' = a#*(v/v#)}");
}
