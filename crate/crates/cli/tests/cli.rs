use std::path::Path;
use std::process::{Command, Output};

use starisac::conic::{CanonicalProgram, ClarabelSolver, ConicSolver, SolveStatus, SolverSettings};
use starisac::harness::{read_records, read_rows, RunRecord, RunStatus, CSV_HEADER};

fn starisac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_starisac")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn run_prints_one_record() {
    let o = starisac(&["run", "--config", "desk", "--seed", "3", "--max-iter", "4", "--baseline", "rsma-star-rand"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 1);
    let rec: RunRecord = serde_json::from_str(&text).unwrap();
    assert_eq!((rec.seed, rec.config.max_iters, rec.run_index), (3, 4, 0));
    assert!(rec.iterations <= 4);
    assert!(matches!(rec.status, RunStatus::Converged | RunStatus::MaxIters));
    assert!(rec.feasible && rec.omega_hat.unwrap() > 0.0);
}

#[test]
fn run_writes_to_file_and_honours_tol() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = starisac(&["run", "--config", "desk", "--tol", "1e9", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).is_empty());
    let rec: RunRecord = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(rec.iterations, 1, "a huge tolerance stops after one iteration");
    assert_eq!(rec.status, RunStatus::Converged);
}

#[test]
fn bad_arguments_exit_nonzero() {
    assert!(!starisac(&["run", "--baseline", "noma"]).status.success());
    assert!(!starisac(&["run", "--config", "nowhere.toml"]).status.success());
    assert!(!starisac(&["run", "--config", "desk", "--tol", "-1"]).status.success());
    assert!(!starisac(&["sweep"]).status.success());
    let o = starisac(&["dump-program", "--config", "desk", "--baseline", "rsma-no-ris", "--step", "v"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_from_spec_writes_table_and_records() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("s.toml");
    std::fs::write(
        &spec,
        r#"
name = "mini"
param = "power_dbm"
values = [20.0, 30.0]
baselines = ["rsma-star-rand", "sdma-star-opt"]
runs = 2

[base]
n_bs_antennas = 4
n_ris_elements = 8
n_comm_users = 2
max_iters = 3
"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = starisac(&["sweep", "--spec", spec.to_str().unwrap(), "--jobs", "2", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = out.join("mini.csv");
    let head = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(head.lines().next().unwrap(), CSV_HEADER.join(","));
    let rows = read_rows(&csv).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.n_runs == 2));
    assert_eq!(read_records(&out.join("mini_runs.jsonl")).unwrap().len(), 8);
    assert!(!Path::new(&out.join("mini_trace.csv")).exists());
}

#[test]
fn figure_sweep_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = starisac(&["sweep", "--figure", "fig2", "--scale", "desk", "--runs", "1", "--median", "--out", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_rows(&dir.path().join("fig2.csv")).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.n_runs == 1 && r.value == 30.0));
    let trace = std::fs::read_to_string(dir.path().join("fig2_trace.csv")).unwrap();
    assert!(trace.lines().count() > 4);
}

#[test]
fn quick_selftest_passes() {
    let o = starisac(&["selftest", "--quick", "--json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let lines: Vec<serde_json::Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 4);
    assert!(lines.iter().all(|l| l["passed"] == true));
}

#[test]
fn dumped_programs_parse_and_solve() {
    for step in ["w", "v"] {
        let o = starisac(&["dump-program", "--config", "desk", "--seed", "5", "--step", step, "--iterations", "1"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let text = stdout(&o);
        let prog = CanonicalProgram::parse(&text).unwrap();
        assert_eq!(prog.dump(), text, "dump is a fixed point of parse");
        let sol = ClarabelSolver.solve_canonical(&prog, &SolverSettings::default());
        assert_eq!(sol.status, SolveStatus::Optimal, "{step}: {}", sol.detail);
    }
}
