use starisac::conic::ClarabelSolver;
use starisac::harness::{aggregate, read_records, read_rows, run_sweep, RunnerOptions, Statistic, SweepSpec};
use starisac::subproblems::Baseline;

const SPEC: &str = r#"
name = "ns"
param = "n_ris_elements"
values = [4, 8]
baselines = ["rsma-star-opt", "rsma-no-ris"]
runs = 3
master_seed = 99
statistic = "median"
write_trace = true

[series]
param = "n_comm_users"
values = [1, 2]

[base]
n_bs_antennas = 4
n_comm_users = 2
max_iters = 4
"#;

#[test]
fn toml_spec_runs_end_to_end() {
    let spec = SweepSpec::from_toml_str(SPEC).unwrap();
    assert_eq!(spec.statistic, Statistic::Median);
    let out = run_sweep(&spec, &ClarabelSolver, &RunnerOptions::default()).unwrap();
    assert_eq!(out.rows.len(), 2 * 2 * 2);
    assert_eq!(out.records.len(), 2 * 2 * 3 * 2);
    for row in &out.rows {
        assert_eq!(row.n_runs, 3);
        assert!(row.param.starts_with("n_ris_elements@n_comm_users="));
        assert!(row.n_infeasible < 3 && row.mean_omega.is_finite(), "{row:?}");
    }
    // The surface size is irrelevant without a surface.
    let no_ris: Vec<f64> =
        out.rows.iter().filter(|r| r.baseline == Baseline::RsmaNoRis).map(|r| r.mean_omega).collect();
    assert!((no_ris[0] - no_ris[1]).abs() < 1e-6 && (no_ris[2] - no_ris[3]).abs() < 1e-6, "{no_ris:?}");

    let dir = tempfile::tempdir().unwrap();
    let paths = out.write(dir.path()).unwrap();
    let names: Vec<String> = paths.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    assert_eq!(names, ["ns.csv", "ns_runs.jsonl", "ns_trace.csv"]);
    let rows = read_rows(&paths[0]).unwrap();
    let again = aggregate(&spec, &read_records(&paths[1]).unwrap()).unwrap();
    assert_eq!(rows.len(), again.len());
    for (a, b) in rows.iter().zip(&again) {
        assert_eq!((a.baseline, a.value, a.n_runs), (b.baseline, b.value, b.n_runs));
        assert!((a.mean_omega - b.mean_omega).abs() <= 1e-12);
    }
}
