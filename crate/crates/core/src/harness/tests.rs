use super::*;
use crate::conic::{CanonicalProgram, ClarabelSolver, ConicSolver, RawSolution, SolveStatus, SolverSettings};
use crate::scenario::SystemConfig;
use crate::subproblems::Baseline;

fn tiny(runs: usize, values: &[f64], baselines: &[Baseline]) -> SweepSpec {
    SweepSpec {
        name: "tiny".into(),
        base: SystemConfig { max_iters: 3, ..SystemConfig::desk() },
        param: SweepParam::PowerDbm,
        values: values.to_vec(),
        series: None,
        baselines: baselines.to_vec(),
        runs,
        master_seed: 7,
        out_dir: None,
        statistic: Statistic::Mean,
        freeze_geometry: false,
        write_trace: true,
    }
}

fn without_times(mut records: Vec<RunRecord>) -> Vec<RunRecord> {
    for r in &mut records {
        r.wall_time_s = 0.0;
        r.total_solver_time_s = 0.0;
    }
    records
}

struct Broken;

impl ConicSolver for Broken {
    fn name(&self) -> &'static str {
        "broken"
    }

    fn solve_canonical(&self, _: &CanonicalProgram, _: &SolverSettings) -> RawSolution {
        RawSolution { status: SolveStatus::NumericalLimit, x: None, iterations: 0, detail: "always fails".into() }
    }
}

#[test]
fn params_apply_and_parse() {
    let mut cfg = SystemConfig::desk();
    SweepParam::NRisElements.apply(&mut cfg, 16.0).unwrap();
    assert_eq!(cfg.n_ris_elements, 16);
    SweepParam::BeampatternRatioDb.apply(&mut cfg, -3.0).unwrap();
    assert_eq!(cfg.beampattern_ratio_db, vec![-3.0]);
    SweepParam::NSenseTargets.apply(&mut cfg, 3.0).unwrap();
    assert_eq!(cfg.geometry.target_angles.len(), 3);
    assert!((cfg.geometry.target_angles[2]).abs() < 1e-15, "third target sits at broadside");
    assert!(SweepParam::NBsAntennas.apply(&mut cfg, 2.5).is_err());
    assert!(SweepParam::NCommUsers.apply(&mut cfg, 0.0).is_err());
    for p in SweepParam::ALL {
        assert_eq!(p.name().parse::<SweepParam>().unwrap(), p);
    }
    assert!("power".parse::<SweepParam>().is_err());
}

#[test]
fn invalid_specs_are_rejected() {
    let ok = tiny(1, &[30.0], &[Baseline::RsmaStarRand]);
    ok.validate().unwrap();
    assert!(SweepSpec { values: vec![], ..ok.clone() }.validate().is_err());
    assert!(SweepSpec { runs: 0, ..ok.clone() }.validate().is_err());
    assert!(SweepSpec { baselines: vec![], ..ok.clone() }.validate().is_err());
    assert!(SweepSpec { param: SweepParam::NRisElements, values: vec![7.0], ..ok.clone() }.validate().is_err());
    let repeated = Series { param: SweepParam::PowerDbm, values: vec![10.0] };
    assert!(SweepSpec { series: Some(repeated), ..ok }.validate().is_err());
}

#[test]
fn presets_validate_and_round_trip() {
    for fig in Figure::ALL {
        for scale in [Scale::Desk, Scale::Paper] {
            let spec = figure_protocols(fig, scale);
            spec.validate().unwrap();
            assert_eq!(spec.runs, scale.runs());
            let back = SweepSpec::from_toml_str(&spec.to_toml_string().unwrap()).unwrap();
            assert_eq!(back, spec, "{fig} {}", scale.name());
            assert_eq!(fig.name().parse::<Figure>().unwrap(), fig);
        }
    }
    let paper = figure_protocols(Figure::Fig3a, Scale::Paper).base;
    assert_eq!((paper.n_bs_antennas, paper.n_ris_elements, paper.n_comm_users, paper.n_sense_targets), (8, 32, 6, 2));
    let desk = figure_protocols(Figure::Fig3a, Scale::Desk).base;
    assert_eq!((desk.n_bs_antennas, desk.n_ris_elements, desk.n_comm_users, desk.n_sense_targets), (4, 8, 2, 2));

    let fig2 = figure_protocols(Figure::Fig2, Scale::Paper);
    assert!(fig2.write_trace);
    assert_eq!(fig2.base.max_iters, 20);
    assert_eq!(fig2.base.tol, 1e-4);
    assert_eq!(
        fig2.baselines,
        vec![Baseline::RsmaStarOpt, Baseline::RsmaRisConv, Baseline::RsmaStarRand, Baseline::SdmaStarOpt]
    );
    let fig3d = figure_protocols(Figure::Fig3d, Scale::Desk);
    assert_eq!(fig3d.param, SweepParam::BeampatternRatioDb);
    let series = fig3d.series.as_ref().unwrap();
    assert_eq!((series.param, series.values.clone()), (SweepParam::NSenseTargets, vec![2.0, 3.0]));
    let labels: Vec<String> = fig3d.points().unwrap().into_iter().map(|p| p.label).collect();
    assert!(labels.contains(&"beampattern_ratio_db@n_sense_targets=3".to_string()));
    assert!("fig4".parse::<Figure>().is_err());
}

#[test]
fn single_run_row_matches_its_record() {
    let spec = tiny(1, &[30.0], &[Baseline::RsmaStarRand]);
    let out = run_sweep(&spec, &ClarabelSolver, &RunnerOptions::default()).unwrap();
    assert_eq!(out.records.len(), 1);
    assert_eq!(out.rows.len(), 1);
    let (rec, row) = (&out.records[0], &out.rows[0]);
    assert!(rec.counts(), "{rec:?}");
    assert_eq!(row.mean_omega, rec.omega_hat.unwrap());
    assert_eq!(row.stderr_omega, 0.0);
    assert_eq!(row.mean_iters, rec.iterations as f64);
    assert_eq!((row.n_infeasible, row.n_runs), (0, 1));
    assert_eq!((row.param.as_str(), row.value, row.baseline), ("power_dbm", 30.0, Baseline::RsmaStarRand));
}

#[test]
fn sweeps_are_deterministic_and_order_free() {
    let spec = tiny(3, &[20.0, 30.0], &[Baseline::RsmaStarRand, Baseline::RsmaNoRis]);
    let serial = run_sweep(&spec, &ClarabelSolver, &RunnerOptions { jobs: Some(1), ..Default::default() }).unwrap();
    let parallel = run_sweep(&spec, &ClarabelSolver, &RunnerOptions { jobs: Some(4), ..Default::default() }).unwrap();
    assert_eq!(serial.rows, parallel.rows);
    assert_eq!(without_times(serial.records.clone()), without_times(parallel.records));
    let mut shuffled = serial.records.clone();
    shuffled.reverse();
    assert_eq!(aggregate(&spec, &shuffled).unwrap(), serial.rows);
    // Run i draws the same channels at every point and for every baseline.
    let seeds: Vec<u64> = serial.records.iter().filter(|r| r.value == 20.0).map(|r| r.seed).collect();
    let seeds30: Vec<u64> = serial.records.iter().filter(|r| r.value == 30.0).map(|r| r.seed).collect();
    assert_eq!(seeds, seeds30);
}

#[test]
fn persisted_records_reproduce_the_table() {
    let spec = tiny(2, &[30.0], &[Baseline::RsmaStarRand]);
    let out = run_sweep(&spec, &ClarabelSolver, &RunnerOptions::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let paths = out.write(dir.path()).unwrap();
    assert_eq!(paths.len(), 3);
    let text = std::fs::read_to_string(&paths[0]).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
    let rows = read_rows(&paths[0]).unwrap();
    let records = read_records(&paths[1]).unwrap();
    assert_eq!(records, out.records);
    let again = aggregate(&spec, &records).unwrap();
    for (a, b) in rows.iter().zip(&again) {
        assert!((a.mean_omega - b.mean_omega).abs() <= 1e-12);
        assert!((a.stderr_omega - b.stderr_omega).abs() <= 1e-12);
        assert_eq!((a.n_infeasible, a.n_runs), (b.n_infeasible, b.n_runs));
    }
    let trace = std::fs::read_to_string(&paths[2]).unwrap();
    assert!(trace.starts_with("baseline,iteration,mean_omega,stderr_omega,n_runs"));
}

#[test]
fn failures_are_recorded_and_excluded() {
    let spec = tiny(2, &[30.0], &[Baseline::RsmaStarRand, Baseline::RsmaNoRis]);
    let out = run_sweep(&spec, &Broken, &RunnerOptions::default()).unwrap();
    assert_eq!(out.records.len(), 4);
    assert!(out.records.iter().all(|r| r.status == RunStatus::Failed && r.error.is_some()));
    for row in &out.rows {
        assert_eq!((row.n_infeasible, row.n_runs), (2, 2));
        assert!(row.mean_omega.is_nan());
    }
}

#[test]
fn frozen_geometry_keeps_users_fixed() {
    let spec = SweepSpec { freeze_geometry: true, ..tiny(2, &[30.0], &[Baseline::RsmaNoRis]) };
    let out = run_sweep(&spec, &ClarabelSolver, &RunnerOptions::default()).unwrap();
    let free =
        run_sweep(&tiny(2, &[30.0], &[Baseline::RsmaNoRis]), &ClarabelSolver, &RunnerOptions::default()).unwrap();
    // Run 0 is the frozen placement, so it agrees with the free sweep.
    assert_eq!(out.records[0].omega_hat, free.records[0].omega_hat);
    assert_ne!(out.records[1].omega_hat, free.records[1].omega_hat);
}

#[test]
fn summaries() {
    let (m, se) = summarize(&[1.0, 2.0, 3.0, 10.0], Statistic::Mean);
    assert_eq!(m, 4.0);
    let sd = ((9.0 + 4.0 + 1.0 + 36.0) / 3.0_f64).sqrt();
    assert!((se - sd / 2.0).abs() < 1e-15);
    let (med, se_med) = summarize(&[1.0, 2.0, 3.0, 10.0], Statistic::Median);
    assert_eq!(med, 2.5);
    assert!((se_med / se - (std::f64::consts::PI / 2.0).sqrt()).abs() < 1e-15);
    assert_eq!(summarize(&[5.0], Statistic::Mean), (5.0, 0.0));
    assert!(summarize(&[], Statistic::Median).0.is_nan());
}

#[test]
fn trace_table_holds_last_values() {
    let spec = tiny(1, &[30.0], &[Baseline::RsmaStarRand]);
    let key_cfg = spec.base.clone();
    let key = RunKey { sweep: "t", param: "power_dbm", value: 30.0, run_index: 0, seed: 1, config: &key_cfg };
    let mut a = RunRecord::failed(&key, Baseline::RsmaStarRand, String::new(), 0.0);
    a.status = RunStatus::Converged;
    a.feasible = true;
    a.error = None;
    a.omega_hat = Some(2.0);
    a.initial_omega = Some(0.0);
    a.omega = vec![1.0, 2.0];
    let mut b = a.clone();
    b.run_index = 1;
    b.omega = vec![3.0];
    let t = trace_table(&spec, &[a, b]);
    let means: Vec<f64> = t.iter().map(|r| r.mean_omega).collect();
    assert_eq!(means, vec![0.0, 2.0, 2.5]);
    assert!(t.iter().all(|r| r.n_runs == 2));
}

#[test]
fn selftest_suites_pass_at_reduced_size() {
    let s = SolverSettings::default();
    let quick = [
        selftest::surrogate_suite(5, 100),
        selftest::sensing_suite(&ClarabelSolver, &s),
        selftest::tight_expansion_suite(&ClarabelSolver, &s, 2),
        selftest::ao_smoke_suite(&ClarabelSolver, &s),
    ];
    for o in &quick {
        assert!(o.passed, "{}: {}", o.name, o.detail);
    }
    assert!(!selftest::sensing_suite(&Broken, &s).passed);
}
