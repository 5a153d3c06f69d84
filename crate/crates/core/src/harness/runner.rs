use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::sample_channels;
use crate::conic::ConicSolver;
use crate::driver::{run_ao_with, AoOptions};
use crate::error::{Error, Result};
use crate::scenario::{derive_run_seed, sample_geometry};
use crate::subproblems::{sensing_only, Baseline};

use super::record::{write_records, RunKey, RunRecord};
use super::sweep::{Statistic, SweepPoint, SweepSpec};

/// Header of every sweep table.
pub const CSV_HEADER: [&str; 8] =
    ["param", "value", "baseline", "mean_omega", "stderr_omega", "mean_iters", "n_infeasible", "n_runs"];

/// One aggregated (point, baseline) cell. `n_infeasible` counts every run
/// excluded from the statistics, including hard failures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: String,
    pub value: f64,
    pub baseline: Baseline,
    pub mean_omega: f64,
    pub stderr_omega: f64,
    pub mean_iters: f64,
    pub n_infeasible: usize,
    pub n_runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub baseline: Baseline,
    pub iteration: usize,
    pub mean_omega: f64,
    pub stderr_omega: f64,
    pub n_runs: usize,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub spec: SweepSpec,
    pub rows: Vec<SweepRow>,
    /// Ordered by point, then run, then baseline.
    pub records: Vec<RunRecord>,
}

/// Per-sweep execution knobs that do not change results.
#[derive(Debug, Clone, Default)]
pub struct RunnerOptions {
    pub ao: AoOptions,
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
}

/// Runs every (point, run) on the pool; within a job all baselines share one
/// channel draw and one sensing benchmark. Failures become records, never
/// aborts.
pub fn run_sweep(spec: &SweepSpec, solver: &dyn ConicSolver, opts: &RunnerOptions) -> Result<SweepOutput> {
    spec.validate()?;
    let points = spec.points()?;
    let jobs: Vec<(usize, usize)> = (0..points.len()).flat_map(|p| (0..spec.runs).map(move |r| (p, r))).collect();
    let work = || -> Vec<Vec<RunRecord>> {
        jobs.par_iter().map(|&(p, r)| run_point(spec, &points[p], r, solver, &opts.ao)).collect()
    };
    let nested = match opts.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };
    let records: Vec<RunRecord> = nested.into_iter().flatten().collect();
    let rows = aggregate(spec, &records)?;
    Ok(SweepOutput { spec: spec.clone(), rows, records })
}

fn run_point(
    spec: &SweepSpec,
    point: &SweepPoint,
    run: usize,
    solver: &dyn ConicSolver,
    ao: &AoOptions,
) -> Vec<RunRecord> {
    let start = Instant::now();
    let seed = derive_run_seed(spec.master_seed, run as u64);
    let key = RunKey {
        sweep: &spec.name,
        param: &point.label,
        value: point.value,
        run_index: run,
        seed,
        config: &point.config,
    };
    let freeze = spec.freeze_geometry || point.config.geometry.freeze_users;
    let geometry_seed = if freeze { derive_run_seed(spec.master_seed, 0) } else { seed };
    let prepared = sample_geometry(&point.config, geometry_seed)
        .and_then(|g| sample_channels(&point.config, &g, seed))
        .and_then(|ch| sensing_only(&ch, &point.config, solver, &ao.settings).map(|c| (ch, c)));
    let (channels, consts) = match prepared {
        Ok(v) => v,
        Err(e) => {
            let t = start.elapsed().as_secs_f64();
            return spec.baselines.iter().map(|&b| RunRecord::failed(&key, b, e.to_string(), t)).collect();
        }
    };
    spec.baselines
        .iter()
        .map(|&b| {
            let t0 = Instant::now();
            match run_ao_with(&channels, &point.config, &consts, b, seed, solver, ao) {
                Ok(trace) => RunRecord::from_trace(&key, &trace),
                Err(e) => RunRecord::failed(&key, b, e.to_string(), t0.elapsed().as_secs_f64()),
            }
        })
        .collect()
}

/// `(location, standard error)` of `values` under `stat`; NaN when empty.
pub fn summarize(values: &[f64], stat: Statistic) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let se = if n > 1 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    match stat {
        Statistic::Mean => (mean, se),
        Statistic::Median => {
            let mut s = values.to_vec();
            s.sort_by(f64::total_cmp);
            let median = if n % 2 == 1 { s[n / 2] } else { 0.5 * (s[n / 2 - 1] + s[n / 2]) };
            (median, se * (std::f64::consts::PI / 2.0).sqrt())
        }
    }
}

/// Reduces records to one row per (point, baseline) in spec order. Depends
/// only on the record set, not on completion order.
pub fn aggregate(spec: &SweepSpec, records: &[RunRecord]) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for point in spec.points()? {
        for &baseline in &spec.baselines {
            let mut cell: Vec<&RunRecord> = records
                .iter()
                .filter(|r| r.param == point.label && r.value == point.value && r.baseline == baseline)
                .collect();
            cell.sort_by_key(|r| r.run_index);
            let counted: Vec<&RunRecord> = cell.iter().copied().filter(|r| r.counts()).collect();
            let omega: Vec<f64> = counted.iter().filter_map(|r| r.omega_hat).collect();
            let iters: Vec<f64> = counted.iter().map(|r| r.iterations as f64).collect();
            let (mean_omega, stderr_omega) = summarize(&omega, spec.statistic);
            rows.push(SweepRow {
                param: point.label.clone(),
                value: point.value,
                baseline,
                mean_omega,
                stderr_omega,
                mean_iters: summarize(&iters, Statistic::Mean).0,
                n_infeasible: cell.len() - counted.len(),
                n_runs: cell.len(),
            });
        }
    }
    Ok(rows)
}

/// Mean tracked value per iteration and baseline. Runs that stopped early
/// hold their last value, so every iteration averages the same runs.
pub fn trace_table(spec: &SweepSpec, records: &[RunRecord]) -> Vec<TraceRow> {
    let mut out = Vec::new();
    for &baseline in &spec.baselines {
        let seqs: Vec<Vec<f64>> = records
            .iter()
            .filter(|r| r.baseline == baseline && r.counts())
            .map(RunRecord::omega_sequence)
            .filter(|s| !s.is_empty())
            .collect();
        let len = seqs.iter().map(Vec::len).max().unwrap_or(0);
        for iteration in 0..len {
            let at: Vec<f64> = seqs.iter().map(|s| s[iteration.min(s.len() - 1)]).collect();
            let (mean_omega, stderr_omega) = summarize(&at, Statistic::Mean);
            out.push(TraceRow { baseline, iteration, mean_omega, stderr_omega, n_runs: at.len() });
        }
    }
    out
}

pub fn write_rows(rows: &[SweepRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record(CSV_HEADER)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows(path: &Path) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(Error::Parse(format!("unexpected sweep header {header:?}")));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn write_trace(rows: &[TraceRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

impl SweepOutput {
    /// Writes `<name>.csv`, `<name>_runs.jsonl` and, when requested,
    /// `<name>_trace.csv` into `dir`; returns the paths written.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let name = &self.spec.name;
        let table = dir.join(format!("{name}.csv"));
        let runs = dir.join(format!("{name}_runs.jsonl"));
        write_rows(&self.rows, &table)?;
        write_records(&self.records, &runs)?;
        let mut paths = vec![table, runs];
        if self.spec.write_trace {
            let trace = dir.join(format!("{name}_trace.csv"));
            write_trace(&trace_table(&self.spec, &self.records), &trace)?;
            paths.push(trace);
        }
        Ok(paths)
    }
}
