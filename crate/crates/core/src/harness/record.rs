use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::driver::{AlgorithmTrace, TerminalStatus};
use crate::error::Result;
use crate::scenario::SystemConfig;
use crate::subproblems::Baseline;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Converged,
    MaxIters,
    Infeasible,
    /// The run stopped with an error; see `RunRecord::error`.
    Failed,
}

impl From<TerminalStatus> for RunStatus {
    fn from(s: TerminalStatus) -> Self {
        match s {
            TerminalStatus::Converged => RunStatus::Converged,
            TerminalStatus::MaxIters => RunStatus::MaxIters,
            TerminalStatus::Infeasible => RunStatus::Infeasible,
        }
    }
}

/// One (point, run, baseline) outcome, persisted as a JSON line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub sweep: String,
    pub param: String,
    pub value: f64,
    pub run_index: usize,
    pub seed: u64,
    pub baseline: Baseline,
    pub config: SystemConfig,
    pub status: RunStatus,
    /// Oracle min total secrecy of the final design; `None` on failure.
    pub omega_hat: Option<f64>,
    pub iterations: usize,
    /// Oracle value of the starting point; `None` when no feasible start exists.
    pub initial_omega: Option<f64>,
    /// Tracked surrogate value after each iteration.
    pub omega: Vec<f64>,
    pub feasible: bool,
    pub total_solver_time_s: f64,
    pub wall_time_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Identifies the run a record belongs to.
#[derive(Debug, Clone)]
pub struct RunKey<'a> {
    pub sweep: &'a str,
    pub param: &'a str,
    pub value: f64,
    pub run_index: usize,
    pub seed: u64,
    pub config: &'a SystemConfig,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl RunRecord {
    pub fn from_trace(key: &RunKey, trace: &AlgorithmTrace) -> Self {
        let status = RunStatus::from(trace.status);
        Self {
            sweep: key.sweep.to_string(),
            param: key.param.to_string(),
            value: key.value,
            run_index: key.run_index,
            seed: key.seed,
            baseline: trace.baseline,
            config: key.config.clone(),
            status,
            omega_hat: finite(trace.omega_hat()),
            iterations: trace.n_iterations(),
            initial_omega: finite(trace.initial_omega),
            omega: trace.iterations.iter().map(|r| r.omega).collect(),
            feasible: status != RunStatus::Infeasible && trace.evaluation.feasible,
            total_solver_time_s: trace.total_solver_time_s,
            wall_time_s: trace.wall_time_s,
            error: None,
        }
    }

    pub fn failed(key: &RunKey, baseline: Baseline, error: String, wall_time_s: f64) -> Self {
        Self {
            sweep: key.sweep.to_string(),
            param: key.param.to_string(),
            value: key.value,
            run_index: key.run_index,
            seed: key.seed,
            baseline,
            config: key.config.clone(),
            status: RunStatus::Failed,
            omega_hat: None,
            iterations: 0,
            initial_omega: None,
            omega: Vec::new(),
            feasible: false,
            total_solver_time_s: 0.0,
            wall_time_s,
            error: Some(error),
        }
    }

    /// Enters the aggregates: finished with a feasible final design.
    pub fn counts(&self) -> bool {
        matches!(self.status, RunStatus::Converged | RunStatus::MaxIters) && self.feasible && self.omega_hat.is_some()
    }

    /// The starting value followed by the tracked value of every iteration.
    pub fn omega_sequence(&self) -> Vec<f64> {
        self.initial_omega.into_iter().chain(self.omega.iter().copied()).collect()
    }
}

pub fn write_records(records: &[RunRecord], path: &Path) -> Result<()> {
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<RunRecord>> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}
