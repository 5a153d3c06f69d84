//! Solver-agnostic convex programs: expressions over real/complex/Hermitian
//! variables, cone constraints, canonicalization and pluggable backends.

mod barrier;
mod canonical;
mod clarabel_backend;
mod expr;
mod program;

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use barrier::BarrierSolver;
pub use canonical::{CanonicalCone, CanonicalProgram, DUMP_FORMAT};
pub use clarabel_backend::ClarabelSolver;
pub use expr::{AffExpr, CAffExpr, ComplexVar, HermitianVar, RealVar, VarInfo, VarKind};
pub use program::{
    embed_hermitian, equal, extract_hermitian, hypograph_log, nonneg, psd_hermitian, smat, soc_of_quadratic, svec,
    svec_len, ConeBlock, ConeKind, ConicProgram, Constraint, ConstraintCheck, PointBuilder, Relaxation,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    /// Relative optimality and feasibility tolerance.
    pub tol: f64,
    pub max_iter: u32,
    pub verbose: bool,
    /// Backend scaling strategy; retries after a numerical-limit status
    /// walk through [`RETRY_SCALINGS`].
    pub scaling: Scaling,
}

/// Alternative numerical strategies for an interior-point backend. Backends
/// without such knobs ignore them.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scaling {
    #[default]
    Standard,
    /// Tighter iterative refinement of the KKT solves.
    Refined,
    /// Shorter steps toward the cone boundary.
    ShortSteps,
    /// No Ruiz equilibration.
    Unequilibrated,
}

pub const RETRY_SCALINGS: [Scaling; 3] = [Scaling::Refined, Scaling::ShortSteps, Scaling::Unequilibrated];

impl Default for SolverSettings {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 200, verbose: false, scaling: Scaling::Standard }
    }
}

/// Backend output in canonical coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSolution {
    pub status: SolveStatus,
    pub x: Option<Vec<f64>>,
    pub iterations: u32,
    pub detail: String,
}

pub trait ConicSolver: Send + Sync {
    fn name(&self) -> &'static str;
    fn solve_canonical(&self, program: &CanonicalProgram, settings: &SolverSettings) -> RawSolution;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Maximization-sense objective; present iff optimal.
    pub objective: Option<f64>,
    /// Flat primal vector; present iff optimal.
    pub primal: Option<Vec<f64>>,
    pub iterations: u32,
    pub wall_time_s: f64,
    pub detail: String,
}

impl SolveResult {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    /// Primal vector or a solver error naming the status.
    pub fn primal_or_err(&self) -> crate::Result<&[f64]> {
        self.primal.as_deref().ok_or_else(|| crate::Error::Solver { status: self.status, detail: self.detail.clone() })
    }
}

impl ConicProgram {
    /// Canonicalizes, solves, and re-checks every constraint at the returned
    /// point. An optimal result failing the re-check at `10 * tol` (scaled) is
    /// downgraded to numerical-limit, naming the worst constraint.
    pub fn solve(&self, solver: &dyn ConicSolver, settings: &SolverSettings) -> crate::Result<SolveResult> {
        let canonical = self.canonicalize()?;
        let start = Instant::now();
        let raw = solver.solve_canonical(&canonical, settings);
        let wall_time_s = start.elapsed().as_secs_f64();
        let mut result = SolveResult {
            status: raw.status,
            objective: None,
            primal: None,
            iterations: raw.iterations,
            wall_time_s,
            detail: raw.detail,
        };
        if raw.status == SolveStatus::Optimal {
            let x = raw.x.unwrap_or_default();
            let worst =
                self.check(&x).into_iter().max_by(|a, b| (a.violation / a.scale).total_cmp(&(b.violation / b.scale)));
            match worst {
                Some(w) if w.violation > 10.0 * settings.tol * w.scale => {
                    result.status = SolveStatus::NumericalLimit;
                    result.detail = format!(
                        "{}: re-check failed at {}[{}] (violation {:e}, scale {:e})",
                        solver.name(),
                        w.tag,
                        w.label,
                        w.violation,
                        w.scale
                    );
                }
                _ => {
                    result.objective = Some(self.objective().eval(&x));
                    result.primal = Some(x);
                }
            }
        }
        Ok(result)
    }

    /// [`ConicProgram::solve`], retried under each of [`RETRY_SCALINGS`] while
    /// the status is numerical-limit.
    pub fn solve_with_retry(&self, solver: &dyn ConicSolver, settings: &SolverSettings) -> crate::Result<SolveResult> {
        let mut result = self.solve(solver, settings)?;
        let mut details = Vec::new();
        for scaling in RETRY_SCALINGS {
            if result.status != SolveStatus::NumericalLimit {
                break;
            }
            details.push(std::mem::take(&mut result.detail));
            let retry = SolverSettings { scaling, max_iter: settings.max_iter.max(400), ..settings.clone() };
            let next = self.solve(solver, &retry)?;
            result = SolveResult {
                wall_time_s: result.wall_time_s + next.wall_time_s,
                iterations: result.iterations + next.iterations,
                ..next
            };
        }
        if result.status == SolveStatus::NumericalLimit {
            result.detail = format!("{} (earlier attempts: {})", result.detail, details.join("; "));
        }
        Ok(result)
    }
}
