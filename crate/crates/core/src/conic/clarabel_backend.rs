use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};

use super::canonical::CanonicalProgram;
use super::program::ConeKind;
use super::{ConicSolver, RawSolution, Scaling, SolveStatus, SolverSettings};

/// Primal-dual interior-point backend (Clarabel).
#[derive(Debug, Clone, Copy, Default)]
pub struct ClarabelSolver;

fn cones_of(program: &CanonicalProgram) -> Vec<SupportedConeT<f64>> {
    let mut out: Vec<SupportedConeT<f64>> = Vec::with_capacity(program.cones.len());
    for c in &program.cones {
        match (c.kind, out.last_mut()) {
            (ConeKind::Zero, Some(SupportedConeT::ZeroConeT(d))) => *d += c.dim,
            (ConeKind::NonNeg, Some(SupportedConeT::NonnegativeConeT(d))) => *d += c.dim,
            (ConeKind::Zero, _) => out.push(SupportedConeT::ZeroConeT(c.dim)),
            (ConeKind::NonNeg, _) => out.push(SupportedConeT::NonnegativeConeT(c.dim)),
            (ConeKind::Soc, _) => out.push(SupportedConeT::SecondOrderConeT(c.dim)),
            (ConeKind::Exp, _) => out.push(SupportedConeT::ExponentialConeT()),
            (ConeKind::Psd { n }, _) => out.push(SupportedConeT::PSDTriangleConeT(n)),
        }
    }
    out
}

impl ConicSolver for ClarabelSolver {
    fn name(&self) -> &'static str {
        "clarabel"
    }

    fn solve_canonical(&self, program: &CanonicalProgram, settings: &SolverSettings) -> RawSolution {
        let n = program.n;
        let m = program.m();
        let p = CscMatrix::<f64>::zeros((n, n));
        let (rows, cols, vals) = program.a.iter().fold(
            (
                Vec::with_capacity(program.a.len()),
                Vec::with_capacity(program.a.len()),
                Vec::with_capacity(program.a.len()),
            ),
            |(mut r, mut c, mut v), &(i, j, x)| {
                r.push(i);
                c.push(j);
                v.push(x);
                (r, c, v)
            },
        );
        let a = CscMatrix::new_from_triplets(m, n, rows, cols, vals);
        let cones = cones_of(program);

        let mut builder = DefaultSettingsBuilder::default();
        builder
            .verbose(settings.verbose)
            .max_iter(settings.max_iter)
            .tol_gap_abs(settings.tol)
            .tol_gap_rel(settings.tol)
            .tol_feas(settings.tol)
            .tol_ktratio(settings.tol * 1e2);
        match settings.scaling {
            Scaling::Standard => {}
            Scaling::Refined => {
                builder
                    .iterative_refinement_reltol(1e-14)
                    .iterative_refinement_abstol(1e-14)
                    .iterative_refinement_max_iter(30);
            }
            Scaling::ShortSteps => {
                builder.max_step_fraction(0.9);
            }
            Scaling::Unequilibrated => {
                builder.equilibrate_enable(false);
            }
        }
        let solver_settings = match builder.build() {
            Ok(s) => s,
            Err(e) => {
                return RawSolution {
                    status: SolveStatus::NumericalLimit,
                    x: None,
                    iterations: 0,
                    detail: format!("clarabel settings: {e}"),
                }
            }
        };
        let mut solver = match DefaultSolver::new(&p, &program.c, &a, &program.b, &cones, solver_settings) {
            Ok(s) => s,
            Err(e) => {
                return RawSolution {
                    status: SolveStatus::NumericalLimit,
                    x: None,
                    iterations: 0,
                    detail: format!("clarabel setup: {e}"),
                }
            }
        };
        solver.solve();
        let sol = &solver.solution;
        let status = match sol.status {
            // Reduced-accuracy solutions still pass through the caller's
            // primal re-check, which downgrades them on any real violation.
            SolverStatus::Solved | SolverStatus::AlmostSolved => SolveStatus::Optimal,
            SolverStatus::PrimalInfeasible => SolveStatus::Infeasible,
            SolverStatus::DualInfeasible => SolveStatus::Unbounded,
            _ => SolveStatus::NumericalLimit,
        };
        RawSolution {
            status,
            x: (status == SolveStatus::Optimal).then(|| sol.x.clone()),
            iterations: sol.iterations,
            detail: format!(
                "clarabel: {:?} after {} iterations (gap {:e}/{:e}, residuals {:e}/{:e})",
                sol.status, sol.iterations, sol.obj_val, sol.obj_val_dual, sol.r_prim, sol.r_dual
            ),
        }
    }
}
