use serde::{Deserialize, Serialize};

use crate::conic::{ConicSolver, SolverSettings};
use crate::error::{Error, Result};

use super::{tags, StepProgram, SubproblemSolution};

/// Constraint groups that receive restoration slacks.
pub const RESTORE_TAGS: [&str; 3] = [tags::BEAMPATTERN_FLOOR, tags::PRIVATE_SECRECY, tags::COMMON_BUDGET];

const INITIAL_PENALTY: f64 = 1e3;
const PENALTY_GROWTH: f64 = 10.0;
const MAX_ESCALATIONS: usize = 6;
const STALL_RATIO: f64 = 0.999;
/// Total slack below which the relaxed solution counts as feasible.
pub const SLACK_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Restoration {
    /// Last relaxed solution; `slack` holds its total slack.
    pub solution: SubproblemSolution,
    /// Total slack after each penalty level; nonincreasing by construction.
    pub slack_history: Vec<f64>,
    pub restored: bool,
}

impl Restoration {
    pub fn escalations(&self) -> usize {
        self.slack_history.len().saturating_sub(1)
    }

    /// The solution if restoration succeeded, otherwise [`Error::Infeasible`].
    pub fn into_result(self) -> Result<SubproblemSolution> {
        if self.restored {
            Ok(self.solution)
        } else {
            Err(Error::Infeasible { slack: self.solution.slack, escalations: self.escalations() })
        }
    }
}

/// Solves the step with penalized slacks on the floor, private-secrecy and
/// common-budget groups, raising the penalty tenfold until the slack
/// vanishes. Each round caps the total slack at the previous round's value.
pub fn restore_feasibility(
    step: &StepProgram,
    solver: &dyn ConicSolver,
    settings: &SolverSettings,
) -> Result<Restoration> {
    let mut penalty = INITIAL_PENALTY;
    let mut cap = None;
    let mut history = Vec::new();
    let mut last = None;
    for _ in 0..=MAX_ESCALATIONS {
        let mut prog = step.program.clone();
        let relax = prog.relax(&RESTORE_TAGS, penalty, cap)?;
        // Same maximizer with O(1) objective coefficients.
        let scaled = prog.objective().clone() * (1.0 / penalty);
        prog.maximize(scaled);
        let res = prog.solve_with_retry(solver, settings)?;
        if !res.is_optimal() {
            if let Some(sol) = last {
                return Ok(Restoration { solution: sol, slack_history: history, restored: false });
            }
            return Err(Error::Solver { status: res.status, detail: res.detail });
        }
        let x = res.primal_or_err()?;
        let total = relax.total(x).max(0.0);
        let sol = step.solution_from(&res, total)?;
        history.push(total);
        if total < SLACK_TOL {
            return Ok(Restoration { solution: sol, slack_history: history, restored: true });
        }
        last = Some(sol);
        // A stagnant total means the slack is structural at this expansion;
        // larger penalties cannot remove it.
        if cap.is_some_and(|c: f64| total > STALL_RATIO * c) {
            break;
        }
        cap = Some(total);
        penalty *= PENALTY_GROWTH;
    }
    let solution = last.expect("at least one restoration round");
    Ok(Restoration { solution, slack_history: history, restored: false })
}
