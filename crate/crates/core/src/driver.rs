//! The alternating loop: W-step, then V-step (unless the baseline freezes
//! the surface), with the expansion point refreshed after every half-step.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::conic::{ConicSolver, SolveStatus, SolverSettings};
use crate::error::{Error, Result};
use crate::metrics::{
    check_feasibility, sensing_report, DesignPoint, RateReport, SensingConstants, SensingReport, Slack,
};
use crate::scenario::SystemConfig;
use crate::subproblems::{
    apply_baseline, build_v_step, build_v_step_conventional, build_w_step, initial_design, restore_feasibility,
    sensing_only, Baseline, BuildPlan, InitPolicy, StepInputs, StepProgram, SubproblemSolution, VStepKind,
};

/// Feasibility tolerance of the final design against the original problem.
pub const FEASIBILITY_TAU: f64 = 1e-5;
/// Oracle decrease that triggers a rollback; larger than solver noise.
const ROLLBACK_DROP: f64 = 1e-8;
/// Tolerance for accepting an initial point without restoration.
const INIT_TAU: f64 = 1e-9;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AoOptions {
    pub settings: SolverSettings,
    pub init: InitPolicy,
    /// Re-expansions allowed while restoring an infeasible start.
    pub max_restore_rounds: usize,
    /// Overrides `config.tol`; `f64::INFINITY` stops after one iteration.
    pub tol: Option<f64>,
    /// Overrides `config.max_iters`.
    pub max_iters: Option<usize>,
}

impl Default for AoOptions {
    fn default() -> Self {
        Self {
            settings: SolverSettings::default(),
            init: InitPolicy::default(),
            max_restore_rounds: 8,
            tol: None,
            max_iters: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TerminalStatus {
    Converged,
    MaxIters,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Surrogate objective of the W-step.
    pub omega_w: f64,
    /// Surrogate objective of the V-step; `None` when the surface is frozen.
    pub omega_v: Option<f64>,
    /// The tracked value: `omega_v`, or `omega_w` for frozen surfaces.
    pub omega: f64,
    /// Oracle min-secrecy of the iterate.
    pub omega_oracle: f64,
    pub status_w: SolveStatus,
    pub status_v: Option<SolveStatus>,
    /// Restoration was needed inside this iteration.
    pub restored: bool,
    pub wall_time_s: f64,
    pub max_violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub report: RateReport,
    pub sensing: SensingReport,
    /// `min_k (r_k + R_p,k^sec)` with the split scaled into the common budget.
    pub omega_hat: f64,
    pub feasible: bool,
    pub worst_slack: Option<Slack>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmTrace {
    pub baseline: Baseline,
    pub seed: u64,
    pub plan: BuildPlan,
    pub initial_omega: f64,
    /// Restoration rounds spent before the first iteration.
    pub init_restore_rounds: usize,
    pub iterations: Vec<IterationRecord>,
    pub status: TerminalStatus,
    pub rolled_back: bool,
    pub design: DesignPoint,
    pub evaluation: Evaluation,
    pub total_solver_time_s: f64,
    pub wall_time_s: f64,
}

impl AlgorithmTrace {
    pub fn n_iterations(&self) -> usize {
        self.iterations.len()
    }

    pub fn omega_hat(&self) -> f64 {
        self.evaluation.omega_hat
    }

    /// `initial_omega` followed by the tracked value of every iteration.
    pub fn omega_sequence(&self) -> Vec<f64> {
        std::iter::once(self.initial_omega).chain(self.iterations.iter().map(|r| r.omega)).collect()
    }

    /// Largest decrease between consecutive tracked values.
    pub fn max_drop(&self) -> f64 {
        self.omega_sequence().windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max)
    }
}

/// Oracle evaluation. A rate split exceeding the common secrecy budget is
/// scaled down before it is credited.
pub fn evaluate_design(
    channels: &ChannelSet,
    dp: &DesignPoint,
    consts: &SensingConstants,
    config: &SystemConfig,
) -> Evaluation {
    let report = RateReport::evaluate(channels, dp);
    let sensing = sensing_report(channels, dp, consts);
    let ledger = check_feasibility(dp, &report, &sensing, config);
    let budget = report.secrecy_common.iter().copied().fold(f64::INFINITY, f64::min).max(0.0);
    let split: f64 = dp.rate_split.iter().map(|r| r.max(0.0)).sum();
    let shrink = if split > budget { budget / split } else { 1.0 };
    let omega_hat = report
        .secrecy_private
        .iter()
        .zip(&dp.rate_split)
        .map(|(s, r)| s + r.max(0.0) * shrink)
        .fold(f64::INFINITY, f64::min);
    Evaluation {
        feasible: ledger.is_feasible(FEASIBILITY_TAU),
        worst_slack: ledger.worst(),
        report,
        sensing,
        omega_hat,
    }
}

struct Loop<'a> {
    inp: StepInputs<'a>,
    plan: BuildPlan,
    solver: &'a dyn ConicSolver,
    settings: &'a SolverSettings,
    solver_time: f64,
}

enum StepOutcome {
    Solved(Box<SubproblemSolution>, bool),
    Infeasible,
}

impl Loop<'_> {
    fn omega_hat(&self, dp: &DesignPoint) -> f64 {
        evaluate_design(self.inp.channels, dp, self.inp.consts, self.inp.config).omega_hat
    }

    fn build(&self, w_step: bool, dp: &DesignPoint) -> Result<StepProgram> {
        if w_step {
            return build_w_step(&self.inp, dp);
        }
        match self.plan.v_step {
            VStepKind::Star => build_v_step(&self.inp, dp),
            VStepKind::Conventional => build_v_step_conventional(&self.inp, dp),
            VStepKind::Frozen => unreachable!("frozen surfaces skip the V-step"),
        }
    }

    /// Solves one step. A step certified infeasible, or one the solver could
    /// not settle, falls back to restoration; the original error surfaces if
    /// restoration fails too.
    fn step(&mut self, w_step: bool, dp: &DesignPoint) -> Result<StepOutcome> {
        let step = self.build(w_step, dp)?;
        match step.solve(self.solver, self.settings) {
            Ok(sol) => {
                self.solver_time += sol.wall_time_s;
                Ok(StepOutcome::Solved(Box::new(sol), false))
            }
            Err(e @ Error::Solver { status: SolveStatus::Infeasible | SolveStatus::NumericalLimit, .. }) => {
                let certified = matches!(e, Error::Solver { status: SolveStatus::Infeasible, .. });
                let rest = match restore_feasibility(&step, self.solver, self.settings) {
                    Ok(rest) => rest,
                    Err(_) if !certified => return Err(e),
                    Err(other) => return Err(other),
                };
                self.solver_time += rest.solution.wall_time_s;
                match (rest.restored, certified) {
                    (true, _) => Ok(StepOutcome::Solved(Box::new(rest.solution), true)),
                    (false, true) => Ok(StepOutcome::Infeasible),
                    (false, false) => Err(e),
                }
            }
            Err(e) => Err(e),
        }
    }

    /// Feasible for the original problem and for the surrogate programs,
    /// whose common budget is not clamped at zero.
    fn feasible(&self, dp: &DesignPoint) -> bool {
        start_feasible(&self.inp, dp, INIT_TAU)
    }

    /// Restores an infeasible start by re-expanding the W-step at each
    /// relaxed solution. `None` when the slack never vanishes.
    fn restore_start(&mut self, mut dp: DesignPoint, rounds: usize) -> Result<(Option<DesignPoint>, usize)> {
        for round in 1..=rounds {
            let step = build_w_step(&self.inp, &dp)?;
            let rest = restore_feasibility(&step, self.solver, self.settings)?;
            self.solver_time += rest.solution.wall_time_s;
            dp = rest.solution.design;
            if rest.restored {
                return Ok((Some(dp), round));
            }
        }
        Ok((None, rounds))
    }
}

/// Original-problem feasibility plus a nonnegative unclamped common secrecy
/// budget when the common stream is active.
pub(crate) fn start_feasible(inp: &StepInputs, dp: &DesignPoint, tau: f64) -> bool {
    let rep = RateReport::evaluate(inp.channels, dp);
    let sens = sensing_report(inp.channels, dp, inp.consts);
    let worst_common = rep.worst_eaves_common();
    let budget_ok = !inp.rsma || rep.common_rate.iter().all(|r| r - worst_common >= -tau);
    budget_ok && check_feasibility(dp, &rep, &sens, inp.config).is_feasible(tau)
}

/// Sensing benchmark plus the alternating loop for one channel realization.
/// `seed` draws the baseline's surface profile.
pub fn run_ao(
    channels: &ChannelSet,
    config: &SystemConfig,
    baseline: Baseline,
    seed: u64,
    solver: &dyn ConicSolver,
    opts: &AoOptions,
) -> Result<AlgorithmTrace> {
    let consts = sensing_only(channels, config, solver, &opts.settings)?;
    run_ao_with(channels, config, &consts, baseline, seed, solver, opts)
}

/// [`run_ao`] with precomputed sensing constants.
pub fn run_ao_with(
    channels: &ChannelSet,
    config: &SystemConfig,
    consts: &SensingConstants,
    baseline: Baseline,
    seed: u64,
    solver: &dyn ConicSolver,
    opts: &AoOptions,
) -> Result<AlgorithmTrace> {
    let start = Instant::now();
    let tol = opts.tol.unwrap_or(config.tol);
    let max_iters = opts.max_iters.unwrap_or(config.max_iters).max(1);
    let zero = DesignPoint::zeros(channels.n_bs(), channels.n_ris(), channels.n_users());
    let (restricted, plan) = apply_baseline(&zero, baseline, seed);
    let inp = StepInputs { channels, consts, config, rsma: plan.rsma };
    let mut lp = Loop { inp, plan, solver, settings: &opts.settings, solver_time: 0.0 };

    let mut dp = initial_design(&inp, restricted.star, opts.init);
    let mut init_rounds = 0;
    if !lp.feasible(&dp) {
        let (restored, rounds) = lp.restore_start(dp.clone(), opts.max_restore_rounds)?;
        init_rounds = rounds;
        match restored {
            Some(p) => dp = p,
            None => {
                return Ok(finish(
                    &lp,
                    baseline,
                    seed,
                    dp,
                    f64::NAN,
                    init_rounds,
                    Vec::new(),
                    TerminalStatus::Infeasible,
                    false,
                    start,
                ));
            }
        }
    }

    let initial_omega = lp.omega_hat(&dp);
    let mut prev_oracle = initial_omega;
    let mut prev_omega = initial_omega;
    let mut records = Vec::new();
    let mut status = TerminalStatus::MaxIters;
    let mut rolled_back = false;
    for iteration in 1..=max_iters {
        let t0 = Instant::now();
        let (w, mut restored) = match lp.step(true, &dp)? {
            StepOutcome::Solved(s, r) => (*s, r),
            StepOutcome::Infeasible => {
                status = TerminalStatus::Infeasible;
                break;
            }
        };
        let mut next = w.design.clone();
        let mut max_violation = w.max_violation;
        let mut v_sol = None;
        if plan.v_step != VStepKind::Frozen {
            match lp.step(false, &next)? {
                StepOutcome::Solved(s, r) => {
                    restored |= r;
                    max_violation = max_violation.max(s.max_violation);
                    next = s.design.clone();
                    v_sol = Some(s);
                }
                StepOutcome::Infeasible => {
                    status = TerminalStatus::Infeasible;
                    break;
                }
            }
        }
        let oracle = lp.omega_hat(&next);
        if oracle < prev_oracle - ROLLBACK_DROP {
            rolled_back = true;
            status = TerminalStatus::Converged;
            break;
        }
        let omega = v_sol.as_ref().map_or(w.omega, |s| s.omega);
        records.push(IterationRecord {
            iteration,
            omega_w: w.omega,
            omega_v: v_sol.as_ref().map(|s| s.omega),
            omega,
            omega_oracle: oracle,
            status_w: w.status,
            status_v: v_sol.as_ref().map(|s| s.status),
            restored,
            wall_time_s: t0.elapsed().as_secs_f64(),
            max_violation,
        });
        dp = next;
        prev_oracle = oracle;
        let delta = (omega - prev_omega).abs();
        prev_omega = omega;
        if delta <= tol {
            status = TerminalStatus::Converged;
            break;
        }
    }
    Ok(finish(&lp, baseline, seed, dp, initial_omega, init_rounds, records, status, rolled_back, start))
}

/// Which half-step [`program_at`] builds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HalfStep {
    W,
    V,
}

impl std::str::FromStr for HalfStep {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "w" | "W" => Ok(HalfStep::W),
            "v" | "V" => Ok(HalfStep::V),
            other => Err(Error::Unknown { kind: "step", name: other.to_string() }),
        }
    }
}

/// The subproblem the loop builds after `iterations` full iterations: at the
/// initial design for 0, else at the design the run reached (which may stop
/// earlier on convergence).
#[allow(clippy::too_many_arguments)]
pub fn program_at(
    channels: &ChannelSet,
    config: &SystemConfig,
    consts: &SensingConstants,
    baseline: Baseline,
    seed: u64,
    step: HalfStep,
    iterations: usize,
    solver: &dyn ConicSolver,
    opts: &AoOptions,
) -> Result<StepProgram> {
    let zero = DesignPoint::zeros(channels.n_bs(), channels.n_ris(), channels.n_users());
    let (restricted, plan) = apply_baseline(&zero, baseline, seed);
    let inp = StepInputs { channels, consts, config, rsma: plan.rsma };
    let dp = if iterations == 0 {
        initial_design(&inp, restricted.star, opts.init)
    } else {
        let opts = AoOptions { max_iters: Some(iterations), tol: Some(0.0), ..opts.clone() };
        run_ao_with(channels, config, consts, baseline, seed, solver, &opts)?.design
    };
    let lp = Loop { inp, plan, solver, settings: &opts.settings, solver_time: 0.0 };
    match (step, plan.v_step) {
        (HalfStep::W, _) => lp.build(true, &dp),
        (HalfStep::V, VStepKind::Frozen) => {
            Err(Error::InvalidConfig(format!("baseline {baseline} freezes the surface; it has no V-step")))
        }
        (HalfStep::V, _) => lp.build(false, &dp),
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    lp: &Loop<'_>,
    baseline: Baseline,
    seed: u64,
    design: DesignPoint,
    initial_omega: f64,
    init_restore_rounds: usize,
    iterations: Vec<IterationRecord>,
    status: TerminalStatus,
    rolled_back: bool,
    start: Instant,
) -> AlgorithmTrace {
    let evaluation = evaluate_design(lp.inp.channels, &design, lp.inp.consts, lp.inp.config);
    AlgorithmTrace {
        baseline,
        seed,
        plan: lp.plan,
        initial_omega,
        init_restore_rounds,
        iterations,
        status,
        rolled_back,
        design,
        evaluation,
        total_solver_time_s: lp.solver_time,
        wall_time_s: start.elapsed().as_secs_f64(),
    }
}
