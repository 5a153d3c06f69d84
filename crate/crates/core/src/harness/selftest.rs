//! Invariant suites shared by the `selftest` subcommand and the acceptance
//! target. Each suite reports the worst observed margin, not just a verdict.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{sample_channels, steering_vector, ChannelSet};
use crate::conic::{CanonicalProgram, ConicSolver, SolveStatus, SolverSettings};
use crate::driver::{program_at, run_ao, AoOptions, HalfStep, FEASIBILITY_TAU};
use crate::linalg::{complex_gaussian, quad_form, CMatrix, CVector, C64};
use crate::metrics::{stream_rates, transmit_power, DesignPoint, StarProfile};
use crate::scenario::{sample_geometry, stream_rng, SystemConfig};
use crate::subproblems::{
    apply_baseline, build_v_step, build_w_step, initial_design, max_min_beampattern, sensing_only, Baseline,
    InitPolicy, StepInputs,
};
use crate::surrogate::{mm_coefficients, quadratic_minorant, surrogate_rate, tangent_log, Stream};

/// Slack allowed by the minorant checks, in bits.
pub const MINORANT_SLACK: f64 = 1e-9;
/// Relative accuracy of the sensing closed forms.
pub const CLOSED_FORM_TOL: f64 = 1e-6;
/// Largest tracked decrease accepted as monotone.
pub const MONOTONE_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub wall_time_s: f64,
}

fn outcome(name: &str, start: Instant, passed: bool, detail: String) -> SuiteOutcome {
    SuiteOutcome { name: name.to_string(), passed, detail, wall_time_s: start.elapsed().as_secs_f64() }
}

fn desk_channels(seed: u64) -> crate::Result<ChannelSet> {
    let cfg = SystemConfig::desk();
    sample_channels(&cfg, &sample_geometry(&cfg, seed)?, seed)
}

/// Random design with a rank-2 AN covariance and a random energy-split
/// surface, scaled to total power `power`.
pub fn random_design(ch: &ChannelSet, seed: u64, power: f64) -> DesignPoint {
    let mut rng = stream_rng(seed, 500);
    let n_b = ch.n_bs();
    let mut gauss = |n: usize| CVector::from_fn(n, |_, _| complex_gaussian(&mut rng));
    let a = CMatrix::from_columns(&[gauss(n_b), gauss(n_b)]);
    let mut dp = DesignPoint {
        an_covariance: &a * a.adjoint(),
        w_common: gauss(n_b),
        w_private: (0..ch.n_users()).map(|_| gauss(n_b)).collect(),
        star: StarProfile::random_split(ch.n_ris(), seed),
        rate_split: vec![0.1; ch.n_users()],
    };
    let scale = (power / transmit_power(&dp)).sqrt();
    dp.an_covariance *= C64::from(scale * scale);
    dp.w_common *= C64::from(scale);
    for w in dp.w_private.iter_mut() {
        *w *= C64::from(scale);
    }
    dp
}

/// Moves every transmit and surface quantity of `base` by `t` along
/// `other`; `R_s` mixes convexly so it stays PSD.
fn blend(base: &DesignPoint, other: &DesignPoint, t: f64) -> DesignPoint {
    let tc = C64::from(t);
    let mut dp = base.clone();
    dp.an_covariance = &base.an_covariance * C64::from(1.0 - t) + &other.an_covariance * tc;
    dp.w_common += &other.w_common * tc;
    for (w, o) in dp.w_private.iter_mut().zip(&other.w_private) {
        *w += o * tc;
    }
    dp.star.v_t += &other.star.v_t * tc;
    dp.star.v_r += &other.star.v_r * tc;
    dp
}

/// MM tightness at `n_expansions` random expansion points and minorant
/// dominance at `n_samples` designs per expansion (half far, half nearby),
/// plus the tangent and quadratic dominance scans.
pub fn surrogate_suite(n_expansions: usize, n_samples: usize) -> SuiteOutcome {
    let start = Instant::now();
    let name = "surrogate";
    let cfg = SystemConfig::desk();
    let power = cfg.power_budget_w();
    let mut worst_tight = 0.0_f64;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut rng = stream_rng(cfg.master_seed, 501);
    for e in 0..n_expansions {
        let ch = match desk_channels(e as u64 % 5) {
            Ok(ch) => ch,
            Err(err) => return outcome(name, start, false, format!("channel draw failed: {err}")),
        };
        let level = power * 10f64.powf(-3.0 * rng.random::<f64>());
        let bar = random_design(&ch, 10_000 + e as u64, level);
        let coeffs = match mm_coefficients(&ch, &bar) {
            Ok(c) => c,
            Err(err) => return outcome(name, start, false, format!("expansion {e}: {err}")),
        };
        let rates = stream_rates(&ch, &bar);
        for k in 0..ch.n_users() {
            worst_tight = worst_tight
                .max((surrogate_rate(&coeffs, &ch, &bar, Stream::Common, k) - rates.common_rate[k]).abs())
                .max((surrogate_rate(&coeffs, &ch, &bar, Stream::Private, k) - rates.private_rate[k]).abs());
        }
        for s in 0..n_samples {
            let seed = 1_000_000 + (e * n_samples + s) as u64;
            let other = random_design(&ch, seed, power * 10f64.powf(-4.0 * rng.random::<f64>()));
            let dp = if s % 2 == 0 { other } else { blend(&bar, &other, 10f64.powf(-4.0 * rng.random::<f64>())) };
            let r = stream_rates(&ch, &dp);
            for k in 0..ch.n_users() {
                worst_excess = worst_excess
                    .max(surrogate_rate(&coeffs, &ch, &dp, Stream::Common, k) - r.common_rate[k])
                    .max(surrogate_rate(&coeffs, &ch, &dp, Stream::Private, k) - r.private_rate[k]);
            }
        }
    }

    let mut worst_tangent = f64::NEG_INFINITY;
    for i in 1..=200 {
        for j in 1..=200 {
            let (d, bar) = (i as f64 * 0.05, j as f64 * 0.05);
            match tangent_log(d, bar) {
                Ok(t) => worst_tangent = worst_tangent.max(d.log2() - t),
                Err(err) => return outcome(name, start, false, format!("tangent at {bar}: {err}")),
            }
        }
    }
    let mut worst_quadratic = f64::NEG_INFINITY;
    for t in 0..1000 {
        let n = 1 + t % 8;
        let mut gauss = || CVector::from_fn(n, |_, _| complex_gaussian(&mut rng));
        let (w, w_bar, g) = (gauss(), gauss(), gauss());
        let exact = crate::linalg::inner(&g, &w).norm_sqr();
        worst_quadratic = worst_quadratic.max(quadratic_minorant(&w, &w_bar, &g) - exact);
    }

    let passed = worst_tight <= MINORANT_SLACK
        && worst_excess <= MINORANT_SLACK
        && worst_tangent <= MINORANT_SLACK
        && worst_quadratic <= 1e-10;
    let detail = format!(
        "{n_expansions} expansions x {n_samples} samples: max |tightness gap| {worst_tight:.2e}, max excess {worst_excess:.2e}; \
         tangent grid max excess {worst_tangent:.2e}; quadratic max excess {worst_quadratic:.2e}"
    );
    outcome(name, start, passed, detail)
}

/// Sensing benchmark against its hand solutions: one target gives
/// `P N_B` for `N_B` in {2, 4, 8}; targets at +-30 deg with two antennas and
/// unit power give 1 each.
pub fn sensing_suite(solver: &dyn ConicSolver, settings: &SolverSettings) -> SuiteOutcome {
    let start = Instant::now();
    let name = "sensing-closed-forms";
    let spacing = 0.5;
    let mut worst = 0.0_f64;
    let mut notes = Vec::new();
    let mut cases: Vec<(Vec<f64>, usize, f64, f64)> =
        [2usize, 4, 8].iter().map(|&n| (vec![30f64.to_radians()], n, 1.0, n as f64)).collect();
    cases.push((vec![30f64.to_radians(), (-30f64).to_radians()], 2, 1.0, 1.0));
    for (angles, n_b, power, expected) in cases {
        let steer: Vec<CVector> = angles.iter().map(|&t| steering_vector(t, n_b, spacing)).collect();
        let r = match max_min_beampattern(&steer, power, solver, settings) {
            Ok(r) => r,
            Err(e) => return outcome(name, start, false, format!("N_B = {n_b}: {e}")),
        };
        for a in &steer {
            let rel = (quad_form(&r, a) - expected).abs() / expected;
            worst = worst.max(rel);
        }
        notes.push(format!("K_s={} N_B={n_b}", angles.len()));
    }
    let passed = worst <= CLOSED_FORM_TOL;
    outcome(name, start, passed, format!("{}: max relative error {worst:.2e}", notes.join(", ")))
}

/// Every W- and V-step built at a feasible start is satisfied by the start
/// itself with tight auxiliaries.
pub fn tight_expansion_suite(solver: &dyn ConicSolver, settings: &SolverSettings, seeds: u64) -> SuiteOutcome {
    let start = Instant::now();
    let name = "tight-expansion";
    let cfg = SystemConfig::desk();
    let mut worst = 0.0_f64;
    for seed in 0..seeds {
        let result = (|| -> crate::Result<f64> {
            let ch = desk_channels(seed)?;
            let consts = sensing_only(&ch, &cfg, solver, settings)?;
            let zero = DesignPoint::zeros(ch.n_bs(), ch.n_ris(), ch.n_users());
            let (restricted, plan) = apply_baseline(&zero, Baseline::RsmaStarOpt, seed);
            let inp = StepInputs { channels: &ch, consts: &consts, config: &cfg, rsma: plan.rsma };
            let dp = initial_design(&inp, restricted.star, InitPolicy::NullSteering);
            let w = build_w_step(&inp, &dp)?;
            let v = build_v_step(&inp, &dp)?;
            Ok(w.program.max_violation(&w.tight_point(&ch, &dp)).max(v.program.max_violation(&v.tight_point(&ch, &dp))))
        })();
        match result {
            Ok(v) => worst = worst.max(v),
            Err(e) => return outcome(name, start, false, format!("seed {seed}: {e}")),
        }
    }
    outcome(name, start, worst < 1e-9, format!("{seeds} desk seeds: max scaled violation {worst:.2e}"))
}

/// One short desk run twice: monotone, feasible and bitwise repeatable.
pub fn ao_smoke_suite(solver: &dyn ConicSolver, settings: &SolverSettings) -> SuiteOutcome {
    let start = Instant::now();
    let name = "ao-smoke";
    let cfg = SystemConfig { max_iters: 5, ..SystemConfig::desk() };
    let opts = AoOptions { settings: settings.clone(), ..AoOptions::default() };
    let run = || -> crate::Result<_> {
        let ch = desk_channels(0)?;
        run_ao(&ch, &cfg, Baseline::RsmaStarOpt, 0, solver, &opts)
    };
    match (run(), run()) {
        (Ok(a), Ok(b)) => {
            let repeatable = a.omega_sequence() == b.omega_sequence() && a.design == b.design;
            let drop = a.max_drop();
            let passed = repeatable && drop <= MONOTONE_SLACK && a.evaluation.feasible;
            let detail = format!(
                "{} iterations, omega_hat {:.4}, max drop {drop:.1e}, feasible at {FEASIBILITY_TAU:e}: {}, repeatable: {repeatable}",
                a.n_iterations(),
                a.omega_hat(),
                a.evaluation.feasible
            );
            outcome(name, start, passed, detail)
        }
        (Err(e), _) | (_, Err(e)) => outcome(name, start, false, e.to_string()),
    }
}

/// Relative gap `|a - b| / max(1, |a|, |b|)`.
pub fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}

/// One program of the differential corpus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProgramDraw {
    pub seed: u64,
    pub baseline: Baseline,
    pub step: HalfStep,
    pub iterations: usize,
}

/// `n` random (seed, baseline, step, iteration) draws alternating W and V;
/// V-steps only come from baselines that optimize the surface.
pub fn program_draws(n: usize, master_seed: u64) -> Vec<ProgramDraw> {
    let movable = [Baseline::RsmaStarOpt, Baseline::RsmaRisConv, Baseline::SdmaStarOpt];
    let mut rng = stream_rng(master_seed, 502);
    (0..n)
        .map(|i| {
            let (step, pool): (HalfStep, &[Baseline]) =
                if i % 2 == 0 { (HalfStep::W, &Baseline::ALL) } else { (HalfStep::V, &movable) };
            ProgramDraw {
                seed: rng.random_range(0..1000),
                baseline: pool[rng.random_range(0..pool.len())],
                step,
                iterations: rng.random_range(0..4),
            }
        })
        .collect()
}

/// Dumps each drawn desk program, parses the text back, and solves it with
/// both `primary` and `reference`; the objectives must agree within `tol`.
pub fn differential_suite(
    primary: &dyn ConicSolver,
    reference: &dyn ConicSolver,
    settings: &SolverSettings,
    draws: &[ProgramDraw],
    tol: f64,
) -> SuiteOutcome {
    let start = Instant::now();
    let name = "differential";
    let cfg = SystemConfig::desk();
    let opts = AoOptions { settings: settings.clone(), ..AoOptions::default() };
    let mut worst = 0.0_f64;
    let mut worst_at = String::new();
    for d in draws {
        let result = (|| -> crate::Result<f64> {
            let ch = sample_channels(&cfg, &sample_geometry(&cfg, d.seed)?, d.seed)?;
            let consts = sensing_only(&ch, &cfg, primary, settings)?;
            let step = program_at(&ch, &cfg, &consts, d.baseline, d.seed, d.step, d.iterations, primary, &opts)?;
            let text = step.program.canonicalize()?.dump();
            let parsed = CanonicalProgram::parse(&text)?;
            let objective = |solver: &dyn ConicSolver| -> crate::Result<f64> {
                let raw = solver.solve_canonical(&parsed, settings);
                match (raw.status, raw.x) {
                    (SolveStatus::Optimal, Some(x)) => Ok(parsed.objective_at(&x)),
                    (status, _) => Err(crate::Error::Solver { status, detail: raw.detail }),
                }
            };
            Ok(relative_gap(objective(primary)?, objective(reference)?))
        })();
        match result {
            Ok(gap) if gap > worst || worst_at.is_empty() => {
                worst = gap;
                worst_at = format!("{d:?}");
            }
            Ok(_) => {}
            Err(e) => return outcome(name, start, false, format!("{d:?}: {e}")),
        }
    }
    let detail = format!(
        "{} programs, {} vs {}: max relative objective gap {worst:.2e} at {worst_at}",
        draws.len(),
        primary.name(),
        reference.name()
    );
    outcome(name, start, worst <= tol, detail)
}

/// Every suite at its full size.
pub fn run_selftests(solver: &dyn ConicSolver, settings: &SolverSettings) -> Vec<SuiteOutcome> {
    vec![
        surrogate_suite(100, 1000),
        sensing_suite(solver, settings),
        tight_expansion_suite(solver, settings, 5),
        ao_smoke_suite(solver, settings),
    ]
}
