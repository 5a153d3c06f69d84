//! Concrete convex programs of the alternating scheme: the sensing-only
//! benchmark, the beamforming step (W-step), the surface step (V-step) and its
//! conventional-RIS restriction, plus baseline plans, initialization and
//! slack-based feasibility restoration.
//!
//! Interference levels `delta_j` and eavesdrop slacks `s_{j,b}` are carried in
//! units of `kappa_j = 1 + D_j^opt` so that all program rows are O(1).

mod init;
mod restore;
mod sensing;
mod vstep;
mod wstep;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::conic::{
    hypograph_log, nonneg, soc_of_quadratic, AffExpr, ComplexVar, ConicProgram, ConicSolver, HermitianVar, RealVar,
    SolveResult, SolveStatus, SolverSettings,
};
use crate::error::{Error, Result};
use crate::linalg::{CVector, C64};
use crate::metrics::{target_interference, DesignPoint, RateReport, SensingConstants, StarMode, StarProfile};
use crate::scenario::SystemConfig;
use crate::surrogate::AuxState;

pub use init::{initial_design, InitPolicy};
pub use restore::{restore_feasibility, Restoration, RESTORE_TAGS};
pub use sensing::{max_min_beampattern, sensing_only};
pub use vstep::{build_v_step, build_v_step_conventional};
pub use wstep::build_w_step;

pub mod tags {
    pub const COMMON_RATE: &str = "common_rate_surrogate";
    pub const PRIVATE_RATE: &str = "private_rate_surrogate";
    pub const LOG_TANGENT: &str = "log_delta_tangent";
    pub const EAVES_COMMON: &str = "eavesdrop_common";
    pub const EAVES_PRIVATE: &str = "eavesdrop_private";
    pub const BEAMPATTERN_MINORANT: &str = "beampattern_minorant";
    pub const BEAMPATTERN_FIXED: &str = "beampattern_fixed";
    pub const BEAMPATTERN_FLOOR: &str = "beampattern_floor";
    pub const SECRECY_TOTAL: &str = "secrecy_total";
    pub const PRIVATE_SECRECY: &str = "private_secrecy_nonneg";
    pub const COMMON_BUDGET: &str = "common_rate_budget";
    pub const RATE_NONNEG: &str = "rate_split_nonneg";
    pub const POWER: &str = "power_budget";
    pub const AN_PSD: &str = "an_covariance_psd";
    pub const STAR_ENERGY: &str = "star_energy";
    pub const STAR_FIXED: &str = "star_fixed_entry";
    pub const CONV_ZERO_T: &str = "conventional_zero_t";
    pub const CONV_ZERO_R: &str = "conventional_zero_r";
    pub const SENSING_GAIN: &str = "sensing_gain";
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Baseline {
    RsmaStarOpt,
    RsmaRisConv,
    RsmaStarRand,
    RsmaNoRis,
    SdmaStarOpt,
}

impl Baseline {
    pub const ALL: [Baseline; 5] = [
        Baseline::RsmaStarOpt,
        Baseline::RsmaRisConv,
        Baseline::RsmaStarRand,
        Baseline::RsmaNoRis,
        Baseline::SdmaStarOpt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Baseline::RsmaStarOpt => "rsma-star-opt",
            Baseline::RsmaRisConv => "rsma-ris-conv",
            Baseline::RsmaStarRand => "rsma-star-rand",
            Baseline::RsmaNoRis => "rsma-no-ris",
            Baseline::SdmaStarOpt => "sdma-star-opt",
        }
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Baseline {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Baseline::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::Unknown { kind: "baseline", name: s.to_string() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VStepKind {
    Star,
    Conventional,
    /// Surface profile held fixed; the V-step is skipped.
    Frozen,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildPlan {
    pub baseline: Baseline,
    /// Common stream present.
    pub rsma: bool,
    pub v_step: VStepKind,
}

/// Restricts `dp` to the baseline's feasible set and returns the build plan.
/// `seed` draws the random surface profiles.
pub fn apply_baseline(dp: &DesignPoint, baseline: Baseline, seed: u64) -> (DesignPoint, BuildPlan) {
    let n_s = dp.star.n_elements();
    let mut out = dp.clone();
    let (rsma, v_step, star) = match baseline {
        Baseline::RsmaStarOpt => {
            (true, VStepKind::Star, with_mode(StarProfile::random_split(n_s, seed), StarMode::Star))
        }
        Baseline::SdmaStarOpt => {
            (false, VStepKind::Star, with_mode(StarProfile::random_split(n_s, seed), StarMode::Star))
        }
        Baseline::RsmaRisConv => (true, VStepKind::Conventional, StarProfile::conventional_random(n_s, seed)),
        Baseline::RsmaStarRand => (true, VStepKind::Frozen, StarProfile::random_split(n_s, seed)),
        Baseline::RsmaNoRis => (true, VStepKind::Frozen, StarProfile::no_ris(n_s)),
    };
    out.star = star;
    if !rsma {
        out.w_common.fill(C64::new(0.0, 0.0));
        out.rate_split.iter_mut().for_each(|r| *r = 0.0);
    }
    (out, BuildPlan { baseline, rsma, v_step })
}

fn with_mode(mut star: StarProfile, mode: StarMode) -> StarProfile {
    star.mode = mode;
    star
}

/// Inputs shared by every step builder.
#[derive(Debug, Clone, Copy)]
pub struct StepInputs<'a> {
    pub channels: &'a ChannelSet,
    pub consts: &'a SensingConstants,
    pub config: &'a SystemConfig,
    pub rsma: bool,
}

impl StepInputs<'_> {
    fn kappa(&self) -> Vec<f64> {
        self.consts.d_opt.iter().map(|d| 1.0 + d).collect()
    }

    /// Beams in program order: the common beam (if any) then private beams.
    fn beams(&self) -> Vec<Beam> {
        beams_of(self.rsma, self.channels.n_users())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Beam {
    Common,
    Private(usize),
}

impl Beam {
    fn vector(self, dp: &DesignPoint) -> &CVector {
        match self {
            Beam::Common => &dp.w_common,
            Beam::Private(k) => &dp.w_private[k],
        }
    }

    fn label(self) -> String {
        match self {
            Beam::Common => "c".into(),
            Beam::Private(k) => format!("p{k}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepKind {
    W,
    V,
    VConventional,
}

#[derive(Debug, Clone)]
pub(crate) struct AuxVars {
    r: Option<RealVar>,
    alpha_c: Option<RealVar>,
    beta_c: Option<RealVar>,
    alpha_p: RealVar,
    beta_p: RealVar,
    delta: RealVar,
    mu: RealVar,
    omega: RealVar,
    /// `s[j * n_beams + b]`.
    s: RealVar,
    n_beams: usize,
}

impl AuxVars {
    fn new(p: &mut ConicProgram, inp: &StepInputs) -> Self {
        let k_c = inp.channels.n_users();
        let k_s = inp.channels.n_targets();
        let n_beams = inp.beams().len();
        Self {
            r: inp.rsma.then(|| p.add_real("r", k_c)),
            alpha_c: inp.rsma.then(|| p.add_real("alpha_c", 1)),
            beta_c: inp.rsma.then(|| p.add_real("beta_c", 1)),
            alpha_p: p.add_real("alpha_p", k_c),
            beta_p: p.add_real("beta_p", k_c),
            delta: p.add_real("delta", k_s),
            mu: p.add_real("mu", k_s),
            omega: p.add_real("omega", 1),
            s: p.add_real("eavesdrop_slack", k_s * n_beams),
            n_beams,
        }
    }

    fn beta(&self, beam: Beam) -> AffExpr {
        match beam {
            Beam::Common => self.beta_c.expect("common beam requires rsma").at(0),
            Beam::Private(k) => self.beta_p.at(k),
        }
    }

    fn r(&self, k: usize) -> AffExpr {
        self.r.map(|r| r.at(k)).unwrap_or_default()
    }
}

/// How the eavesdropped power `|g_j^H w_b|^2` enters the step.
pub(crate) enum Leak {
    /// Components whose squared norm is the leak (variables in the W-step).
    Quadratic(Vec<AffExpr>),
    Constant(f64),
}

/// Constraints common to both steps: log tangent, eavesdrop chains, the
/// interference lower bound and its floor, rate split and secrecy. `leak`
/// returns the eavesdrop power of `(target, beam)` divided by `kappa_j`;
/// `interference(j)` returns `D_j / kappa_j` as an expression.
#[allow(clippy::too_many_arguments)]
fn add_shared(
    p: &mut ConicProgram,
    aux: &AuxVars,
    inp: &StepInputs,
    expansion: &DesignPoint,
    leak: impl Fn(usize, Beam) -> Leak,
    interference: impl Fn(usize) -> AffExpr,
    interference_tag: &str,
    floor_backoff: f64,
) {
    let k_c = inp.channels.n_users();
    let kappa = inp.kappa();
    let beams = inp.beams();
    for (j, &kap) in kappa.iter().enumerate() {
        let lbl = format!("j{j}");
        // log2(kappa dbar) + (d - dbar) / (dbar ln 2) <= mu, in scaled units
        let d_bar = target_interference(inp.channels, expansion, j) / kap;
        let tangent = AffExpr::constant((kap * d_bar).log2())
            + (aux.delta.at(j) - d_bar) * (1.0 / (d_bar * std::f64::consts::LN_2));
        p.add(tags::LOG_TANGENT, lbl.clone(), vec![nonneg(aux.mu.at(j) - tangent)]);

        for (b, &beam) in beams.iter().enumerate() {
            let s = aux.s.at(j * aux.n_beams + b);
            let room = aux.delta.at(j) - s.clone();
            let first = match leak(j, beam) {
                Leak::Quadratic(x) => soc_of_quadratic(x, room),
                Leak::Constant(c) => nonneg(room - c),
            };
            // mu - beta - log2 kappa <= log2 s
            let level = aux.mu.at(j) - aux.beta(beam) - kap.log2();
            let tag = if beam == Beam::Common { tags::EAVES_COMMON } else { tags::EAVES_PRIVATE };
            p.add(tag, format!("j{j},{}", beam.label()), vec![first, hypograph_log(s, level)]);
        }

        p.add(interference_tag, lbl.clone(), vec![nonneg(interference(j) - aux.delta.at(j))]);
        let floor = (1.0 + inp.config.beampattern_ratio(j) * inp.consts.d_opt[j] * (1.0 - floor_backoff)) / kap;
        p.add(tags::BEAMPATTERN_FLOOR, lbl, vec![nonneg(aux.delta.at(j) - floor)]);
    }

    for k in 0..k_c {
        let net = aux.alpha_p.at(k) - aux.beta_p.at(k);
        p.add(tags::SECRECY_TOTAL, format!("k{k}"), vec![nonneg(aux.r(k) + net.clone() - aux.omega.at(0))]);
        p.add(tags::PRIVATE_SECRECY, format!("k{k}"), vec![nonneg(net)]);
    }
    if let (Some(r), Some(ac), Some(bc)) = (aux.r, aux.alpha_c, aux.beta_c) {
        let total = AffExpr::sum((0..k_c).map(|k| r.at(k)));
        p.add(tags::COMMON_BUDGET, "", vec![nonneg(ac.at(0) - bc.at(0) - total)]);
        for k in 0..k_c {
            p.add(tags::RATE_NONNEG, format!("k{k}"), vec![nonneg(r.at(k))]);
        }
    }
    p.maximize(aux.omega.at(0));
}

/// `2 Re(conj(b) u)` for a complex expression `u`.
fn twice_re_conj(b: C64, u: &crate::conic::CAffExpr) -> AffExpr {
    u.re_scaled(b.conj()) * 2.0
}

/// Real and imaginary parts of each complex expression, times `scale`.
fn split_parts(items: impl IntoIterator<Item = crate::conic::CAffExpr>, scale: f64) -> Vec<AffExpr> {
    items.into_iter().flat_map(|c| [c.re * scale, c.im * scale]).collect()
}

#[derive(Debug, Clone)]
pub(crate) enum Decision {
    /// Variables hold `R_s / power` and `w / sqrt(power)`.
    W {
        r_s: HermitianVar,
        w_c: Option<ComplexVar>,
        w_p: Vec<ComplexVar>,
        power: f64,
    },
    V {
        v_t: ComplexVar,
        v_r: ComplexVar,
    },
}

/// A built subproblem together with the handles needed to read its solution.
#[derive(Debug, Clone)]
pub struct StepProgram {
    pub program: ConicProgram,
    pub kind: StepKind,
    pub rsma: bool,
    expansion: DesignPoint,
    kappa: Vec<f64>,
    aux: AuxVars,
    decision: Decision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubproblemSolution {
    pub design: DesignPoint,
    pub aux: AuxState,
    /// Objective `omega` (bits/s/Hz); for restoration runs, without the penalty.
    pub omega: f64,
    /// Sum of restoration slacks; zero for plain solves.
    pub slack: f64,
    pub status: SolveStatus,
    pub iterations: u32,
    pub wall_time_s: f64,
    /// Largest scaled constraint violation at the returned point.
    pub max_violation: f64,
}

impl StepProgram {
    pub fn expansion(&self) -> &DesignPoint {
        &self.expansion
    }

    /// Reads the design fragment and auxiliaries from a primal vector. Surface
    /// profiles are projected onto their exact structure (unit selector
    /// entries, energy at most one, conventional zeros), a change of the
    /// order of the solver tolerance.
    pub fn extract(&self, x: &[f64]) -> (DesignPoint, AuxState) {
        let mut dp = self.expansion.clone();
        match &self.decision {
            Decision::W { r_s, w_c, w_p, power } => {
                let amp = C64::new(power.sqrt(), 0.0);
                let r = r_s.value(x);
                dp.an_covariance = (&r + r.adjoint()) * C64::new(0.5 * power, 0.0);
                dp.w_common = match w_c {
                    Some(v) => v.value(x) * amp,
                    None => CVector::zeros(dp.w_common.len()),
                };
                dp.w_private = w_p.iter().map(|v| v.value(x) * amp).collect();
            }
            Decision::V { v_t, v_r } => {
                let mut star = StarProfile { v_t: v_t.value(x), v_r: v_r.value(x), mode: self.expansion.star.mode };
                project_profile(&mut star);
                dp.star = star;
            }
        }
        dp.rate_split = match self.aux.r {
            Some(r) => r.value(x).into_iter().map(|v| v.max(0.0)).collect(),
            None => vec![0.0; dp.rate_split.len()],
        };
        let scaled = |v: &RealVar| -> Vec<f64> { v.value(x).iter().zip(&self.kappa).map(|(d, k)| d * k).collect() };
        let aux = AuxState {
            alpha_c: self.aux.alpha_c.map(|v| v.value(x)[0]).unwrap_or(0.0),
            alpha_p: self.aux.alpha_p.value(x),
            beta_c: self.aux.beta_c.map(|v| v.value(x)[0]).unwrap_or(0.0),
            beta_p: self.aux.beta_p.value(x),
            delta: scaled(&self.aux.delta),
            mu: self.aux.mu.value(x),
            omega: self.aux.omega.value(x)[0],
        };
        (dp, aux)
    }

    /// The primal point of `dp` with tight auxiliaries: exact rates in place
    /// of the surrogates, `delta_j = D_j`, `mu_j = log2 D_j`,
    /// `s = D_j - |g^H w|^2`, `beta` the worst eavesdropping rate.
    pub fn tight_point(&self, channels: &ChannelSet, dp: &DesignPoint) -> Vec<f64> {
        let rep = RateReport::evaluate(channels, dp);
        let k_c = channels.n_users();
        let mut b = self.program.point();
        b = match &self.decision {
            Decision::W { r_s, w_c, w_p, power } => {
                let inv = C64::new(1.0 / power.sqrt(), 0.0);
                let mut b = b.hermitian(r_s, &(&dp.an_covariance * C64::new(1.0 / power, 0.0)));
                if let Some(v) = w_c {
                    b = b.complex(v, &(&dp.w_common * inv));
                }
                for (v, w) in w_p.iter().zip(&dp.w_private) {
                    b = b.complex(v, &(w * inv));
                }
                b
            }
            Decision::V { v_t, v_r } => b.complex(v_t, &dp.star.v_t).complex(v_r, &dp.star.v_r),
        };
        let beta_p: Vec<f64> = (0..k_c).map(|k| rep.worst_eaves_private(k)).collect();
        let mut omega = f64::INFINITY;
        for k in 0..k_c {
            let r = if self.rsma { dp.rate_split[k] } else { 0.0 };
            omega = omega.min(r + rep.private_rate[k] - beta_p[k]);
        }
        if let Some(r) = self.aux.r {
            b = b.real(&r, &dp.rate_split);
        }
        if let Some(a) = self.aux.alpha_c {
            b = b.real(&a, &[rep.common_rate.iter().copied().fold(f64::INFINITY, f64::min)]);
        }
        if let Some(bc) = self.aux.beta_c {
            b = b.real(&bc, &[rep.worst_eaves_common()]);
        }
        b = b.real(&self.aux.alpha_p, &rep.private_rate).real(&self.aux.beta_p, &beta_p);
        let delta: Vec<f64> = rep.d_target.iter().zip(&self.kappa).map(|(d, k)| d / k).collect();
        let mu: Vec<f64> = rep.d_target.iter().map(|d| d.log2()).collect();
        b = b.real(&self.aux.delta, &delta).real(&self.aux.mu, &mu).real(&self.aux.omega, &[omega]);
        let beams = beams_of(self.rsma, k_c);
        let mut s = vec![0.0; self.aux.s.len];
        for (j, kap) in self.kappa.iter().enumerate() {
            for (bi, beam) in beams.iter().enumerate() {
                let leak = crate::linalg::inner(&channels.g_target[j], beam.vector(dp)).norm_sqr();
                s[j * beams.len() + bi] = (rep.d_target[j] - leak) / kap;
            }
        }
        b.real(&self.aux.s, &s).build()
    }

    /// Solves (with scaling retries); non-optimal statuses become
    /// [`Error::Solver`].
    pub fn solve(&self, solver: &dyn ConicSolver, settings: &SolverSettings) -> Result<SubproblemSolution> {
        let res = self.program.solve_with_retry(solver, settings)?;
        self.solution_from(&res, 0.0)
    }

    fn solution_from(&self, res: &SolveResult, slack: f64) -> Result<SubproblemSolution> {
        let x = res.primal_or_err()?;
        let (design, aux) = self.extract(x);
        Ok(SubproblemSolution {
            design,
            omega: aux.omega,
            aux,
            slack,
            status: res.status,
            iterations: res.iterations,
            wall_time_s: res.wall_time_s,
            max_violation: self.program.max_violation(x),
        })
    }
}

fn beams_of(rsma: bool, k_c: usize) -> Vec<Beam> {
    let mut out = Vec::with_capacity(k_c + 1);
    if rsma {
        out.push(Beam::Common);
    }
    out.extend((0..k_c).map(Beam::Private));
    out
}

/// `M = G_k (R_s + w_c w_c^H + sum_i w_p,i w_p,i^H) G_k^H`, so that the
/// common-stream level at user `k` is `v^H M v + 1`. Hermitian PSD.
pub fn middle_matrix(channels: &ChannelSet, dp: &DesignPoint, user: usize) -> crate::linalg::CMatrix {
    let g = &channels.g_cu[user];
    g * dp.transmit_covariance() * g.adjoint()
}

/// Unit selector entries, per-element energy at most one and, for the
/// conventional mode, exact zeros on the inactive halves.
pub fn project_profile(star: &mut StarProfile) {
    let n_s = star.n_elements();
    star.v_t[n_s] = C64::new(1.0, 0.0);
    star.v_r[n_s] = C64::new(1.0, 0.0);
    if star.mode == StarMode::Conventional {
        for n in 0..n_s / 2 {
            star.v_t[n] = C64::new(0.0, 0.0);
        }
        for n in n_s / 2..n_s {
            star.v_r[n] = C64::new(0.0, 0.0);
        }
    }
    for n in 0..n_s {
        let e = star.v_t[n].norm_sqr() + star.v_r[n].norm_sqr();
        if e > 1.0 {
            let f = C64::new(1.0 / e.sqrt(), 0.0);
            star.v_t[n] *= f;
            star.v_r[n] *= f;
        }
    }
}

pub(crate) fn zero_block(parts: Vec<AffExpr>) -> crate::conic::ConeBlock {
    crate::conic::ConeBlock::new(crate::conic::ConeKind::Zero, parts)
}

#[cfg(test)]
mod tests;
