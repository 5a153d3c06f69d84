//! Exact evaluation of the system model: transmit power, stream rates,
//! eavesdropping rates, secrecy rates, beampattern gains, and a feasibility
//! ledger for the original max-min problem.
//!
//! All channels here are noise-normalized, so every interference-plus-noise
//! term carries a literal `+ 1`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::channel::{effective_cu_channel, ChannelSet};
use crate::linalg::{inner, min_eigenvalue, quad_form, CMatrix, CVector, C64};
use crate::scenario::{stream_rng, Region, SystemConfig};
use rand::Rng;

const STAR_PROFILE_STREAM: u64 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StarMode {
    Star,
    Conventional,
    Random,
    None,
}

/// Transmission / reflection profiles `v_t`, `v_r` of length `N_S + 1`; the last
/// entry of each is the direct-path selector and is always exactly one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarProfile {
    pub v_t: CVector,
    pub v_r: CVector,
    pub mode: StarMode,
}

impl StarProfile {
    pub fn n_elements(&self) -> usize {
        self.v_t.len() - 1
    }

    /// `(0, ..., 0, 1)` for both faces.
    pub fn no_ris(n_s: usize) -> Self {
        let mut v = CVector::zeros(n_s + 1);
        v[n_s] = C64::new(1.0, 0.0);
        Self { v_t: v.clone(), v_r: v, mode: StarMode::None }
    }

    /// Uniform random phases with amplitude `1/sqrt(2)` on both faces, which
    /// meets the per-element energy budget with equality.
    pub fn random_split(n_s: usize, seed: u64) -> Self {
        let mut rng = stream_rng(seed, STAR_PROFILE_STREAM);
        let amp = std::f64::consts::FRAC_1_SQRT_2;
        let mut draw = |n: usize| {
            if n == n_s {
                C64::new(1.0, 0.0)
            } else {
                C64::from_polar(amp, 2.0 * std::f64::consts::PI * rng.random::<f64>())
            }
        };
        let v_t = CVector::from_fn(n_s + 1, |n, _| draw(n));
        let v_r = CVector::from_fn(n_s + 1, |n, _| draw(n));
        Self { v_t, v_r, mode: StarMode::Random }
    }

    /// Conventional split: the first half of the elements only reflect and the
    /// second half only transmit, each with unit amplitude and random phase.
    pub fn conventional_random(n_s: usize, seed: u64) -> Self {
        let mut rng = stream_rng(seed, STAR_PROFILE_STREAM + 1);
        let half = n_s / 2;
        let mut v_t = CVector::zeros(n_s + 1);
        let mut v_r = CVector::zeros(n_s + 1);
        for n in 0..n_s {
            let z = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * rng.random::<f64>());
            if n < half {
                v_r[n] = z;
            } else {
                v_t[n] = z;
            }
        }
        v_t[n_s] = C64::new(1.0, 0.0);
        v_r[n_s] = C64::new(1.0, 0.0);
        Self { v_t, v_r, mode: StarMode::Conventional }
    }

    pub fn for_region(&self, region: Region) -> &CVector {
        match region {
            Region::Transmission => &self.v_t,
            Region::Reflection => &self.v_r,
        }
    }

    /// `|v_t,n|^2 + |v_r,n|^2` for every element.
    pub fn element_energy(&self) -> Vec<f64> {
        (0..self.n_elements()).map(|n| self.v_t[n].norm_sqr() + self.v_r[n].norm_sqr()).collect()
    }
}

/// Optimization variables of the joint design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignPoint {
    /// AN covariance `R_s` (Hermitian PSD).
    pub an_covariance: CMatrix,
    pub w_common: CVector,
    pub w_private: Vec<CVector>,
    pub star: StarProfile,
    /// Common-rate portions `r_k` (bits/s/Hz).
    pub rate_split: Vec<f64>,
}

impl DesignPoint {
    pub fn zeros(n_b: usize, n_s: usize, k_c: usize) -> Self {
        Self {
            an_covariance: CMatrix::zeros(n_b, n_b),
            w_common: CVector::zeros(n_b),
            w_private: vec![CVector::zeros(n_b); k_c],
            star: StarProfile::no_ris(n_s),
            rate_split: vec![0.0; k_c],
        }
    }

    /// `R_s + w_c w_c^H + sum_i w_p,i w_p,i^H`.
    pub fn transmit_covariance(&self) -> CMatrix {
        let mut q = self.an_covariance.clone();
        q += &self.w_common * self.w_common.adjoint();
        for w in &self.w_private {
            q += w * w.adjoint();
        }
        q
    }
}

/// Sensing-only optimum used to scale the beampattern requirement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensingConstants {
    pub r_opt: CMatrix,
    pub g_opt: Vec<f64>,
    pub d_opt: Vec<f64>,
}

pub fn transmit_power(dp: &DesignPoint) -> f64 {
    let mut p: f64 = dp.an_covariance.diagonal().iter().map(|z| z.re).sum();
    p += dp.w_common.norm_squared();
    p += dp.w_private.iter().map(|w| w.norm_squared()).sum::<f64>();
    p
}

/// `log2(E / (E - |u|^2))`, i.e. `log2(1 + |u|^2 / (E - |u|^2))`.
pub fn rate_from_terms(e: f64, signal: f64) -> f64 {
    let denom = e - signal;
    if signal <= 0.0 {
        return 0.0;
    }
    (signal / denom).ln_1p() / std::f64::consts::LN_2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommRates {
    pub common_rate: Vec<f64>,
    pub private_rate: Vec<f64>,
    pub e_common: Vec<f64>,
    pub e_private: Vec<f64>,
}

/// Common and private rates of every user under SIC decoding.
pub fn stream_rates(channels: &ChannelSet, dp: &DesignPoint) -> CommRates {
    let k_c = channels.n_users();
    let mut out = CommRates {
        common_rate: Vec::with_capacity(k_c),
        private_rate: Vec::with_capacity(k_c),
        e_common: Vec::with_capacity(k_c),
        e_private: Vec::with_capacity(k_c),
    };
    for k in 0..k_c {
        let h = effective_cu_channel(channels, &dp.star, k);
        let an = quad_form(&dp.an_covariance, &h);
        let uc = inner(&h, &dp.w_common).norm_sqr();
        let private: Vec<f64> = dp.w_private.iter().map(|w| inner(&h, w).norm_sqr()).collect();
        let e_p = an + private.iter().sum::<f64>() + 1.0;
        let e_c = e_p + uc;
        out.common_rate.push(rate_from_terms(e_c, uc));
        out.private_rate.push(rate_from_terms(e_p, private[k]));
        out.e_common.push(e_c);
        out.e_private.push(e_p);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EavesRates {
    /// Per target.
    pub eaves_common: Vec<f64>,
    /// `[user][target]`.
    pub eaves_private: Vec<Vec<f64>>,
    /// `D_j` per target.
    pub d_target: Vec<f64>,
}

/// `D_j(R_s, W) = g^H R_s g + |g^H w_c|^2 + sum |g^H w_p,i|^2 + 1`.
pub fn target_interference(channels: &ChannelSet, dp: &DesignPoint, j: usize) -> f64 {
    let g = &channels.g_target[j];
    quad_form(&dp.an_covariance, g)
        + inner(g, &dp.w_common).norm_sqr()
        + dp.w_private.iter().map(|w| inner(g, w).norm_sqr()).sum::<f64>()
        + 1.0
}

pub fn eavesdrop_rates(channels: &ChannelSet, dp: &DesignPoint) -> EavesRates {
    let k_s = channels.n_targets();
    let d_target: Vec<f64> = (0..k_s).map(|j| target_interference(channels, dp, j)).collect();
    let eaves_common =
        (0..k_s).map(|j| rate_from_terms(d_target[j], inner(&channels.g_target[j], &dp.w_common).norm_sqr())).collect();
    let eaves_private = dp
        .w_private
        .iter()
        .map(|w| (0..k_s).map(|j| rate_from_terms(d_target[j], inner(&channels.g_target[j], w).norm_sqr())).collect())
        .collect();
    EavesRates { eaves_common, eaves_private, d_target }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub common_rate: Vec<f64>,
    pub private_rate: Vec<f64>,
    pub eaves_common: Vec<f64>,
    pub eaves_private: Vec<Vec<f64>>,
    pub secrecy_common: Vec<f64>,
    pub secrecy_private: Vec<f64>,
    /// `R_k = r_k + R_p,k^sec`.
    pub total_secrecy: Vec<f64>,
    pub e_common: Vec<f64>,
    pub e_private: Vec<f64>,
    pub d_target: Vec<f64>,
}

fn max_or_zero(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}

/// Clamped secrecy rates against the strongest (non-colluding) eavesdropper.
pub fn secrecy_rates(comm: CommRates, eaves: EavesRates, rate_split: &[f64]) -> RateReport {
    let worst_common = max_or_zero(eaves.eaves_common.iter().copied());
    let secrecy_common = comm.common_rate.iter().map(|r| (r - worst_common).max(0.0)).collect();
    let secrecy_private: Vec<f64> = comm
        .private_rate
        .iter()
        .zip(&eaves.eaves_private)
        .map(|(r, e)| (r - max_or_zero(e.iter().copied())).max(0.0))
        .collect();
    let total_secrecy = secrecy_private.iter().zip(rate_split).map(|(s, r)| r + s).collect();
    RateReport {
        common_rate: comm.common_rate,
        private_rate: comm.private_rate,
        eaves_common: eaves.eaves_common,
        eaves_private: eaves.eaves_private,
        secrecy_common,
        secrecy_private,
        total_secrecy,
        e_common: comm.e_common,
        e_private: comm.e_private,
        d_target: eaves.d_target,
    }
}

impl RateReport {
    pub fn evaluate(channels: &ChannelSet, dp: &DesignPoint) -> Self {
        secrecy_rates(stream_rates(channels, dp), eavesdrop_rates(channels, dp), &dp.rate_split)
    }

    pub fn worst_eaves_private(&self, k: usize) -> f64 {
        max_or_zero(self.eaves_private[k].iter().copied())
    }

    pub fn worst_eaves_common(&self) -> f64 {
        max_or_zero(self.eaves_common.iter().copied())
    }

    pub fn min_total_secrecy(&self) -> f64 {
        self.total_secrecy.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `G_j = a_j^H (R_s + w_c w_c^H + sum w w^H) a_j`.
pub fn beampattern_gain(channels: &ChannelSet, dp: &DesignPoint, target: usize) -> f64 {
    let a = &channels.steer_target[target];
    quad_form(&dp.an_covariance, a)
        + inner(a, &dp.w_common).norm_sqr()
        + dp.w_private.iter().map(|w| inner(a, w).norm_sqr()).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensingReport {
    pub gain: Vec<f64>,
    pub optimal_gain: Vec<f64>,
    pub optimal_d: Vec<f64>,
    pub ratio: Vec<f64>,
}

pub fn sensing_report(channels: &ChannelSet, dp: &DesignPoint, consts: &SensingConstants) -> SensingReport {
    let gain: Vec<f64> = (0..channels.n_targets()).map(|j| beampattern_gain(channels, dp, j)).collect();
    let ratio = gain.iter().zip(&consts.g_opt).map(|(g, o)| g / o).collect();
    SensingReport { gain, optimal_gain: consts.g_opt.clone(), optimal_d: consts.d_opt.clone(), ratio }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstraintKind {
    /// Unclamped private secrecy `R_p,k - max_j R_p,k^e >= 0`.
    PrivateSecrecy,
    CommonBudget,
    RateNonneg,
    Beampattern,
    Power,
    StarEnergy,
    StarFixedEntry,
    ConventionalPattern,
    CovariancePsd,
}

impl fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_string(self).unwrap_or_default();
        f.write_str(s.trim_matches('"'))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Slack {
    pub kind: ConstraintKind,
    pub index: usize,
    /// Nonnegative when satisfied.
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityLedger {
    pub entries: Vec<Slack>,
}

impl FeasibilityLedger {
    pub fn is_feasible(&self, tau: f64) -> bool {
        self.entries.iter().all(|e| e.slack >= -tau)
    }

    pub fn violations(&self, tau: f64) -> Vec<Slack> {
        self.entries.iter().copied().filter(|e| e.slack < -tau).collect()
    }

    pub fn worst(&self) -> Option<Slack> {
        self.entries.iter().copied().min_by(|a, b| a.slack.total_cmp(&b.slack))
    }

    pub fn slack_of(&self, kind: ConstraintKind, index: usize) -> Option<f64> {
        self.entries.iter().find(|e| e.kind == kind && e.index == index).map(|e| e.slack)
    }
}

/// Signed slack of every constraint of the original problem. Rates in bits,
/// power and gains in watts, STAR energies unitless.
pub fn check_feasibility(
    dp: &DesignPoint,
    report: &RateReport,
    sensing: &SensingReport,
    config: &SystemConfig,
) -> FeasibilityLedger {
    let mut entries = Vec::new();
    let mut push = |kind, index, slack| entries.push(Slack { kind, index, slack });
    let k_c = report.common_rate.len();
    let budget: f64 = dp.rate_split.iter().sum();
    for k in 0..k_c {
        push(ConstraintKind::PrivateSecrecy, k, report.private_rate[k] - report.worst_eaves_private(k));
        push(ConstraintKind::CommonBudget, k, report.secrecy_common[k] - budget);
        push(ConstraintKind::RateNonneg, k, dp.rate_split[k]);
    }
    for (j, &g) in sensing.gain.iter().enumerate() {
        push(ConstraintKind::Beampattern, j, g - config.beampattern_ratio(j) * sensing.optimal_gain[j]);
    }
    push(ConstraintKind::Power, 0, config.power_budget_w() - transmit_power(dp));
    push(ConstraintKind::CovariancePsd, 0, min_eigenvalue(&dp.an_covariance));
    for (n, e) in dp.star.element_energy().into_iter().enumerate() {
        push(ConstraintKind::StarEnergy, n, 1.0 - e);
    }
    let n_s = dp.star.n_elements();
    for (i, v) in [&dp.star.v_t, &dp.star.v_r].into_iter().enumerate() {
        push(ConstraintKind::StarFixedEntry, i, -(v[n_s] - C64::new(1.0, 0.0)).norm());
    }
    if dp.star.mode == StarMode::Conventional {
        let half = n_s / 2;
        let stray_t = (0..half).map(|n| dp.star.v_t[n].norm()).fold(0.0, f64::max);
        let stray_r = (half..n_s).map(|n| dp.star.v_r[n].norm()).fold(0.0, f64::max);
        push(ConstraintKind::ConventionalPattern, 0, -stray_t);
        push(ConstraintKind::ConventionalPattern, 1, -stray_r);
    }
    if dp.star.mode == StarMode::None {
        let stray = (0..n_s).map(|n| dp.star.v_t[n].norm().max(dp.star.v_r[n].norm())).fold(0.0, f64::max);
        push(ConstraintKind::ConventionalPattern, 2, -stray);
    }
    FeasibilityLedger { entries }
}
