use serde::{Deserialize, Serialize};

use crate::channel::effective_cu_channel;
use crate::linalg::{dominant_eigenvector, null_projector, CMatrix, CVector, C64};
use crate::metrics::{DesignPoint, StarProfile};

use super::StepInputs;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitPolicy {
    /// Scaled sensing covariance plus beams projected off the target
    /// directions: strictly feasible whenever the projection is nondegenerate.
    #[default]
    NullSteering,
    /// Isotropic noise and matched-filter beams; usually needs restoration.
    MatchedFilter,
}

/// Share of the post-noise budget given to the common beam under null steering.
const COMMON_SHARE: f64 = 2.0 / 7.0;

/// Starting point for the alternating scheme with surface profile `star`.
/// Null steering falls back to matched filtering when the targets span the
/// array or a user lies in their span.
pub fn initial_design(inp: &StepInputs, star: StarProfile, policy: InitPolicy) -> DesignPoint {
    let ch = inp.channels;
    let n_b = ch.n_bs();
    let mut dp = DesignPoint::zeros(n_b, ch.n_ris(), ch.n_users());
    dp.star = star;
    let filled = match policy {
        InitPolicy::NullSteering => null_steering(inp, &mut dp),
        InitPolicy::MatchedFilter => false,
    };
    if !filled {
        matched_filter(inp, &mut dp);
    }
    dp
}

fn unit(v: &CVector) -> Option<CVector> {
    let n = v.norm();
    (n > 1e-12 && n.is_finite()).then(|| v / C64::new(n, 0.0))
}

fn scaled(v: &CVector, power: f64) -> CVector {
    v * C64::new(power.sqrt(), 0.0)
}

fn null_steering(inp: &StepInputs, dp: &mut DesignPoint) -> bool {
    let ch = inp.channels;
    let n_b = ch.n_bs();
    let k_c = ch.n_users();
    if ch.n_targets() >= n_b {
        return false;
    }
    let power = inp.config.power_budget_w();
    let eta_max = (0..ch.n_targets()).map(|j| inp.config.beampattern_ratio(j)).fold(0.0, f64::max);
    let rho = (1.0 + eta_max) / 2.0;
    let tr = inp.consts.r_opt.trace().re;
    if !(tr > 0.0) {
        return false;
    }
    let proj = null_projector(&ch.steer_target, n_b);
    let h: Vec<CVector> = (0..k_c).map(|k| effective_cu_channel(ch, &dp.star, k)).collect();
    let dirs: Option<Vec<CVector>> = h.iter().map(|hk| unit(&(&proj * hk))).collect();
    let Some(dirs) = dirs else { return false };

    let remaining = (1.0 - rho) * power;
    let private_share = if inp.rsma { 1.0 - COMMON_SHARE } else { 1.0 };
    dp.an_covariance = &inp.consts.r_opt * C64::new(rho * power / tr, 0.0);
    dp.w_private = dirs.iter().map(|d| scaled(d, remaining * private_share / k_c as f64)).collect();
    if inp.rsma {
        let mut gram = CMatrix::zeros(n_b, n_b);
        for hk in &h {
            gram += hk * hk.adjoint();
        }
        let c = dominant_eigenvector(&(&proj * gram * &proj));
        let Some(c) = unit(&(&proj * c)) else { return false };
        dp.w_common = scaled(&c, remaining * COMMON_SHARE);
    }
    true
}

fn matched_filter(inp: &StepInputs, dp: &mut DesignPoint) {
    let ch = inp.channels;
    let n_b = ch.n_bs();
    let k_c = ch.n_users();
    let power = inp.config.power_budget_w();
    dp.an_covariance = CMatrix::identity(n_b, n_b) * C64::new(0.3 * power / n_b as f64, 0.0);
    let fallback = CVector::from_element(n_b, C64::new(1.0 / (n_b as f64).sqrt(), 0.0));
    let h: Vec<CVector> = (0..k_c).map(|k| effective_cu_channel(ch, &dp.star, k)).collect();
    dp.w_private =
        h.iter().map(|hk| scaled(&unit(hk).unwrap_or_else(|| fallback.clone()), 0.5 * power / k_c as f64)).collect();
    if inp.rsma {
        let sum = h.iter().fold(CVector::zeros(n_b), |acc, hk| acc + hk);
        dp.w_common = scaled(&unit(&sum).unwrap_or(fallback), 0.2 * power);
    }
}
