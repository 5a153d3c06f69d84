use crate::channel::ChannelSet;
use crate::conic::{nonneg, psd_hermitian, AffExpr, ConicProgram, ConicSolver, SolverSettings};
use crate::error::Result;
use crate::linalg::{quad_form, CMatrix, CVector, C64};
use crate::metrics::SensingConstants;
use crate::scenario::SystemConfig;

use super::tags;

/// Sensing-only benchmark: the max-min beampattern gain over all targets
/// with the whole budget spent on a covariance and no communication.
pub fn sensing_only(
    channels: &ChannelSet,
    config: &SystemConfig,
    solver: &dyn ConicSolver,
    settings: &SolverSettings,
) -> Result<SensingConstants> {
    let r_opt = max_min_beampattern(&channels.steer_target, config.power_budget_w(), solver, settings)?;
    let g_opt = channels.steer_target.iter().map(|a| quad_form(&r_opt, a)).collect();
    let d_opt = channels.g_target.iter().map(|g| quad_form(&r_opt, g)).collect();
    Ok(SensingConstants { r_opt, g_opt, d_opt })
}

/// `argmax_R min_j a_j^H R a_j` subject to `tr R <= power`, `R >= 0`.
pub fn max_min_beampattern(
    steer: &[CVector],
    power: f64,
    solver: &dyn ConicSolver,
    settings: &SolverSettings,
) -> Result<CMatrix> {
    let n_b = steer.first().map_or(0, |a| a.len());
    // Solve for R / power with gains per antenna so that all rows are O(1).
    let mut p = ConicProgram::new();
    let r = p.add_hermitian("covariance", n_b);
    let tau = p.add_real("tau", 1);
    for (j, a) in steer.iter().enumerate() {
        p.add(tags::SENSING_GAIN, format!("j{j}"), vec![nonneg(r.quad_form(a) * (1.0 / n_b as f64) - tau.at(0))]);
    }
    p.add(tags::POWER, "", vec![nonneg(AffExpr::constant(1.0) - r.trace())]);
    p.add(tags::AN_PSD, "", vec![psd_hermitian(&r)]);
    p.maximize(tau.at(0));

    let res = p.solve_with_retry(solver, settings)?;
    let r_opt = r.value(res.primal_or_err()?);
    Ok((&r_opt + r_opt.adjoint()) * C64::new(0.5 * power, 0.0))
}
