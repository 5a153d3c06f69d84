use crate::conic::{soc_of_quadratic, AffExpr, CAffExpr, ComplexVar, ConeBlock, ConeKind, ConicProgram};
use crate::error::{Error, Result};
use crate::linalg::{inner, psd_factor, CVector};
use crate::metrics::{target_interference, DesignPoint};
use crate::scenario::Region;
use crate::surrogate::mm_coefficients;

use super::{
    add_shared, split_parts, tags, twice_re_conj, zero_block, AuxVars, Decision, Leak, StepInputs, StepKind,
    StepProgram,
};

/// Relative back-off of the sensing floor when the beampattern is a constant.
/// The surface cannot move the beampattern, so the floor only guards against
/// the preceding beamforming step meeting it to solver accuracy alone.
const FIXED_FLOOR_BACKOFF: f64 = 1e-5;

/// Surface step with independent transmission and reflection coefficients
/// under the per-element energy budget.
pub fn build_v_step(inp: &StepInputs, expansion: &DesignPoint) -> Result<StepProgram> {
    build(inp, expansion, false)
}

/// Surface step restricted to a conventional RIS pair: the first half of the
/// elements only reflects, the second half only transmits.
pub fn build_v_step_conventional(inp: &StepInputs, expansion: &DesignPoint) -> Result<StepProgram> {
    if !inp.channels.n_ris().is_multiple_of(2) {
        return Err(Error::InvalidConfig(format!(
            "conventional RIS split needs an even element count, got {}",
            inp.channels.n_ris()
        )));
    }
    build(inp, expansion, true)
}

fn build(inp: &StepInputs, expansion: &DesignPoint, conventional: bool) -> Result<StepProgram> {
    let ch = inp.channels;
    let n_s = ch.n_ris();
    let k_c = ch.n_users();
    let coeffs = mm_coefficients(ch, expansion)?;
    let kappa = inp.kappa();

    let mut p = ConicProgram::new();
    let v_t = p.add_complex("v_t", n_s + 1);
    let v_r = p.add_complex("v_r", n_s + 1);
    let aux = AuxVars::new(&mut p, inp);

    // Columns whose received powers sum to the interference-plus-signal level.
    let factor = psd_factor(&expansion.an_covariance);
    let scale = factor.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let an_cols: Vec<CVector> =
        factor.column_iter().map(|c| c.into_owned()).filter(|c| c.norm() > 1e-14 * scale.max(1e-300)).collect();

    for k in 0..k_c {
        let v = match ch.regions[k] {
            Region::Transmission => v_t,
            Region::Reflection => v_r,
        };
        let g = &ch.g_cu[k];
        // v^H G w, the received amplitude on beam w
        let amp = |w: &CVector| -> CAffExpr { v.inner_from(&(g * w)).conj() };
        let mut private_level: Vec<CAffExpr> = an_cols.iter().map(&amp).collect();
        private_level.extend(expansion.w_private.iter().map(&amp));
        let u_p = amp(&expansion.w_private[k]);

        if let Some(ac) = aux.alpha_c {
            let m = &coeffs.common[k];
            let u_c = amp(&expansion.w_common);
            let bound = twice_re_conj(m.b, &u_c) + m.f - m.q - ac.at(0);
            let level = std::iter::once(u_c).chain(private_level.iter().cloned());
            p.add(tags::COMMON_RATE, format!("k{k}"), vec![soc_of_quadratic(split_parts(level, m.q.sqrt()), bound)]);
        }
        let m = &coeffs.private[k];
        let bound = twice_re_conj(m.b, &u_p) + m.f - m.q - aux.alpha_p.at(k);
        p.add(
            tags::PRIVATE_RATE,
            format!("k{k}"),
            vec![soc_of_quadratic(split_parts(private_level, m.q.sqrt()), bound)],
        );
    }

    let d: Vec<f64> = (0..ch.n_targets()).map(|j| target_interference(ch, expansion, j)).collect();
    let leak = |j: usize, beam: super::Beam| {
        Leak::Constant(inner(&ch.g_target[j], beam.vector(expansion)).norm_sqr() / kappa[j])
    };
    let interference = |j: usize| AffExpr::constant(d[j] / kappa[j]);
    add_shared(&mut p, &aux, inp, expansion, leak, interference, tags::BEAMPATTERN_FIXED, FIXED_FLOOR_BACKOFF);

    for n in 0..n_s {
        let mut rows = vec![AffExpr::constant(1.0)];
        rows.extend(split_parts([v_t.at(n), v_r.at(n)], 1.0));
        p.add(tags::STAR_ENERGY, format!("n{n}"), vec![ConeBlock::new(ConeKind::Soc, rows)]);
    }
    for (var, lbl) in [(v_t, "t"), (v_r, "r")] {
        let last = var.at(n_s);
        p.add(tags::STAR_FIXED, lbl, vec![zero_block(vec![last.re - 1.0, last.im])]);
    }
    if conventional {
        p.add(tags::CONV_ZERO_T, "", vec![zero_block(parts(v_t, 0..n_s / 2))]);
        p.add(tags::CONV_ZERO_R, "", vec![zero_block(parts(v_r, n_s / 2..n_s))]);
    }
    p.validate()?;

    Ok(StepProgram {
        program: p,
        kind: if conventional { StepKind::VConventional } else { StepKind::V },
        rsma: inp.rsma,
        expansion: expansion.clone(),
        kappa,
        aux,
        decision: Decision::V { v_t, v_r },
    })
}

fn parts(v: ComplexVar, range: std::ops::Range<usize>) -> Vec<AffExpr> {
    split_parts(range.map(|n| v.at(n)), 1.0)
}
