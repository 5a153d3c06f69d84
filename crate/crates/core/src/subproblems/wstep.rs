use crate::channel::effective_cu_channel;
use crate::conic::{psd_hermitian, soc_of_quadratic, AffExpr, ConicProgram};
use crate::error::Result;
use crate::linalg::{inner, C64};
use crate::metrics::DesignPoint;
use crate::surrogate::mm_coefficients;

use super::{
    add_shared, split_parts, tags, twice_re_conj, AuxVars, Beam, Decision, Leak, StepInputs, StepKind, StepProgram,
};

/// Beamforming step: `R_s`, `w_c`, `w_p`, `r` free, surface fixed at the
/// expansion's profile.
pub fn build_w_step(inp: &StepInputs, expansion: &DesignPoint) -> Result<StepProgram> {
    let ch = inp.channels;
    let n_b = ch.n_bs();
    let k_c = ch.n_users();
    let coeffs = mm_coefficients(ch, expansion)?;
    let kappa = inp.kappa();
    // Variables are R_s / P and w / sqrt(P); channels absorb sqrt(P).
    let power = inp.config.power_budget_w();
    let amp = C64::new(power.sqrt(), 0.0);

    let mut p = ConicProgram::new();
    let r_s = p.add_hermitian("an_covariance", n_b);
    let w_c = inp.rsma.then(|| p.add_complex("w_common", n_b));
    let w_p: Vec<_> = (0..k_c).map(|k| p.add_complex(&format!("w_private_{k}"), n_b)).collect();
    let aux = AuxVars::new(&mut p, inp);

    for k in 0..k_c {
        let h = effective_cu_channel(ch, &expansion.star, k) * amp;
        let an = r_s.quad_form(&h);
        let private: Vec<_> = w_p.iter().map(|w| w.inner_from(&h)).collect();
        if let (Some(wc), Some(ac)) = (w_c, aux.alpha_c) {
            let m = &coeffs.common[k];
            let u = wc.inner_from(&h);
            let bound = twice_re_conj(m.b, &u) + m.f - an.clone() * m.q - m.q - ac.at(0);
            let x = split_parts(std::iter::once(u).chain(private.iter().cloned()), m.q.sqrt());
            p.add(tags::COMMON_RATE, format!("k{k}"), vec![soc_of_quadratic(x, bound)]);
        }
        let m = &coeffs.private[k];
        let bound = twice_re_conj(m.b, &private[k]) + m.f - an * m.q - m.q - aux.alpha_p.at(k);
        let x = split_parts(private, m.q.sqrt());
        p.add(tags::PRIVATE_RATE, format!("k{k}"), vec![soc_of_quadratic(x, bound)]);
    }

    let beam_var = |beam: Beam| match beam {
        Beam::Common => w_c.expect("common beam requires rsma"),
        Beam::Private(k) => w_p[k],
    };
    let leak = |j: usize, beam: Beam| {
        let u = beam_var(beam).inner_from(&(&ch.g_target[j] * amp));
        Leak::Quadratic(split_parts([u], 1.0 / kappa[j].sqrt()))
    };
    // D_j >= g^H R g + sum_b (2 Re(wbar^H g g^H w) - |g^H wbar|^2) + 1
    let beams = inp.beams();
    let interference = |j: usize| {
        let g = &ch.g_target[j];
        let gs = g * amp;
        let mut e = r_s.quad_form(&gs) + 1.0;
        for &beam in &beams {
            let c = inner(g, beam.vector(expansion));
            let u = beam_var(beam).inner_from(&gs);
            e += twice_re_conj(c, &u) - c.norm_sqr();
        }
        e * (1.0 / kappa[j])
    };
    add_shared(&mut p, &aux, inp, expansion, leak, interference, tags::BEAMPATTERN_MINORANT, 0.0);

    let mut stacked: Vec<AffExpr> = Vec::new();
    for v in w_c.iter().chain(&w_p) {
        stacked.extend(v.real_parts());
    }
    let budget = AffExpr::constant(1.0) - r_s.trace();
    p.add(tags::POWER, "", vec![soc_of_quadratic(stacked, budget)]);
    p.add(tags::AN_PSD, "", vec![psd_hermitian(&r_s)]);
    p.validate()?;

    Ok(StepProgram {
        program: p,
        kind: StepKind::W,
        rsma: inp.rsma,
        expansion: expansion.clone(),
        kappa,
        aux,
        decision: Decision::W { r_s, w_c, w_p, power },
    })
}
