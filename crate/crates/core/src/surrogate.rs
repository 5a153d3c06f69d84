//! Majorization-minimization objects: the concave rate minorant, the
//! eavesdropping-rate bound through the auxiliary interference level `delta`,
//! the tangent bound on `log2 delta`, and the quadratic minorant of `|g^H w|^2`.

use serde::{Deserialize, Serialize};

use crate::channel::{effective_cu_channel, ChannelSet};
use crate::error::{Error, Result};
use crate::linalg::{inner, quad_form, CVector, C64};
use crate::metrics::DesignPoint;

const LOG2_E: f64 = std::f64::consts::LOG2_E;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stream {
    Common,
    Private,
}

/// Coefficients of `f + 2 Re(b^* u) - q E` for one (stream, user) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateMinorant {
    pub f: f64,
    pub q: f64,
    pub b: C64,
    pub e_bar: f64,
    pub u_bar: C64,
}

impl RateMinorant {
    /// Expansion at interference-plus-signal level `e_bar` and signal amplitude `u_bar`.
    pub fn at(e_bar: f64, u_bar: C64) -> Result<Self> {
        let s = u_bar.norm_sqr();
        let gap = e_bar - s;
        if !(gap > 0.0) || !e_bar.is_finite() {
            return Err(Error::Conditioning(format!("rate expansion needs E > |u|^2 (E = {e_bar:e}, |u|^2 = {s:e})")));
        }
        Ok(Self {
            f: (e_bar / gap).log2() - s * LOG2_E / gap,
            q: LOG2_E / gap - LOG2_E / e_bar,
            b: u_bar * (LOG2_E / gap),
            e_bar,
            u_bar,
        })
    }

    /// Minorant value for signal amplitude `u` and total level `e`.
    pub fn value(&self, u: C64, e: f64) -> f64 {
        self.f + 2.0 * (self.b.conj() * u).re - self.q * e
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateCoefficients {
    pub common: Vec<RateMinorant>,
    pub private: Vec<RateMinorant>,
}

impl SurrogateCoefficients {
    pub fn get(&self, stream: Stream, user: usize) -> &RateMinorant {
        match stream {
            Stream::Common => &self.common[user],
            Stream::Private => &self.private[user],
        }
    }
}

/// Auxiliary variables attached to a subproblem solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxState {
    pub alpha_c: f64,
    pub alpha_p: Vec<f64>,
    pub beta_c: f64,
    pub beta_p: Vec<f64>,
    pub delta: Vec<f64>,
    pub mu: Vec<f64>,
    pub omega: f64,
}

/// Signal amplitude and total received level `E` for one stream of one user.
fn stream_terms(channels: &ChannelSet, dp: &DesignPoint, stream: Stream, user: usize) -> (C64, f64) {
    let h = effective_cu_channel(channels, &dp.star, user);
    let mut e = quad_form(&dp.an_covariance, &h) + 1.0;
    e += dp.w_private.iter().map(|w| inner(&h, w).norm_sqr()).sum::<f64>();
    let u = match stream {
        Stream::Common => {
            let u = inner(&h, &dp.w_common);
            e += u.norm_sqr();
            u
        }
        Stream::Private => inner(&h, &dp.w_private[user]),
    };
    (u, e)
}

/// Builds every rate minorant at `expansion`. The private stream of user `k`
/// expands along its own beam `w_p,k`.
pub fn mm_coefficients(channels: &ChannelSet, expansion: &DesignPoint) -> Result<SurrogateCoefficients> {
    let build = |stream| -> Result<Vec<RateMinorant>> {
        (0..channels.n_users())
            .map(|k| {
                let (u, e) = stream_terms(channels, expansion, stream, k);
                RateMinorant::at(e, u)
            })
            .collect()
    };
    Ok(SurrogateCoefficients { common: build(Stream::Common)?, private: build(Stream::Private)? })
}

/// The minorant evaluated at an arbitrary design (all of `R_s`, `W`, `V` free).
pub fn surrogate_rate(
    coeffs: &SurrogateCoefficients,
    channels: &ChannelSet,
    dp: &DesignPoint,
    stream: Stream,
    user: usize,
) -> f64 {
    let (u, e) = stream_terms(channels, dp, stream, user);
    coeffs.get(stream, user).value(u, e)
}

/// Result of a bound whose log argument may be nonpositive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    Finite(f64),
    /// `delta <= |g^H w|^2`: the auxiliary level cannot support the beam.
    Infeasible,
}

impl Bound {
    pub fn finite(self) -> Option<f64> {
        match self {
            Bound::Finite(v) => Some(v),
            Bound::Infeasible => None,
        }
    }
}

/// `log2(delta) - log2(delta - |g_j^H w|^2)`, an upper bound on the
/// eavesdropping rate of beam `w` at target `j` whenever `delta <= D_j`.
pub fn eavesdrop_upper_bound(channels: &ChannelSet, delta: f64, target: usize, beam: &CVector) -> Bound {
    let leak = inner(&channels.g_target[target], beam).norm_sqr();
    let arg = delta - leak;
    if !(arg > 0.0) || !(delta > 0.0) {
        return Bound::Infeasible;
    }
    if leak == 0.0 {
        return Bound::Finite(0.0);
    }
    Bound::Finite((leak / arg).ln_1p() * LOG2_E)
}

/// First-order expansion of `log2` at `delta_bar`; dominates `log2(delta)`.
pub fn tangent_log(delta: f64, delta_bar: f64) -> Result<f64> {
    if !(delta_bar > 0.0) {
        return Err(Error::Conditioning(format!("tangent point must be positive, got {delta_bar}")));
    }
    Ok(delta_bar.log2() + (delta - delta_bar) / (delta_bar * std::f64::consts::LN_2))
}

/// `2 Re(w_bar^H g g^H w) - |g^H w_bar|^2`, a global minorant of `|g^H w|^2`
/// that is tight at `w = w_bar`.
pub fn quadratic_minorant(w: &CVector, w_bar: &CVector, g: &CVector) -> f64 {
    let a = inner(g, w_bar);
    2.0 * (a.conj() * inner(g, w)).re - a.norm_sqr()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{eavesdrop_rates, stream_rates};
    use crate::testutil::{desk_channels, random_design};

    #[test]
    fn hand_evaluated_coefficients() {
        let m = RateMinorant::at(2.0, C64::new(1.0, 0.0)).unwrap();
        assert!((m.f - (1.0 - LOG2_E)).abs() < 1e-15);
        assert!((m.f + 0.4427).abs() < 1e-4);
        assert!((m.q - 0.7213).abs() < 1e-4);
        assert!((m.b - C64::new(LOG2_E, 0.0)).norm() < 1e-15);
        assert!((m.value(C64::new(1.0, 0.0), 2.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_signal_expansion_vanishes() {
        let m = RateMinorant::at(3.5, C64::new(0.0, 0.0)).unwrap();
        assert_eq!((m.f, m.q, m.b), (0.0, 0.0, C64::new(0.0, 0.0)));
    }

    #[test]
    fn degenerate_expansion_rejected() {
        assert!(RateMinorant::at(1.0, C64::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn tight_at_expansion() {
        for seed in 0..30 {
            let ch = desk_channels(seed);
            let dp = random_design(&ch, seed, 1.0);
            let coeffs = mm_coefficients(&ch, &dp).unwrap();
            let rates = stream_rates(&ch, &dp);
            for k in 0..ch.n_users() {
                let c = surrogate_rate(&coeffs, &ch, &dp, Stream::Common, k);
                let p = surrogate_rate(&coeffs, &ch, &dp, Stream::Private, k);
                assert!((c - rates.common_rate[k]).abs() <= 1e-9);
                assert!((p - rates.private_rate[k]).abs() <= 1e-9);
                assert!(coeffs.common[k].q >= 0.0 && coeffs.private[k].q >= 0.0);
            }
        }
    }

    #[test]
    fn zero_curvature_gives_affine_surrogate() {
        let mut m = RateMinorant::at(4.0, C64::new(1.0, 1.0)).unwrap();
        m.q = 0.0;
        let u = C64::new(0.3, -0.2);
        let a = m.value(u, 1.0);
        let b = m.value(u * 2.0, 1.0);
        let c = m.value(u * 3.0, 1.0);
        assert!(((b - a) - (c - b)).abs() < 1e-12);
        assert_eq!(m.value(u, 1.0), m.value(u, 100.0));
    }

    #[test]
    fn eavesdrop_bound_examples() {
        let ch = desk_channels(2);
        let dp = random_design(&ch, 2, 1e-3);
        let e = eavesdrop_rates(&ch, &dp);
        for j in 0..ch.n_targets() {
            let d = e.d_target[j];
            let tight = eavesdrop_upper_bound(&ch, d, j, &dp.w_common).finite().unwrap();
            assert!((tight - e.eaves_common[j]).abs() < 1e-9);
            let loose = eavesdrop_upper_bound(&ch, 0.9 * d, j, &dp.w_common);
            if let Bound::Finite(v) = loose {
                assert!(v >= e.eaves_common[j]);
            }
            let zero = CVector::zeros(ch.n_bs());
            assert_eq!(eavesdrop_upper_bound(&ch, d, j, &zero), Bound::Finite(0.0));
            let leak = inner(&ch.g_target[j], &dp.w_common).norm_sqr();
            assert_eq!(eavesdrop_upper_bound(&ch, leak, j, &dp.w_common), Bound::Infeasible);
        }
    }

    #[test]
    fn tangent_examples() {
        assert_eq!(tangent_log(1.0, 1.0).unwrap(), 0.0);
        let t = tangent_log(2.0, 1.0).unwrap();
        assert!((t - 1.0 / std::f64::consts::LN_2).abs() < 1e-15);
        assert!(t >= 1.0);
        assert!(tangent_log(1.0, 0.0).is_err());
        assert!(tangent_log(1.0, -2.0).is_err());
    }

    #[test]
    fn tangent_dominates_log_on_grid() {
        for i in 1..=200 {
            for k in 1..=200 {
                let d = i as f64 * 0.05;
                let db = k as f64 * 0.05;
                let t = tangent_log(d, db).unwrap();
                assert!(t >= d.log2() - 1e-12);
                if i == k {
                    assert!((t - d.log2()).abs() < 1e-12);
                } else {
                    assert!(t > d.log2());
                }
            }
        }
    }

    #[test]
    fn quadratic_minorant_examples() {
        let g = CVector::from_vec(vec![C64::new(1.0, 2.0), C64::new(-0.5, 0.1)]);
        let wb = CVector::from_vec(vec![C64::new(0.3, 0.0), C64::new(0.0, 1.0)]);
        let exact = inner(&g, &wb).norm_sqr();
        assert!((quadratic_minorant(&wb, &wb, &g) - exact).abs() < 1e-12);
        let zero = CVector::zeros(2);
        assert!((quadratic_minorant(&zero, &wb, &g) + exact).abs() < 1e-12);
    }
}
