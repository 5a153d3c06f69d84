use proptest::prelude::*;

use starisac::channel::{sample_channels, ChannelSet};
use starisac::harness::selftest::random_design;
use starisac::linalg::{inner, CVector, C64};
use starisac::metrics::{eavesdrop_rates, stream_rates};
use starisac::scenario::{sample_geometry, SystemConfig};
use starisac::surrogate::{
    eavesdrop_upper_bound, mm_coefficients, quadratic_minorant, surrogate_rate, tangent_log, Stream,
};

fn desk(seed: u64) -> ChannelSet {
    let cfg = SystemConfig::desk();
    sample_channels(&cfg, &sample_geometry(&cfg, seed).unwrap(), seed).unwrap()
}

fn cvec(parts: &[(f64, f64)]) -> CVector {
    CVector::from_iterator(parts.len(), parts.iter().map(|&(re, im)| C64::new(re, im)))
}

proptest! {
    #[test]
    fn tangent_dominates_log(a in -6.0f64..6.0, b in -6.0f64..6.0) {
        let (d, bar) = (10f64.powf(a), 10f64.powf(b));
        let t = tangent_log(d, bar).unwrap();
        prop_assert!(d.log2() <= t + 1e-12 * t.abs().max(1.0));
        prop_assert!((tangent_log(bar, bar).unwrap() - bar.log2()).abs() < 1e-12);
    }

    #[test]
    fn quadratic_minorant_is_tight_and_below(
        n in 1usize..8,
        seed in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 24),
    ) {
        let w = cvec(&seed[0..n]);
        let w_bar = cvec(&seed[8..8 + n]);
        let g = cvec(&seed[16..16 + n]);
        let exact = inner(&g, &w).norm_sqr();
        prop_assert!(quadratic_minorant(&w, &w_bar, &g) <= exact + 1e-10 * (1.0 + exact));
        let at_bar = inner(&g, &w_bar).norm_sqr();
        prop_assert!((quadratic_minorant(&w_bar, &w_bar, &g) - at_bar).abs() <= 1e-10 * (1.0 + at_bar));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rate_minorants_touch_at_the_expansion_and_stay_below(
        chan in 0u64..6,
        bar_seed in 0u64..10_000,
        other_seed in 0u64..10_000,
        scale in -3.0f64..0.0,
    ) {
        let ch = desk(chan);
        let power = SystemConfig::desk().power_budget_w();
        let bar = random_design(&ch, bar_seed, power);
        let coeffs = mm_coefficients(&ch, &bar).unwrap();
        let at_bar = stream_rates(&ch, &bar);
        let other = random_design(&ch, other_seed, power * 10f64.powf(scale));
        let at_other = stream_rates(&ch, &other);
        for k in 0..ch.n_users() {
            for (stream, r_bar, r) in [
                (Stream::Common, at_bar.common_rate[k], at_other.common_rate[k]),
                (Stream::Private, at_bar.private_rate[k], at_other.private_rate[k]),
            ] {
                prop_assert!((surrogate_rate(&coeffs, &ch, &bar, stream, k) - r_bar).abs() <= 1e-9);
                prop_assert!(surrogate_rate(&coeffs, &ch, &other, stream, k) <= r + 1e-9);
            }
        }
    }

    #[test]
    fn eavesdrop_bound_is_exact_at_the_interference_level(chan in 0u64..6, seed in 0u64..10_000, frac in 0.05f64..1.0) {
        let ch = desk(chan);
        let dp = random_design(&ch, seed, SystemConfig::desk().power_budget_w());
        let eaves = eavesdrop_rates(&ch, &dp);
        for j in 0..ch.n_targets() {
            let d = eaves.d_target[j];
            let exact = eavesdrop_upper_bound(&ch, d, j, &dp.w_common).finite().unwrap();
            prop_assert!((exact - eaves.eaves_common[j]).abs() <= 1e-9 * (1.0 + exact));
            let leak = inner(&ch.g_target[j], &dp.w_common).norm_sqr();
            let lower = leak + frac * (d - leak);
            // Shrinking the level toward the leak can only raise the bound.
            let looser = eavesdrop_upper_bound(&ch, lower, j, &dp.w_common).finite().unwrap();
            prop_assert!(looser >= exact - 1e-12);
            prop_assert!(eavesdrop_upper_bound(&ch, leak, j, &dp.w_common).finite().is_none());
        }
    }
}
