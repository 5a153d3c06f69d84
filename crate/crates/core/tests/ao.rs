use starisac::channel::sample_channels;
use starisac::conic::ClarabelSolver;
use starisac::driver::{evaluate_design, run_ao_with, AoOptions, TerminalStatus, FEASIBILITY_TAU};
use starisac::metrics::transmit_power;
use starisac::scenario::{derive_run_seed, sample_geometry, SystemConfig};
use starisac::subproblems::{sensing_only, Baseline};

#[test]
fn every_baseline_respects_its_structure() {
    let cfg = SystemConfig::desk();
    let seed = derive_run_seed(cfg.master_seed, 2);
    let ch = sample_channels(&cfg, &sample_geometry(&cfg, seed).unwrap(), seed).unwrap();
    let opts = AoOptions::default();
    let consts = sensing_only(&ch, &cfg, &ClarabelSolver, &opts.settings).unwrap();
    let mut omega = Vec::new();
    for b in Baseline::ALL {
        let trace = run_ao_with(&ch, &cfg, &consts, b, seed, &ClarabelSolver, &opts).unwrap();
        assert_ne!(trace.status, TerminalStatus::Infeasible, "{b}");
        assert!(trace.n_iterations() <= cfg.max_iters);
        assert!(trace.max_drop() <= 1e-6, "{b}: drop {}", trace.max_drop());
        let dp = &trace.design;
        assert!(transmit_power(dp) <= cfg.power_budget_w() * (1.0 + FEASIBILITY_TAU));
        let eval = evaluate_design(&ch, dp, &consts, &cfg);
        assert!(eval.feasible, "{b}: {:?}", eval.worst_slack);
        assert_eq!(eval.omega_hat, trace.omega_hat());
        match b {
            Baseline::SdmaStarOpt => {
                assert_eq!(dp.w_common.norm(), 0.0);
                assert!(dp.rate_split.iter().all(|&r| r == 0.0));
            }
            Baseline::RsmaNoRis => {
                assert_eq!(dp.star, starisac::metrics::StarProfile::no_ris(cfg.n_ris_elements));
            }
            Baseline::RsmaRisConv => {
                // Every element serves one face only.
                assert!(dp
                    .star
                    .v_t
                    .iter()
                    .zip(&dp.star.v_r)
                    .take(cfg.n_ris_elements)
                    .all(|(t, r)| t.norm() * r.norm() == 0.0));
            }
            _ => {}
        }
        let energy = dp.star.element_energy();
        assert!(energy.iter().all(|&e| e <= 1.0 + 1e-6), "{b}: {energy:?}");
        omega.push(trace.omega_hat());
    }
    // The optimized STAR surface with rate splitting beats fixing the surface or dropping it.
    assert!(omega[0] >= omega[2] && omega[0] >= omega[3], "{omega:?}");
}
