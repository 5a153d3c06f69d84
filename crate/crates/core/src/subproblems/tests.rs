use super::*;
use crate::channel::sample_channels;
use crate::channel::steering_vector;
use crate::conic::ClarabelSolver;
use crate::linalg::min_eigenvalue;
use crate::metrics::{check_feasibility, sensing_report};
use crate::scenario::sample_geometry;
use crate::testutil::random_design;

struct Fixture {
    cfg: SystemConfig,
    ch: ChannelSet,
    consts: SensingConstants,
}

impl Fixture {
    fn new(seed: u64) -> Self {
        Self::with_config(SystemConfig::desk(), seed)
    }

    fn with_config(cfg: SystemConfig, seed: u64) -> Self {
        let geo = sample_geometry(&cfg, seed).unwrap();
        let ch = sample_channels(&cfg, &geo, seed).unwrap();
        let consts = sensing_only(&ch, &cfg, &ClarabelSolver, &SolverSettings::default()).unwrap();
        Self { cfg, ch, consts }
    }

    fn inputs(&self, rsma: bool) -> StepInputs<'_> {
        StepInputs { channels: &self.ch, consts: &self.consts, config: &self.cfg, rsma }
    }

    fn start(&self, baseline: Baseline, seed: u64) -> (DesignPoint, BuildPlan) {
        let zero = DesignPoint::zeros(self.ch.n_bs(), self.ch.n_ris(), self.ch.n_users());
        let (dp, plan) = apply_baseline(&zero, baseline, seed);
        let dp = initial_design(&self.inputs(plan.rsma), dp.star, InitPolicy::NullSteering);
        (dp, plan)
    }

    fn feasible(&self, dp: &DesignPoint) -> bool {
        let rep = RateReport::evaluate(&self.ch, dp);
        let sens = sensing_report(&self.ch, dp, &self.consts);
        check_feasibility(dp, &rep, &sens, &self.cfg).is_feasible(1e-9)
    }

    fn omega_hat(&self, dp: &DesignPoint) -> f64 {
        RateReport::evaluate(&self.ch, dp).min_total_secrecy()
    }
}

fn settings() -> SolverSettings {
    SolverSettings::default()
}

#[test]
fn sensing_single_target_closed_form() {
    let a = steering_vector(0.3, 4, 0.5);
    let r = max_min_beampattern(std::slice::from_ref(&a), 1.0, &ClarabelSolver, &settings()).unwrap();
    assert!((crate::linalg::quad_form(&r, &a) - 4.0).abs() < 1e-6);
    assert!(r.trace().re <= 1.0 + 1e-8);
    assert!(min_eigenvalue(&r) >= -1e-8);
}

#[test]
fn sensing_orthogonal_pair_splits_power() {
    let deg = std::f64::consts::PI / 6.0;
    let steer = [steering_vector(deg, 2, 0.5), steering_vector(-deg, 2, 0.5)];
    assert!(crate::linalg::inner(&steer[0], &steer[1]).norm() < 1e-12);
    let r = max_min_beampattern(&steer, 1.0, &ClarabelSolver, &settings()).unwrap();
    for a in &steer {
        assert!((crate::linalg::quad_form(&r, a) - 1.0).abs() < 1e-6);
    }
}

#[test]
fn sensing_constants_are_proportional() {
    let f = Fixture::new(3);
    for j in 0..f.ch.n_targets() {
        let expect = f.ch.target_gain[j] * f.consts.g_opt[j];
        assert!((f.consts.d_opt[j] - expect).abs() <= 1e-9 * expect.max(1.0));
    }
    assert!(f.consts.r_opt.trace().re <= f.cfg.power_budget_w() * (1.0 + 1e-8));
    assert!(min_eigenvalue(&f.consts.r_opt) >= -1e-8 * f.cfg.power_budget_w());
}

#[test]
fn w_step_constraint_count_matches_formula() {
    let f = Fixture::new(1);
    let (dp, _) = f.start(Baseline::RsmaStarOpt, 1);
    let step = build_w_step(&f.inputs(true), &dp).unwrap();
    let (kc, ks) = (f.ch.n_users(), f.ch.n_targets());
    let expect = 2 * kc + ks + ks * (1 + kc) + ks + ks + (2 * kc + 1) + kc + 2;
    assert_eq!(step.program.constraints().len(), expect);
    let counts = step.program.count_by_tag();
    assert_eq!(counts[tags::COMMON_RATE], kc);
    assert_eq!(counts[tags::EAVES_COMMON], ks);
    assert_eq!(counts[tags::EAVES_PRIVATE], ks * kc);
    assert_eq!(counts[tags::COMMON_BUDGET], 1);
}

#[test]
fn sdma_w_step_drops_common_parts() {
    let f = Fixture::new(1);
    let (dp, plan) = f.start(Baseline::SdmaStarOpt, 1);
    assert!(!plan.rsma);
    let step = build_w_step(&f.inputs(false), &dp).unwrap();
    let counts = step.program.count_by_tag();
    for tag in [tags::COMMON_RATE, tags::EAVES_COMMON, tags::COMMON_BUDGET, tags::RATE_NONNEG] {
        assert!(!counts.contains_key(tag), "{tag}");
    }
    assert!(step.program.var("w_common").is_none());
}

#[test]
fn tags_appear_once_per_label() {
    let f = Fixture::new(2);
    let (dp, _) = f.start(Baseline::RsmaRisConv, 2);
    for step in [
        build_w_step(&f.inputs(true), &dp).unwrap(),
        build_v_step(&f.inputs(true), &dp).unwrap(),
        build_v_step_conventional(&f.inputs(true), &dp).unwrap(),
    ] {
        let mut seen = std::collections::HashSet::new();
        for c in step.program.constraints() {
            assert!(seen.insert((c.tag.clone(), c.label.clone())), "{}[{}]", c.tag, c.label);
        }
    }
}

#[test]
fn null_steering_start_is_feasible() {
    for seed in 0..4 {
        let f = Fixture::new(seed);
        for b in Baseline::ALL {
            let (dp, _) = f.start(b, seed);
            assert!(f.feasible(&dp), "seed {seed} {b}");
        }
    }
}

#[test]
fn tight_expansion_is_feasible_for_both_steps() {
    for seed in 0..3 {
        let f = Fixture::new(seed);
        for b in [Baseline::RsmaStarOpt, Baseline::SdmaStarOpt, Baseline::RsmaRisConv] {
            let (dp, plan) = f.start(b, seed);
            let inp = f.inputs(plan.rsma);
            let steps = [build_w_step(&inp, &dp).unwrap(), build_v_step(&inp, &dp).unwrap()];
            for step in &steps {
                let x = step.tight_point(&f.ch, &dp);
                let viol = step.program.max_violation(&x);
                assert!(viol < 1e-9, "seed {seed} {b} {:?}: {viol:e}", step.kind);
                let obj = step.program.objective().eval(&x);
                assert!((obj - f.omega_hat(&dp)).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn tangency_holds_at_random_feasible_points() {
    // Random designs with generous AN are generally infeasible for the
    // original problem; keep the ones that are and check tangency there.
    let f = Fixture::new(7);
    for seed in 0..40 {
        let mut dp = random_design(&f.ch, seed, f.cfg.power_budget_w());
        dp.rate_split.iter_mut().for_each(|r| *r = 0.0);
        if !f.feasible(&dp) {
            continue;
        }
        for step in [build_w_step(&f.inputs(true), &dp).unwrap(), build_v_step(&f.inputs(true), &dp).unwrap()] {
            let x = step.tight_point(&f.ch, &dp);
            assert!(step.program.max_violation(&x) < 1e-9);
        }
    }
}

#[test]
fn middle_matrix_is_psd() {
    for seed in 0..20 {
        let ch = crate::testutil::desk_channels(seed);
        let dp = random_design(&ch, seed, 1.0);
        for k in 0..ch.n_users() {
            let m = middle_matrix(&ch, &dp, k);
            let scale = crate::linalg::max_abs(m.iter()).max(1.0);
            assert!(min_eigenvalue(&m) >= -1e-10 * scale);
            let v = dp.star.for_region(ch.regions[k]);
            let direct = crate::linalg::quad_form(&m, v);
            let h = crate::channel::effective_cu_channel(&ch, &dp.star, k);
            let expect = crate::linalg::quad_form(&dp.transmit_covariance(), &h);
            assert!((direct - expect).abs() <= 1e-9 * expect.max(1.0));
        }
    }
}

#[test]
fn w_step_ascends_and_minorizes() {
    for seed in 0..3 {
        let f = Fixture::new(seed);
        for b in [Baseline::RsmaStarOpt, Baseline::SdmaStarOpt] {
            let (dp, plan) = f.start(b, seed);
            let step = build_w_step(&f.inputs(plan.rsma), &dp).unwrap();
            let sol = step.solve(&ClarabelSolver, &settings()).unwrap();
            let before = f.omega_hat(&dp);
            assert!(sol.omega >= before - 1e-6, "{b}: {} < {before}", sol.omega);
            assert!(f.omega_hat(&sol.design) >= sol.omega - 1e-6);
            assert!(crate::metrics::transmit_power(&sol.design) <= f.cfg.power_budget_w() * (1.0 + 1e-6));
        }
    }
}

#[test]
fn v_step_ascends_and_respects_energy() {
    for seed in 0..3 {
        let f = Fixture::new(seed);
        let (dp, _) = f.start(Baseline::RsmaStarOpt, seed);
        let w = build_w_step(&f.inputs(true), &dp).unwrap().solve(&ClarabelSolver, &settings()).unwrap();
        let step = build_v_step(&f.inputs(true), &w.design).unwrap();
        let sol = step.solve(&ClarabelSolver, &settings()).unwrap();
        let before = f.omega_hat(&w.design);
        assert!(sol.omega >= before - 1e-6);
        assert!(f.omega_hat(&sol.design) >= sol.omega - 1e-6);
        for e in sol.design.star.element_energy() {
            assert!(e <= 1.0 + 1e-8);
        }
        let n = f.ch.n_ris();
        assert_eq!(sol.design.star.v_t[n], C64::new(1.0, 0.0));
        assert_eq!(sol.design.star.v_r[n], C64::new(1.0, 0.0));
    }
}

#[test]
fn conventional_step_has_exact_zeros_and_is_dominated() {
    let f = Fixture::new(4);
    let (dp, _) = f.start(Baseline::RsmaRisConv, 4);
    let w = build_w_step(&f.inputs(true), &dp).unwrap().solve(&ClarabelSolver, &settings()).unwrap();
    let conv =
        build_v_step_conventional(&f.inputs(true), &w.design).unwrap().solve(&ClarabelSolver, &settings()).unwrap();
    let star = build_v_step(&f.inputs(true), &w.design).unwrap().solve(&ClarabelSolver, &settings()).unwrap();
    let n = f.ch.n_ris();
    for i in 0..n / 2 {
        assert_eq!(conv.design.star.v_t[i], C64::new(0.0, 0.0));
    }
    for i in n / 2..n {
        assert_eq!(conv.design.star.v_r[i], C64::new(0.0, 0.0));
    }
    assert!(conv.omega <= star.omega + 1e-6);
}

#[test]
fn odd_element_count_is_rejected() {
    let f = Fixture::new(0);
    let mut ch = f.ch.clone();
    let n_s = ch.n_ris();
    for g in ch.g_cu.iter_mut() {
        *g = g.clone().remove_row(n_s - 1);
    }
    ch.h_bs_ris = ch.h_bs_ris.clone().remove_row(n_s - 1);
    let inp = StepInputs { channels: &ch, consts: &f.consts, config: &f.cfg, rsma: true };
    let mut dp = f.start(Baseline::RsmaRisConv, 0).0;
    dp.star = StarProfile::no_ris(n_s - 1);
    assert!(matches!(build_v_step_conventional(&inp, &dp), Err(Error::InvalidConfig(_))));
}

#[test]
fn baseline_restrictions() {
    let f = Fixture::new(5);
    let dp = random_design(&f.ch, 5, 1.0);
    let (sdma, plan) = apply_baseline(&dp, Baseline::SdmaStarOpt, 5);
    assert!(!plan.rsma && plan.v_step == VStepKind::Star);
    assert_eq!(sdma.w_common.norm(), 0.0);
    let rep = RateReport::evaluate(&f.ch, &sdma);
    assert!(rep.common_rate.iter().all(|&r| r == 0.0));
    assert!(sdma.rate_split.iter().all(|&r| r == 0.0));

    let (none, plan) = apply_baseline(&dp, Baseline::RsmaNoRis, 5);
    assert_eq!(plan.v_step, VStepKind::Frozen);
    for k in 0..f.ch.n_users() {
        let h = crate::channel::effective_cu_channel(&f.ch, &none.star, k);
        let direct = f.ch.h_bs_cu[k].clone() / C64::new(f.ch.noise_comm_std, 0.0);
        let scale = direct.norm();
        assert!((h - direct).norm() <= 1e-12 * scale);
    }

    let (rand, plan) = apply_baseline(&dp, Baseline::RsmaStarRand, 5);
    assert_eq!(plan.v_step, VStepKind::Frozen);
    for e in rand.star.element_energy() {
        assert!((e - 1.0).abs() < 1e-12);
    }
    let (_, plan) = apply_baseline(&dp, Baseline::RsmaRisConv, 5);
    assert_eq!(plan.v_step, VStepKind::Conventional);
}

#[test]
fn baseline_names_roundtrip() {
    for b in Baseline::ALL {
        assert_eq!(b.name().parse::<Baseline>().unwrap(), b);
        assert_eq!(serde_json::to_string(&b).unwrap(), format!("\"{}\"", b.name()));
    }
    assert!(matches!("rsma-magic".parse::<Baseline>(), Err(Error::Unknown { .. })));
}

#[test]
fn restoration_of_feasible_expansion_matches_plain_solve() {
    let f = Fixture::new(6);
    let (dp, _) = f.start(Baseline::RsmaStarOpt, 6);
    let step = build_w_step(&f.inputs(true), &dp).unwrap();
    let plain = step.solve(&ClarabelSolver, &settings()).unwrap();
    let rest = restore_feasibility(&step, &ClarabelSolver, &settings()).unwrap();
    assert!(rest.restored);
    assert!(rest.solution.slack < 1e-8);
    assert!((rest.solution.omega - plain.omega).abs() < 1e-5);
}

#[test]
fn matched_filter_start_is_restored() {
    let f = Fixture::new(8);
    let (start, _) = f.start(Baseline::RsmaStarOpt, 8);
    let dp = initial_design(&f.inputs(true), start.star, InitPolicy::MatchedFilter);
    let step = build_w_step(&f.inputs(true), &dp).unwrap();
    let rest = restore_feasibility(&step, &ClarabelSolver, &settings()).unwrap();
    assert!(rest.slack_history.windows(2).all(|w| w[1] <= w[0] + 1e-7 * (1.0 + w[0])));
    if rest.restored {
        assert!(f.feasible(&rest.solution.design) || rest.solution.slack < 1e-8);
    }
}

#[test]
fn unattainable_floor_is_diagnosed() {
    // Inflating the sensing benchmark makes the floor exceed what the budget
    // can deliver, so the slack cannot vanish.
    let mut cfg = SystemConfig::desk();
    cfg.power_budget_dbm = -10.0;
    cfg.beampattern_ratio_db = vec![-0.01];
    let mut f = Fixture::with_config(cfg, 9);
    f.consts.d_opt.iter_mut().for_each(|d| *d *= 4.0);
    let (dp, _) = f.start(Baseline::RsmaStarOpt, 9);
    let step = build_w_step(&f.inputs(true), &dp).unwrap();
    let rest = restore_feasibility(&step, &ClarabelSolver, &settings()).unwrap();
    assert!(!rest.restored);
    assert!(rest.slack_history.windows(2).all(|w| w[1] <= w[0] + 1e-7 * (1.0 + w[0])));
    assert!(matches!(rest.into_result(), Err(Error::Infeasible { .. })));
}
