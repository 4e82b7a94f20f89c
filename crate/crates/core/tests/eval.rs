use std::sync::Arc;

use approx::assert_abs_diff_eq;
use gail_lin::datasets::{generate_additional, generate_demos, Behavior};
use gail_lin::eval::*;
use gail_lin::mdp::*;
use gail_lin::numerics::norm2;
use gail_lin::ogap::{run_ogap, OgapConfig};
use gail_lin::pgap::{estimate_kernel, MixedPolicy, PgapConfig};
use gail_lin::rng::seeded;
use proptest::prelude::*;
use rand::Rng;

fn dense_instance(ns: usize, na: usize, horizon: usize, dim: usize, seed: u64) -> Instance {
    let mdp = random_tabular_mdp(ns, na, horizon, seed).unwrap();
    let psi = Arc::new(random_reward_features(ns, na, dim, false, seed ^ 5).unwrap());
    let reward = RewardModel::new(psi, random_mu(dim, horizon, false, &mut seeded(seed ^ 6))).unwrap();
    Instance::from_parts(mdp, reward).unwrap()
}

#[test]
fn expert_iterates_have_no_regret() {
    let inst = Instance::reference();
    let report = worst_case_regret(&inst.mdp, &inst.expert, &vec![inst.expert.clone(); 5], &inst.reward_features).unwrap();
    assert_eq!(report.total(), 0.0);
    assert!(report.mu_star.iter().flatten().all(|&m| m == 0.0));
    let gap = optimality_gap(&inst.mdp, &inst.expert, &MixedPolicy::new(vec![inst.expert.clone()]).unwrap(), &inst.reward_features).unwrap();
    assert_eq!(gap.gap, 0.0);
}

#[test]
fn regret_of_copies_scales_linearly() {
    let inst = dense_instance(4, 3, 3, 3, 1);
    let p = random_policy(4, 3, 3, &mut seeded(2));
    let mixed = MixedPolicy::new(vec![p.clone()]).unwrap();
    let single = optimality_gap(&inst.mdp, &inst.expert, &mixed, &inst.reward_features).unwrap().gap;
    let report = worst_case_regret(&inst.mdp, &inst.expert, &vec![p; 7], &inst.reward_features).unwrap();
    for (k, r) in report.cumulative.iter().enumerate() {
        assert_abs_diff_eq!(*r, (k + 1) as f64 * single, epsilon = 1e-9);
    }
    assert_abs_diff_eq!(report.per_episode[0], single, epsilon = 1e-12);
    assert!(report.to_csv().starts_with("k,cumulative_regret\n1,"));
    assert_eq!(report.to_csv().lines().count(), 8);
}

#[test]
fn gap_matches_polar_grid_search() {
    // H = 1 and a two-dimensional reward space, so the ball is a disk
    let inst = dense_instance(3, 2, 1, 2, 3);
    let p = random_policy(3, 2, 1, &mut seeded(4));
    let mixed = MixedPolicy::new(vec![p.clone()]).unwrap();
    let report = optimality_gap(&inst.mdp, &inst.expert, &mixed, &inst.reward_features).unwrap();
    let psi = &inst.reward_features;
    let radius = 2f64.sqrt();
    let mut best = f64::NEG_INFINITY;
    let angles = 400_000;
    for r_step in 0..=4 {
        let r = radius * r_step as f64 / 4.0;
        for i in 0..angles {
            let t = std::f64::consts::TAU * i as f64 / angles as f64;
            let mu = vec![vec![r * t.cos(), r * t.sin()]];
            let tables: Vec<Vec<f64>> = mu.iter().map(|m| psi.reward_table(m)).collect();
            let value = expected_return_rewards(&inst.mdp, &tables, &inst.expert).unwrap()
                - expected_return_rewards(&inst.mdp, &tables, &p).unwrap();
            best = best.max(value);
        }
    }
    assert_abs_diff_eq!(report.gap, best, epsilon = 1e-6);
    assert!(report.gap >= best - 1e-12);
}

#[test]
fn maximizer_attains_the_closed_form() {
    let inst = dense_instance(4, 2, 3, 4, 8);
    let mut rng = seeded(9);
    let iterates: Vec<Policy> = (0..3).map(|_| random_policy(4, 2, 3, &mut rng)).collect();
    let report = worst_case_regret(&inst.mdp, &inst.expert, &iterates, &inst.reward_features).unwrap();
    for m in &report.mu_star {
        assert!(norm2(m) <= 2.0 + 1e-12);
    }
    let tables: Vec<Vec<f64>> = report.mu_star.iter().map(|m| inst.reward_features.reward_table(m)).collect();
    let je = expected_return_rewards(&inst.mdp, &tables, &inst.expert).unwrap();
    let attained: f64 = iterates.iter().map(|p| je - expected_return_rewards(&inst.mdp, &tables, p).unwrap()).sum();
    assert_abs_diff_eq!(attained, report.total(), epsilon = 1e-9);
    for _ in 0..2000 {
        let mu = sample_reward_parameter(4, 3, &mut rng);
        let tables: Vec<Vec<f64>> = mu.iter().map(|m| inst.reward_features.reward_table(m)).collect();
        let je = expected_return_rewards(&inst.mdp, &tables, &inst.expert).unwrap();
        let v: f64 = iterates.iter().map(|p| je - expected_return_rewards(&inst.mdp, &tables, p).unwrap()).sum();
        assert!(v <= report.total() + 1e-12);
    }
}

#[test]
fn intrinsic_uncertainty_examples() {
    let inst = Instance::reference();
    assert_eq!(intrinsic_uncertainty(&inst.mdp, &inst.expert, &vec![vec![0.0; 12]; 4]).unwrap(), 0.0);
    assert_abs_diff_eq!(intrinsic_uncertainty(&inst.mdp, &inst.expert, &vec![vec![0.7; 12]; 4]).unwrap(), 2.0 * 4.0 * 0.7, epsilon = 1e-12);
}

#[test]
fn intrinsic_uncertainty_shrinks_with_more_data() {
    let inst = Instance::reference();
    let data = generate_additional(&inst.mdp, Behavior::Uniform, 2000, 1);
    let config = PgapConfig {
        kappa_scale: 0.05,
        ..PgapConfig::default()
    };
    // fixed κ isolates the data dependence
    let params = config.resolve(&inst.mdp, &inst.reward_features, 2000).unwrap();
    let mut last = f64::INFINITY;
    for n in [100, 400, 1000, 2000] {
        let kernel = estimate_kernel(&inst.mdp, &data.prefix(n), &params).unwrap();
        let iu = intrinsic_uncertainty(&inst.mdp, &inst.expert, &kernel.gamma).unwrap();
        assert!(iu <= last + 1e-12);
        last = iu;
    }
}

#[test]
fn mc_bound_formula_and_examples() {
    let b = mc_bound(4, 12, 100, 0.1);
    assert_abs_diff_eq!(b, 4.0 * (64.0 * 144.0 / 100.0f64).sqrt() * (6000.0f64).ln(), epsilon = 1e-9);

    let phi = TransitionFeatures::tabular(2, 2);
    let theta = vec![0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0];
    let mdp = LinearKernelMdp::new(phi, vec![theta; 3], 0, 1.0).unwrap();
    let expert = Policy::deterministic(2, 2, 3, &[0, 1, 1, 0, 0, 0]).unwrap();
    let psi = RewardFeatures::tabular(2, 2);
    let report = mc_bound_check(&mdp, &expert, &psi, 10, 100, 0.1, 1).unwrap();
    assert!(report.deviations.iter().all(|&d| d.abs() < 1e-12));

    let inst = Instance::reference();
    let large = mc_bound_check(&inst.mdp, &inst.expert, &inst.reward_features, 1_000_000, 10, 0.1, 2).unwrap();
    let worst = large.deviations.iter().copied().fold(0.0, f64::max);
    assert!(worst < 0.01 * large.bound, "{worst} vs {}", large.bound);

    let small = mc_bound_check(&inst.mdp, &inst.expert, &inst.reward_features, 100, 200, 0.1, 3).unwrap();
    assert!(small.violation_fraction <= 0.1);
}

#[test]
fn slope_examples() {
    let ks = [512.0, 1024.0, 2048.0, 4096.0, 8192.0];
    let sqrt: Vec<f64> = ks.iter().map(|k: &f64| 3.0 * k.sqrt()).collect();
    assert_abs_diff_eq!(slope_fit(&ks, &sqrt).unwrap(), 0.5, epsilon = 1e-9);
    let lin: Vec<f64> = ks.iter().map(|k| 0.2 * k).collect();
    assert_abs_diff_eq!(slope_fit(&ks, &lin).unwrap(), 1.0, epsilon = 1e-9);
    let mut with_zero = sqrt.clone();
    with_zero[2] = 0.0;
    assert_abs_diff_eq!(slope_fit(&ks, &with_zero).unwrap(), 0.5, epsilon = 1e-9);
    assert!(slope_fit(&[1.0], &[1.0]).is_err());
}

#[test]
fn finite_difference_examples() {
    let linear = |x: &[f64]| 3.0 * x[0] - 2.0 * x[1] + 0.5;
    assert!(finite_diff_check(&linear, &[3.0, -2.0], &[0.4, -1.3], 1e-5) <= 1e-10);
    let quad = |x: &[f64]| x[0] * x[0] + 3.0 * x[0] * x[1] - x[1] * x[1];
    let p = [0.7, -0.2];
    let grad = [2.0 * p[0] + 3.0 * p[1], 3.0 * p[0] - 2.0 * p[1]];
    assert!(finite_diff_check(&quad, &grad, &p, 1e-5) <= 1e-8);
    assert!(finite_diff_check(&quad, &[grad[0] + 0.1, grad[1]], &p, 1e-5) > 1e-3);
}

#[test]
fn online_runs_satisfy_elliptical_potential() {
    let inst = Instance::reference();
    let demos = generate_demos(&inst.mdp, &inst.expert, 100, 1, "expert");
    let log = run_ogap(&inst.mdp, &inst.reward_features, &demos, &OgapConfig { episodes: 300, ..OgapConfig::default() }).unwrap();
    let audits = audit_run(&log).unwrap();
    assert_eq!(audits.len(), 4);
    assert!(audits.iter().all(|a| a.holds()));
}

#[test]
fn sampled_parameters_fill_the_ball() {
    let mut rng = seeded(1);
    let mut max_norm: f64 = 0.0;
    for _ in 0..5000 {
        for m in sample_reward_parameter(3, 2, &mut rng) {
            let n = norm2(&m);
            assert!(n <= 3f64.sqrt() + 1e-12);
            max_norm = max_norm.max(n);
        }
    }
    assert!(max_norm > 0.95 * 3f64.sqrt());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn extended_value_difference_identity(
        ns in 1usize..6, na in 1usize..4, horizon in 1usize..5, seed in any::<u64>()
    ) {
        let mdp = random_mixture_mdp(ns.max(2), na, horizon, 3, seed).unwrap();
        let ns = ns.max(2);
        let mut rng = seeded(seed ^ 9);
        let rewards: Vec<Vec<f64>> = (0..horizon).map(|_| (0..ns * na).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let qhat: Vec<Vec<f64>> = (0..horizon).map(|_| (0..ns * na).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();
        let pi = random_policy(ns, na, horizon, &mut rng);
        let other = random_policy(ns, na, horizon, &mut rng);
        let (lhs, rhs) = extended_value_difference(&mdp, &rewards, &pi, &other, &qhat).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-9);
    }

    #[test]
    fn closed_form_dominates_samples(seed in any::<u64>()) {
        let inst = dense_instance(3, 2, 2, 3, seed);
        let mut rng = seeded(seed);
        let p = random_policy(3, 2, 2, &mut rng);
        let gap = optimality_gap(&inst.mdp, &inst.expert, &MixedPolicy::new(vec![p.clone()]).unwrap(), &inst.reward_features).unwrap();
        prop_assert!(gap.gap >= 0.0);
        for _ in 0..200 {
            let mu = sample_reward_parameter(3, 2, &mut rng);
            let reward = RewardModel::new(inst.reward_features.clone(), mu).unwrap();
            let v = gail_objective(&inst.mdp, &reward, &inst.expert, &p).unwrap();
            prop_assert!(v <= gap.gap + 1e-12);
        }
    }
}
