use approx::assert_abs_diff_eq;
use gail_lin::datasets::{generate_demos, Transition};
use gail_lin::mdp::*;
use gail_lin::numerics::{norm2, RewardDomain, RidgeAccumulator};
use gail_lin::ogap::*;
use gail_lin::rng::seeded;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

fn one_state_mdp(num_actions: usize, horizon: usize) -> LinearKernelMdp {
    let phi = TransitionFeatures::tabular(1, num_actions);
    LinearKernelMdp::new(phi, vec![vec![1.0; num_actions]; horizon], 0, 1.0).unwrap()
}

/// Ridge solution assembled and solved densely.
fn dense_ridge(features: &TransitionFeatures, history: &[(Transition, Vec<f64>)], lambda: f64) -> Vec<f64> {
    let d = features.dim();
    let mut gram = DMatrix::<f64>::identity(d, d) * lambda;
    let mut rhs = DVector::<f64>::zeros(d);
    for ((s, a, s_next), v) in history {
        let mut u = vec![0.0; d];
        for t in 0..features.num_states() {
            for (k, x) in features.get(*s, *a, t).iter().enumerate() {
                u[k] += x * v[t];
            }
        }
        let u = DVector::from_vec(u);
        gram += &u * u.transpose();
        rhs += &u * v[*s_next];
    }
    gram.lu().solve(&rhs).unwrap().iter().copied().collect()
}

#[test]
fn no_history_or_zero_values_give_zero_estimate() {
    let mdp = random_tabular_mdp(3, 2, 2, 1).unwrap();
    assert!(fit_transition_online(mdp.features(), &[], 1.0).unwrap().iter().all(|&x| x == 0.0));
    let history: Vec<(Transition, Vec<f64>)> = (0..10).map(|i| ((i % 3, i % 2, (i + 1) % 3), vec![0.0; 3])).collect();
    assert!(fit_transition_online(mdp.features(), &history, 1.0).unwrap().iter().all(|&x| x == 0.0));
}

#[test]
fn one_state_estimate_matches_dense_solve_and_truth() {
    let mdp = one_state_mdp(2, 1);
    let features = mdp.features();
    let mut rng = seeded(3);
    let history: Vec<(Transition, Vec<f64>)> =
        (0..200).map(|_| ((0, rng.random_range(0..2), 0), vec![rng.random_range(5.0..10.0)])).collect();
    let theta = fit_transition_online(features, &history, 1.0).unwrap();
    let dense = dense_ridge(features, &history, 1.0);
    for (x, y) in theta.iter().zip(&dense) {
        assert_abs_diff_eq!(x, y, epsilon = 1e-12);
    }
    // each coordinate shrinks toward zero by the ridge: θ_a = S_a/(1+S_a)
    for a in 0..2 {
        let s: f64 = history.iter().filter(|h| h.0 .1 == a).map(|h| h.1[0] * h.1[0]).sum();
        assert_abs_diff_eq!(theta[a], s / (1.0 + s), epsilon = 1e-12);
        let v = 7.0;
        let predicted = dot_u(features, 0, a, &[v], &theta);
        assert!((predicted - v).abs() <= v / s + 1e-12);
    }
}

fn dot_u(features: &TransitionFeatures, s: usize, a: usize, v: &[f64], theta: &[f64]) -> f64 {
    features.integrate(s, a, v).iter().zip(theta).map(|(x, y)| x * y).sum()
}

#[test]
fn random_history_matches_dense_solve() {
    let mdp = random_mixture_mdp(4, 3, 2, 5, 9).unwrap();
    let mut rng = seeded(10);
    let history: Vec<(Transition, Vec<f64>)> = (0..300)
        .map(|_| {
            let t = (rng.random_range(0..4), rng.random_range(0..3), rng.random_range(0..4));
            (t, (0..4).map(|_| rng.random_range(0.0..4.0)).collect())
        })
        .collect();
    let theta = fit_transition_online(mdp.features(), &history, 0.5).unwrap();
    let dense = dense_ridge(mdp.features(), &history, 0.5);
    let scale = norm2(&dense);
    for (x, y) in theta.iter().zip(&dense) {
        assert!((x - y).abs() <= 1e-8 * scale);
    }
}

#[test]
fn bonus_vanishes_and_saturates() {
    let mdp = random_tabular_mdp(3, 2, 3, 2).unwrap();
    let ridge = RidgeAccumulator::new(mdp.features().dim(), 1.0).unwrap();
    let regs = value_regressors(mdp.features(), &[1.0, 2.0, 3.0]);
    assert!(bonus_online(&ridge, &regs, 0.0, 3, 2.0).iter().all(|&g| g == 0.0));
    let zero = value_regressors(mdp.features(), &[0.0; 3]);
    assert!(bonus_online(&ridge, &zero, 5.0, 3, 2.0).iter().all(|&g| g == 0.0));
    assert!(bonus_online(&ridge, &regs, 1e3, 3, 2.0).iter().all(|&g| g == 6.0));
}

#[test]
fn bonus_tabular_count_formula() {
    // one-hot φ with V ≡ 1 on a single next state: ‖φ̄‖ = 1/√(1+n)
    let features = TransitionFeatures::tabular(1, 2);
    let mut ridge = RidgeAccumulator::new(2, 1.0).unwrap();
    for _ in 0..8 {
        ridge.update(&[1.0, 0.0], 1.0).unwrap();
    }
    let regs = value_regressors(&features, &[1.0]);
    let g = bonus_online(&ridge, &regs, 0.5, 2, 1.0);
    assert_abs_diff_eq!(g[0], 2.0 * 0.5 / 3.0, epsilon = 1e-12);
    assert_abs_diff_eq!(g[1], 2.0 * 0.5, epsilon = 1e-12);
}

#[test]
fn optimistic_backup_examples() {
    assert_eq!(optimistic_backup(&[0.0; 4], &[0.0; 4], &[0.0; 4], 0, 2, 1.0), vec![0.0; 4]);
    // cap (H − h)·√d = 2 at h = 2, H = 4
    assert_eq!(optimistic_backup(&[4.0], &[3.0], &[3.0], 2, 4, 1.0), vec![2.0]);
    assert_eq!(optimistic_backup(&[-1.0], &[0.25], &[0.25], 0, 4, 1.0), vec![0.0]);
}

#[test]
fn reward_gradient_and_update_examples() {
    assert_eq!(reward_grad_online(&[0.5, 0.5], &[0.5, 0.5]), vec![0.0, 0.0]);
    let g = reward_grad_online(&[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0]);
    assert_eq!(g, vec![1.0, 0.0, -1.0]);
    assert!(g.iter().all(|x| (-1.0..=1.0).contains(x)));
    let mu = vec![0.3, -0.2];
    assert_eq!(reward_update(&mu, &[0.0, 0.0], 0.5, RewardDomain::Ball), mu);
    assert_eq!(reward_update(&mu, &[1.0, 1.0], 0.0, RewardDomain::Ball), mu);
    let out = reward_update(&mu, &[10.0, 0.0], 1.0, RewardDomain::Ball);
    assert_abs_diff_eq!(norm2(&out), 2f64.sqrt(), epsilon = 1e-12);
    let nn = reward_update(&mu, &[0.0, 0.0], 1.0, RewardDomain::NonnegativeBall);
    assert_eq!(nn, vec![0.3, 0.0]);
}

#[test]
fn defaults_follow_the_theory() {
    let inst = Instance::reference();
    let params = OgapConfig {
        episodes: 400,
        ..OgapConfig::default()
    }
    .resolve(&inst.mdp, &inst.reward_features)
    .unwrap();
    let (h, k, d_r, d_p) = (4.0, 400.0, 12.0f64, 48.0f64);
    assert_abs_diff_eq!(params.eta, 1.0 / (h * k as f64).sqrt(), epsilon = 1e-15);
    assert_abs_diff_eq!(params.alpha, (2.0 * 3f64.ln() / (h * h * d_r.sqrt() * k)).sqrt(), epsilon = 1e-15);
    assert_abs_diff_eq!(params.kappa, (d_p * (h * d_p * k / 0.1).ln()).sqrt(), epsilon = 1e-12);
    assert_eq!(params.lambda, 1.0);
    assert_abs_diff_eq!(params.value_scale, d_r.sqrt(), epsilon = 1e-15);
}

#[test]
fn invalid_configs_are_rejected() {
    let inst = Instance::reference();
    for bad in [
        OgapConfig { episodes: 0, ..OgapConfig::default() },
        OgapConfig { lambda: 0.0, ..OgapConfig::default() },
        OgapConfig { xi: 1.0, ..OgapConfig::default() },
        OgapConfig { eta: Some(-1.0), ..OgapConfig::default() },
    ] {
        assert!(bad.resolve(&inst.mdp, &inst.reward_features).is_err());
    }
    let demos = generate_demos(&Instance::tabular(4, 3, 3, 1).unwrap().mdp, &Policy::uniform(4, 3, 3), 5, 1, "u");
    assert!(run_ogap(&inst.mdp, &inst.reward_features, &demos, &OgapConfig::default()).is_err());
}

#[test]
fn first_episode_starts_from_uniform_and_zero_reward() {
    let inst = Instance::reference();
    let demos = generate_demos(&inst.mdp, &inst.expert, 10, 1, "expert");
    let log = run_ogap(&inst.mdp, &inst.reward_features, &demos, &OgapConfig::default()).unwrap();
    assert_eq!(log.len(), 1);
    assert_eq!(log.episodes[0].policy, Policy::uniform(4, 3, 4));
    assert!(log.episodes[0].mu.iter().flatten().all(|&m| m == 0.0));
}

#[test]
fn identical_seeds_give_identical_logs() {
    let inst = Instance::reference();
    let demos = generate_demos(&inst.mdp, &inst.expert, 50, 1, "expert");
    let config = OgapConfig {
        episodes: 60,
        seed: 5,
        diagnostics: true,
        ..OgapConfig::default()
    };
    let a = run_ogap(&inst.mdp, &inst.reward_features, &demos, &config).unwrap();
    let b = run_ogap(&inst.mdp, &inst.reward_features, &demos, &config).unwrap();
    assert_eq!(a.episodes_csv(), b.episodes_csv());
    assert_eq!(a.policies(), b.policies());
    for (x, y) in a.episodes.iter().zip(&b.episodes) {
        assert_eq!(x.mu, y.mu);
        assert_eq!(x.values, y.values);
        assert_eq!(x.iota, y.iota);
    }
    let c = run_ogap(&inst.mdp, &inst.reward_features, &demos, &OgapConfig { seed: 6, ..config }).unwrap();
    assert_ne!(a.episodes_csv(), c.episodes_csv());
}

#[test]
fn estimates_stay_in_range_and_iterates_stay_feasible() {
    let inst = Instance::reference();
    let demos = generate_demos(&inst.mdp, &inst.expert, 100, 2, "expert");
    let config = OgapConfig {
        episodes: 200,
        seed: 3,
        kappa_scale: 0.05,
        ..OgapConfig::default()
    };
    let log = run_ogap(&inst.mdp, &inst.reward_features, &demos, &config).unwrap();
    let scale = 12f64.sqrt();
    for ep in &log.episodes {
        for h in 0..4 {
            let cap = (4 - h) as f64 * scale;
            assert!(ep.values.q_step(h).iter().all(|&q| (0.0..=cap + 1e-12).contains(&q)));
            assert!(norm2(&ep.mu[h]) <= scale + 1e-9);
        }
        for g in ep.gamma.as_ref().unwrap().iter().flatten() {
            assert!((0.0..=4.0 * scale + 1e-12).contains(g));
        }
    }
}

#[test]
fn optimism_sandwich_holds_on_a_small_instance() {
    let inst = Instance::tabular(3, 2, 3, 8).unwrap();
    let demos = generate_demos(&inst.mdp, &inst.expert, 200, 1, "expert");
    let config = OgapConfig {
        episodes: 150,
        kappa_scale: 2.0,
        reward_domain: RewardDomain::NonnegativeBall,
        diagnostics: true,
        ..OgapConfig::default()
    };
    let log = run_ogap(&inst.mdp, &inst.reward_features, &demos, &config).unwrap();
    for ep in &log.episodes {
        for (i_h, g_h) in ep.iota.as_ref().unwrap().iter().zip(ep.gamma.as_ref().unwrap()) {
            for (&i, &g) in i_h.iter().zip(g_h) {
                assert!(i <= 1e-8 && i >= -2.0 * g - 1e-8);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn backup_is_clipped(
        r in prop::collection::vec(-5.0f64..5.0, 6),
        pv in prop::collection::vec(-5.0f64..20.0, 6),
        g in prop::collection::vec(0.0f64..10.0, 6),
        h in 0usize..4,
    ) {
        let q = optimistic_backup(&r, &pv, &g, h, 4, 1.5);
        let cap = (4 - h) as f64 * 1.5;
        for (i, &x) in q.iter().enumerate() {
            prop_assert!((0.0..=cap).contains(&x));
            let raw = r[i] + pv[i] + g[i];
            if raw > 0.0 && raw < cap {
                prop_assert_eq!(x, raw);
            }
        }
    }

    #[test]
    fn updated_reward_stays_in_domain(
        mu in prop::collection::vec(-1.0f64..1.0, 4),
        grad in prop::collection::vec(-2.0f64..2.0, 4),
        eta in 0.0f64..5.0,
    ) {
        let out = reward_update(&mu, &grad, eta, RewardDomain::Ball);
        prop_assert!(norm2(&out) <= 2.0 + 1e-12);
        let nn = reward_update(&mu, &grad, eta, RewardDomain::NonnegativeBall);
        prop_assert!(norm2(&nn) <= 2.0 + 1e-12 && nn.iter().all(|&x| x >= 0.0));
    }
}
