//! Invariant and scaling suites run by `gail-lin invariants` and by the
//! acceptance tests. Each suite reports pass/fail with a short summary.

use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cli::{run_experiment, BehaviorSpec, ExperimentConfig, Mode};
use crate::datasets::{generate_additional, generate_demos, Behavior, DemoSet};
use crate::error::Result;
use crate::eval::{
    audit_run, extended_value_difference, finite_diff_check, intrinsic_uncertainty, mc_bound_check,
    optimality_gap, sample_reward_parameter, slope_fit, worst_case_regret,
};
use crate::mdp::{
    expected_return_rewards, occupancy_measures, policy_evaluation, random_mixture_mdp, random_mu,
    random_policy, random_reward_features, random_tabular_mdp, Instance, LinearKernelMdp, Policy,
    RewardFeatures, RewardModel,
};
use crate::numerics::{EllipticalAudit, RewardDomain};
use crate::ogap::{run_ogap, OgapConfig};
use crate::pgap::{
    estimate_kernel, estimated_objective, pessimistic_evaluation, pgap_value_gradients, run_pgap, EstimatedKernel,
    PgapConfig,
};
use crate::rng::{derive_seed, seeded};

pub struct SuiteInfo {
    pub criterion: u8,
    pub name: &'static str,
    pub budget: Duration,
}

const fn suite(criterion: u8, name: &'static str, secs: u64) -> SuiteInfo {
    SuiteInfo {
        criterion,
        name,
        budget: Duration::from_secs(secs),
    }
}

pub const SUITES: [SuiteInfo; 12] = [
    suite(1, "extended_value_difference", 10),
    suite(2, "enumeration", 30),
    suite(3, "optimism", 120),
    suite(4, "pessimism", 120),
    suite(5, "regret_scaling", 900),
    suite(6, "offline_gap", 600),
    suite(7, "gradient", 60),
    suite(8, "elliptical_potential", 900),
    suite(9, "mc_bound", 60),
    suite(10, "ball_maximizer", 120),
    suite(11, "concavity", 120),
    suite(12, "determinism", 600),
];

#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    pub criterion: u8,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl Outcome {
    pub fn line(&self) -> String {
        format!(
            "[{}] criterion {:>2} {:<26} {} ({:.1}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.criterion,
            self.name,
            self.detail,
            self.elapsed.as_secs_f64()
        )
    }
}

/// Artifacts shared between suites: the elliptical audit replays the
/// online runs and the concavity suite the offline ones.
#[derive(Default)]
pub struct Context {
    optimism_audits: Option<Vec<Vec<EllipticalAudit>>>,
    regret_audits: Option<Vec<Vec<EllipticalAudit>>>,
    pessimism_runs: Option<Vec<OfflineRun>>,
}

struct OfflineRun {
    kernel: EstimatedKernel,
    demo_mean: Vec<Vec<f64>>,
    policies: Vec<Policy>,
    psi: Arc<RewardFeatures>,
}

/// Runs the named suites (all when `names` is empty) in criterion order.
pub fn run_suites(names: &[&str]) -> Result<Vec<Outcome>> {
    let mut ctx = Context::default();
    SUITES
        .iter()
        .filter(|s| names.is_empty() || names.contains(&s.name))
        .map(|s| run_suite(s, &mut ctx))
        .collect()
}

pub fn run_suite(info: &SuiteInfo, ctx: &mut Context) -> Result<Outcome> {
    let start = Instant::now();
    let (passed, detail) = match info.criterion {
        1 => extended_value_difference_suite()?,
        2 => enumeration_suite()?,
        3 => optimism_suite(ctx)?,
        4 => pessimism_suite(ctx)?,
        5 => regret_scaling_suite(ctx)?,
        6 => offline_gap_suite()?,
        7 => gradient_suite()?,
        8 => elliptical_suite(ctx)?,
        9 => mc_bound_suite()?,
        10 => ball_maximizer_suite()?,
        11 => concavity_suite(ctx)?,
        _ => determinism_suite()?,
    };
    let elapsed = start.elapsed();
    let within_budget = elapsed <= info.budget;
    let detail = if within_budget {
        detail
    } else {
        format!("{detail}; exceeded the {}s budget", info.budget.as_secs())
    };
    Ok(Outcome {
        criterion: info.criterion,
        name: info.name.to_string(),
        passed: passed && within_budget,
        detail,
        elapsed,
    })
}

fn reference_demos(instance: &Instance, n1: usize, seed: u64) -> DemoSet {
    generate_demos(&instance.mdp, &instance.expert, n1, derive_seed(seed, 1), "expert")
}

fn random_dims<R: Rng>(rng: &mut R) -> (usize, usize, usize) {
    (rng.random_range(1..=6), rng.random_range(1..=4), rng.random_range(1..=5))
}

fn extended_value_difference_suite() -> Result<(bool, String)> {
    let mut rng = seeded(0xE7D);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let (ns, na, horizon) = random_dims(&mut rng);
        let mdp = random_tabular_mdp(ns, na, horizon, derive_seed(0xE7D, i))?;
        let rewards: Vec<Vec<f64>> = (0..horizon)
            .map(|_| (0..ns * na).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let qhat: Vec<Vec<f64>> = (0..horizon)
            .map(|_| (0..ns * na).map(|_| rng.random_range(-5.0..5.0)).collect())
            .collect();
        let pi = random_policy(ns, na, horizon, &mut rng);
        let other = random_policy(ns, na, horizon, &mut rng);
        let (lhs, rhs) = extended_value_difference(&mdp, &rewards, &pi, &other, &qhat)?;
        worst = worst.max((lhs - rhs).abs());
    }
    Ok((worst <= 1e-9, format!("max |lhs - rhs| = {worst:.3e} over 100 instances")))
}

/// Exhaustive sum over all action/next-state sequences from the initial
/// state of probability times return.
pub fn enumerate_return(mdp: &LinearKernelMdp, rewards: &[Vec<f64>], policy: &Policy) -> (f64, usize) {
    fn walk(
        mdp: &LinearKernelMdp,
        rewards: &[Vec<f64>],
        policy: &Policy,
        h: usize,
        s: usize,
        prob: f64,
        ret: f64,
        acc: &mut (f64, usize),
    ) {
        let na = mdp.num_actions();
        for a in 0..na {
            let p = prob * policy.prob(h, s, a);
            let r = ret + rewards[h][s * na + a];
            if h + 1 == mdp.horizon() {
                acc.0 += p * r;
                acc.1 += 1;
                continue;
            }
            for (s_next, &q) in mdp.next_state_dist(h, s, a).iter().enumerate() {
                walk(mdp, rewards, policy, h + 1, s_next, p * q, r, acc);
            }
        }
    }
    let mut acc = (0.0, 0);
    walk(mdp, rewards, policy, 0, mdp.init_state(), 1.0, 0.0, &mut acc);
    acc
}

fn enumeration_suite() -> Result<(bool, String)> {
    let mut rng = seeded(0xE2E);
    let mut worst: f64 = 0.0;
    let mut instances = 0;
    for ns in 1..=6usize {
        for na in 1..=4usize {
            for horizon in 1..=5usize {
                let count = na.pow(horizon as u32) * ns.pow(horizon as u32 - 1);
                if count > 10_000 {
                    continue;
                }
                let seed = derive_seed(0xE2E, instances);
                let mdp = if ns >= 2 && instances % 3 == 0 {
                    random_mixture_mdp(ns, na, horizon, 3, seed)?
                } else {
                    random_tabular_mdp(ns, na, horizon, seed)?
                };
                let psi = Arc::new(random_reward_features(ns, na, 4, false, seed ^ 1)?);
                let reward = RewardModel::new(psi.clone(), random_mu(psi.dim(), horizon, false, &mut rng))?;
                let policy = random_policy(ns, na, horizon, &mut rng);
                let exact = policy_evaluation(&mdp, &reward, &policy)?.v(0, mdp.init_state());
                let (enumerated, _) = enumerate_return(&mdp, &reward.tables(), &policy);
                worst = worst.max((exact - enumerated).abs());
                instances += 1;
            }
        }
    }
    Ok((worst <= 1e-12, format!("max |DP - enumeration| = {worst:.3e} over {instances} instances")))
}

fn optimism_suite(ctx: &mut Context) -> Result<(bool, String)> {
    let instance = Instance::reference();
    let runs = (0..20u64)
        .into_par_iter()
        .map(|seed| {
            let demos = reference_demos(&instance, 5000, seed);
            let config = OgapConfig {
                episodes: 500,
                kappa_scale: 2.0,
                xi: 0.1,
                seed,
                reward_domain: RewardDomain::NonnegativeBall,
                diagnostics: true,
                ..OgapConfig::default()
            };
            let log = run_ogap(&instance.mdp, &instance.reward_features, &demos, &config)?;
            let mut ok = true;
            let mut worst: f64 = f64::NEG_INFINITY;
            for ep in &log.episodes {
                let (Some(iota), Some(gamma)) = (&ep.iota, &ep.gamma) else {
                    continue;
                };
                for (i_h, g_h) in iota.iter().zip(gamma) {
                    for (&i, &g) in i_h.iter().zip(g_h) {
                        worst = worst.max(i).max(-2.0 * g - i);
                        ok &= i <= 1e-8 && i >= -2.0 * g - 1e-8;
                    }
                }
            }
            Ok((ok, worst, audit_run(&log)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let good = runs.iter().filter(|r| r.0).count();
    let worst = runs.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    ctx.optimism_audits = Some(runs.into_iter().map(|r| r.2).collect());
    Ok((good >= 18, format!("sandwich held in {good}/20 seeds; largest excursion {worst:.3e}")))
}

fn pessimism_suite(ctx: &mut Context) -> Result<(bool, String)> {
    let instance = Instance::reference();
    let runs = (0..20u64)
        .into_par_iter()
        .map(|seed| {
            let demos = reference_demos(&instance, 5000, seed);
            let data = generate_additional(
                &instance.mdp,
                Behavior::Policy {
                    policy: &instance.expert,
                    id: "expert".into(),
                },
                5000,
                derive_seed(seed, 2),
            );
            let config = PgapConfig {
                iterations: 500,
                kappa_scale: 2.0,
                xi: 0.1,
                seed,
                reward_domain: RewardDomain::NonnegativeBall,
                diagnostics: true,
                ..PgapConfig::default()
            };
            let (mixed, log) = run_pgap(&instance.mdp, &instance.reward_features, &demos, &data, &config)?;
            let kernel = log.kernel.clone().expect("offline log carries its kernel");
            let mut ok = true;
            let mut worst: f64 = f64::NEG_INFINITY;
            for ep in &log.episodes {
                let Some(iota) = &ep.iota else { continue };
                for (i_h, g_h) in iota.iter().zip(&kernel.gamma) {
                    for (&i, &g) in i_h.iter().zip(g_h) {
                        worst = worst.max(-i).max(i - 2.0 * g);
                        ok &= i >= -1e-8 && i <= 2.0 * g + 1e-8;
                    }
                }
            }
            let flags = kernel.feasibility.all_pass();
            let run = OfflineRun {
                demo_mean: demos.mean_features(&instance.reward_features),
                kernel,
                policies: mixed.iterates,
                psi: instance.reward_features.clone(),
            };
            Ok((ok, worst, flags, run))
        })
        .collect::<Result<Vec<_>>>()?;
    let good = runs.iter().filter(|r| r.0).count();
    let flagged = runs.iter().filter(|r| r.2).count();
    let worst = runs.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    ctx.pessimism_runs = Some(runs.into_iter().map(|r| r.3).collect());
    Ok((
        good >= 18,
        format!("sandwich held in {good}/20 seeds; feasibility flags clean in {flagged}/20; largest excursion {worst:.3e}"),
    ))
}

const REGRET_GRID: [usize; 5] = [512, 1024, 2048, 4096, 8192];

fn regret_scaling_suite(ctx: &mut Context) -> Result<(bool, String)> {
    let instance = Instance::reference();
    let n1 = 10 * REGRET_GRID[REGRET_GRID.len() - 1];
    let seeds: Vec<u64> = (1..=5).collect();
    let demos: Vec<DemoSet> = seeds.iter().map(|&s| reference_demos(&instance, n1, s)).collect();
    let jobs: Vec<(usize, usize)> = REGRET_GRID
        .iter()
        .flat_map(|&k| (0..seeds.len()).map(move |i| (k, i)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(k, i)| {
            let config = OgapConfig {
                episodes: k,
                seed: seeds[i],
                ..OgapConfig::default()
            };
            let log = run_ogap(&instance.mdp, &instance.reward_features, &demos[i], &config)?;
            let report = worst_case_regret(&instance.mdp, &instance.expert, &log.policies(), &instance.reward_features)?;
            Ok((k, report.total(), audit_run(&log)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut medians = Vec::new();
    for &k in &REGRET_GRID {
        let mut values: Vec<f64> = results.iter().filter(|r| r.0 == k).map(|r| r.1).collect();
        values.sort_by(f64::total_cmp);
        medians.push(values[values.len() / 2]);
    }
    let xs: Vec<f64> = REGRET_GRID.iter().map(|&k| k as f64).collect();
    let slope = slope_fit(&xs, &medians)?;
    ctx.regret_audits = Some(results.into_iter().map(|r| r.2).collect());
    let shown: Vec<String> = medians.iter().map(|m| format!("{m:.1}")).collect();
    Ok((slope <= 0.8, format!("slope {slope:.4}; median regret [{}]", shown.join(", "))))
}

fn offline_gap_suite() -> Result<(bool, String)> {
    let instance = Instance::reference();
    let sizes = [250usize, 1000, 4000];
    let seeds: Vec<u64> = (0..10).collect();
    let results = seeds
        .par_iter()
        .map(|&seed| {
            let demos = reference_demos(&instance, 1000, seed);
            let data = generate_additional(
                &instance.mdp,
                Behavior::Policy {
                    policy: &instance.expert,
                    id: "expert".into(),
                },
                sizes[sizes.len() - 1],
                derive_seed(seed, 2),
            );
            sizes
                .iter()
                .map(|&n2| {
                    let config = PgapConfig {
                        iterations: 2000,
                        seed,
                        ..PgapConfig::default()
                    };
                    let (mixed, log) =
                        run_pgap(&instance.mdp, &instance.reward_features, &demos, &data.prefix(n2), &config)?;
                    let gap = optimality_gap(&instance.mdp, &instance.expert, &mixed, &instance.reward_features)?.gap;
                    let kernel = log.kernel.as_ref().expect("offline log carries its kernel");
                    let iu = intrinsic_uncertainty(&instance.mdp, &instance.expert, &kernel.gamma)?;
                    Ok((gap, iu))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let median_at = |j: usize, f: fn(&(f64, f64)) -> f64| {
        let mut v: Vec<f64> = results.iter().map(|r| f(&r[j])).collect();
        v.sort_by(f64::total_cmp);
        0.5 * (v[4] + v[5])
    };
    let gaps: Vec<f64> = (0..3).map(|j| median_at(j, |r| r.0)).collect();
    let ius: Vec<f64> = (0..3).map(|j| median_at(j, |r| r.1)).collect();
    let gap_ok = gaps[2] < gaps[0];
    let iu_ok = ius[0] > ius[1] && ius[1] > ius[2];
    Ok((
        gap_ok && iu_ok,
        format!(
            "median gap [{:.4}, {:.4}, {:.4}] ({}); median IntUncert [{:.2}, {:.2}, {:.2}] ({})",
            gaps[0],
            gaps[1],
            gaps[2],
            if gap_ok { "decreasing" } else { "not decreasing" },
            ius[0],
            ius[1],
            ius[2],
            if iu_ok { "decreasing" } else { "not decreasing" }
        ),
    ))
}

const KINK_MARGIN: f64 = 1e-3;

fn gradient_suite() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    let mut skipped = 0;
    for point in 0..25u64 {
        let seed = derive_seed(0x6AD, point);
        let instance = Instance::tabular(4, 3, 4, seed)?;
        let psi = instance.reward_features.clone();
        let data = generate_additional(&instance.mdp, Behavior::Uniform, 2000, seed ^ 2);
        let config = PgapConfig {
            kappa_scale: 0.02,
            ..PgapConfig::default()
        };
        let params = config.resolve(&instance.mdp, &psi, data.len())?;
        let kernel = estimate_kernel(&instance.mdp, &data, &params)?;
        let mut rng = seeded(seed);
        let horizon = instance.mdp.horizon();
        let (policy, mu) = loop {
            let policy = random_policy(4, 3, horizon, &mut rng);
            let mu = sample_reward_parameter(psi.dim(), horizon, &mut rng);
            let rewards: Vec<Vec<f64>> = mu.iter().map(|m| psi.reward_table(m)).collect();
            let (_, targets) = pessimistic_evaluation(&kernel, &rewards, &policy);
            if targets.iter().flatten().all(|t| t.abs() > KINK_MARGIN) {
                break (policy, mu);
            }
            skipped += 1;
        };
        let value = |flat: &[f64]| {
            let rewards: Vec<Vec<f64>> = flat.chunks(psi.dim()).map(|m| psi.reward_table(m)).collect();
            pessimistic_evaluation(&kernel, &rewards, &policy).0.v(0, kernel.init_state)
        };
        let rewards: Vec<Vec<f64>> = mu.iter().map(|m| psi.reward_table(m)).collect();
        let (values, _) = pessimistic_evaluation(&kernel, &rewards, &policy);
        let gradient = pgap_value_gradients(&kernel, &policy, &values, &psi).concat();
        worst = worst.max(finite_diff_check(&value, &gradient, &mu.concat(), 1e-5));
    }
    Ok((
        worst <= 1e-5,
        format!("max relative error {worst:.3e} at 25 points ({skipped} draws rejected near kinks)"),
    ))
}

fn elliptical_suite(ctx: &mut Context) -> Result<(bool, String)> {
    if ctx.optimism_audits.is_none() {
        optimism_suite(ctx)?;
    }
    if ctx.regret_audits.is_none() {
        regret_scaling_suite(ctx)?;
    }
    let audits: Vec<&EllipticalAudit> = ctx
        .optimism_audits
        .iter()
        .chain(ctx.regret_audits.iter())
        .flatten()
        .flatten()
        .collect();
    let failures = audits.iter().filter(|a| !a.holds()).count();
    let tightest = audits
        .iter()
        .filter(|a| a.rhs > 0.0)
        .map(|a| a.lhs / a.rhs)
        .fold(0.0, f64::max);
    Ok((
        failures == 0,
        format!("{failures} violations over {} step sequences; largest lhs/rhs {tightest:.4}", audits.len()),
    ))
}

fn mc_bound_suite() -> Result<(bool, String)> {
    let instance = Instance::reference();
    let report = mc_bound_check(&instance.mdp, &instance.expert, &instance.reward_features, 100, 200, 0.1, 0x3C)?;
    let largest = report.deviations.iter().copied().fold(0.0, f64::max);
    Ok((
        report.violation_fraction <= 0.1,
        format!(
            "violation fraction {:.3}; largest deviation {largest:.3} against bound {:.3}",
            report.violation_fraction, report.bound
        ),
    ))
}

fn ball_maximizer_suite() -> Result<(bool, String)> {
    const SAMPLES: usize = 100_000;
    let results = (0..50u64)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(0xBA11, i);
            let mut rng = seeded(seed);
            let ns = rng.random_range(2..=6);
            let na = rng.random_range(2..=4);
            let horizon = rng.random_range(1..=5);
            let dim = rng.random_range(2..=5);
            let mdp = random_tabular_mdp(ns, na, horizon, seed)?;
            let psi = Arc::new(random_reward_features(ns, na, dim, false, seed ^ 7)?);
            let hidden = RewardModel::new(psi.clone(), random_mu(dim, horizon, false, &mut rng))?;
            let instance = Instance::from_parts(mdp, hidden)?;
            let iterates: Vec<Policy> = (0..3).map(|_| random_policy(ns, na, horizon, &mut rng)).collect();
            let report = worst_case_regret(&instance.mdp, &instance.expert, &iterates, &psi)?;
            let closed = report.total();

            let expert_rho = occupancy_measures(&instance.mdp, &instance.expert)?;
            let mut diff = expert_rho.iter().map(|r| r.iter().map(|x| x * 3.0).collect::<Vec<f64>>()).collect::<Vec<_>>();
            for p in &iterates {
                for (d, r) in diff.iter_mut().zip(occupancy_measures(&instance.mdp, p)?) {
                    d.iter_mut().zip(r).for_each(|(a, b)| *a -= b);
                }
            }
            let mut best = f64::NEG_INFINITY;
            for _ in 0..SAMPLES {
                let mu = sample_reward_parameter(dim, horizon, &mut rng);
                let value: f64 = mu
                    .iter()
                    .zip(&diff)
                    .map(|(m, d)| psi.reward_table(m).iter().zip(d).map(|(r, w)| r * w).sum::<f64>())
                    .sum();
                best = best.max(value);
            }

            let tables: Vec<Vec<f64>> = report.mu_star.iter().map(|m| psi.reward_table(m)).collect();
            let expert_value = expected_return_rewards(&instance.mdp, &tables, &instance.expert)?;
            let mut attained = 0.0;
            for p in &iterates {
                attained += expert_value - expected_return_rewards(&instance.mdp, &tables, p)?;
            }
            Ok((closed >= best, (attained - closed).abs()))
        })
        .collect::<Result<Vec<_>>>()?;
    let dominated = results.iter().filter(|r| r.0).count();
    let worst = results.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok((
        dominated == 50 && worst <= 1e-9,
        format!("closed form dominated samples on {dominated}/50 instances; max attainment error {worst:.3e}"),
    ))
}

fn concavity_suite(ctx: &mut Context) -> Result<(bool, String)> {
    if ctx.pessimism_runs.is_none() {
        pessimism_suite(ctx)?;
    }
    let runs = ctx.pessimism_runs.as_ref().expect("pessimism runs were just produced");
    let results: Vec<(usize, f64)> = runs
        .par_iter()
        .enumerate()
        .map(|(i, run)| {
            let mut rng = seeded(derive_seed(0xC0C, i as u64));
            let (dim, horizon) = (run.psi.dim(), run.kernel.horizon);
            let mut violations = 0;
            let mut worst = f64::NEG_INFINITY;
            for _ in 0..100 {
                let policy = &run.policies[rng.random_range(0..run.policies.len())];
                let a = sample_reward_parameter(dim, horizon, &mut rng);
                let b = sample_reward_parameter(dim, horizon, &mut rng);
                let mid: Vec<Vec<f64>> = a
                    .iter()
                    .zip(&b)
                    .map(|(x, y)| x.iter().zip(y).map(|(p, q)| 0.5 * (p + q)).collect())
                    .collect();
                let eval = |mu: Vec<Vec<f64>>| {
                    let reward = RewardModel::new(run.psi.clone(), mu).expect("sampled inside the ball");
                    estimated_objective(&run.kernel, &run.demo_mean, policy, &reward)
                };
                let (la, lb, lm) = (eval(a), eval(b), eval(mid));
                let shortfall = 0.5 * (la + lb) - lm;
                worst = worst.max(shortfall);
                if shortfall > 1e-9 {
                    violations += 1;
                }
            }
            (violations, worst)
        })
        .collect();
    let violations: usize = results.iter().map(|r| r.0).sum();
    let worst = results.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    Ok((
        violations == 0,
        format!(
            "{violations} violations over {} segments; largest midpoint shortfall {worst:.3e}",
            100 * runs.len()
        ),
    ))
}

fn collect_csv(root: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) -> Result<()> {
    let mut entries: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| crate::Error::io(dir, e))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .collect();
    entries.sort();
    for path in entries {
        if path.is_dir() {
            collect_csv(root, &path, out)?;
        } else if path.extension().is_some_and(|e| e == "csv") {
            let bytes = std::fs::read(&path).map_err(|e| crate::Error::io(&path, e))?;
            let rel = path.strip_prefix(root).unwrap_or(&path).display().to_string();
            out.push((rel, bytes));
        }
    }
    Ok(())
}

/// The configs rerun by the determinism suite.
pub fn determinism_configs() -> Vec<ExperimentConfig> {
    let base = ExperimentConfig::from_toml("mode = \"sweep\"").expect("minimal config parses");
    let sweep = ExperimentConfig {
        mode: Mode::Sweep,
        k_grid: vec![64, 128, 256],
        n1: 500,
        seeds: vec![1, 2],
        ..base.clone()
    };
    let online = ExperimentConfig {
        mode: Mode::Ogap,
        k_grid: vec![100],
        n1: 200,
        seeds: vec![3],
        diagnostics: true,
        ..base.clone()
    };
    let offline = ExperimentConfig {
        mode: Mode::Pgap,
        k_grid: vec![100],
        n1: 200,
        n2: vec![100, 400],
        behavior: BehaviorSpec::Uniform,
        seeds: vec![1, 2],
        diagnostics: true,
        ..base.clone()
    };
    let invariants = ExperimentConfig {
        mode: Mode::Invariants,
        suites: vec!["mc_bound".into(), "extended_value_difference".into()],
        ..base
    };
    vec![sweep, online, offline, invariants]
}

fn determinism_suite() -> Result<(bool, String)> {
    let scratch = tempfile::tempdir().map_err(|e| crate::Error::io(std::env::temp_dir(), e))?;
    let mut files = 0;
    let mut mismatches = Vec::new();
    for (i, config) in determinism_configs().into_iter().enumerate() {
        let mut trees = Vec::new();
        for attempt in 0..2 {
            let root = scratch.path().join(format!("config{i}_run{attempt}"));
            let run = ExperimentConfig {
                output: root.clone(),
                ..config.clone()
            };
            run_experiment(&run)?;
            let mut tree = Vec::new();
            collect_csv(&root, &root, &mut tree)?;
            trees.push(tree);
        }
        files += trees[0].len();
        if trees[0] != trees[1] {
            mismatches.push(format!("{:?}", config.mode));
        }
    }
    Ok((
        mismatches.is_empty() && files > 0,
        if mismatches.is_empty() {
            format!("{files} CSV artifacts byte-identical across reruns of 4 configs")
        } else {
            format!("artifacts differ for {}", mismatches.join(", "))
        },
    ))
}
