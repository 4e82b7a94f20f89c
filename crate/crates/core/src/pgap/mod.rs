//! Offline learner: one-shot kernel estimation with uncertainty quantifiers,
//! pessimistic evaluation, the exact reward gradient of the pessimistic
//! value, and a uniformly mixed output policy.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::{AdditionalSet, DemoSet};
use crate::error::{Error, Result};
use crate::mdp::{
    expected_return, LinearKernelMdp, Policy, RewardFeatures, RewardModel, TransitionFeatures, ValueTables,
};
use crate::numerics::{dot, mahalanobis, project_simplex, RewardDomain, RidgeAccumulator};
use crate::ogap::{check_inputs, check_positive, check_xi, config_error, default_alpha, default_eta, ensure_finite};
use crate::ogap::reward_update;
use crate::runlog::{Algorithm, EpisodeRecord, RunLog};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PgapConfig {
    /// Number of iterations K.
    pub iterations: usize,
    pub alpha: Option<f64>,
    pub eta: Option<f64>,
    pub lambda: f64,
    /// Constant c in κ = c·R·√(d·log(HdN₂/ξ)).
    pub kappa_scale: f64,
    pub xi: f64,
    pub seed: u64,
    pub reward_domain: RewardDomain,
    /// Record ι against the true kernel.
    pub diagnostics: bool,
}

impl Default for PgapConfig {
    fn default() -> Self {
        Self {
            iterations: 1,
            alpha: None,
            eta: None,
            lambda: 1.0,
            kappa_scale: 1.0,
            xi: 0.1,
            seed: 0,
            reward_domain: RewardDomain::Ball,
            diagnostics: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PgapParams {
    pub iterations: usize,
    pub alpha: f64,
    pub eta: f64,
    pub lambda: f64,
    pub kappa: f64,
    pub xi: f64,
    pub value_scale: f64,
}

/// κ = c·R·√(d·log(H·d·N₂/ξ)), with N₂ floored at one.
pub fn offline_kappa(scale: f64, regularity: f64, dim: usize, horizon: usize, n2: usize, xi: f64) -> f64 {
    let d = dim as f64;
    let arg = horizon as f64 * d * n2.max(1) as f64 / xi;
    scale * regularity * (d * arg.ln().max(0.0)).sqrt()
}

impl PgapConfig {
    pub fn resolve(&self, mdp: &LinearKernelMdp, psi: &RewardFeatures, n2: usize) -> Result<PgapParams> {
        if self.iterations == 0 {
            return Err(config_error("iterations", "must be at least 1"));
        }
        check_positive("lambda", self.lambda)?;
        check_positive("kappa_scale", self.kappa_scale)?;
        check_xi(self.xi)?;
        let horizon = mdp.horizon();
        let alpha = match self.alpha {
            Some(a) => {
                check_positive("alpha", a)?;
                a
            }
            None => default_alpha(mdp.num_actions(), horizon, psi.dim(), self.iterations),
        };
        let eta = match self.eta {
            Some(e) => {
                check_positive("eta", e)?;
                e
            }
            None => default_eta(horizon, self.iterations),
        };
        Ok(PgapParams {
            iterations: self.iterations,
            alpha,
            eta,
            lambda: self.lambda,
            kappa: offline_kappa(self.kappa_scale, mdp.regularity(), mdp.feature_dim(), horizon, n2, self.xi),
            xi: self.xi,
            value_scale: (psi.dim() as f64).sqrt(),
        })
    }
}

/// Λ_h = λI + Σ_τ Σ_{s'} φ(s_h^τ,a_h^τ,s')φ(·)ᵀ and θ̃_h = Λ_h⁻¹ Σ_τ φ(s_h^τ,a_h^τ,s_{h+1}^τ).
/// Repeated pairs enter Λ as one weighted update.
pub fn fit_transition_offline(
    features: &TransitionFeatures,
    data: &AdditionalSet,
    h: usize,
    lambda: f64,
) -> Result<(Vec<f64>, RidgeAccumulator)> {
    let (ns, na, dim) = (features.num_states(), features.num_actions(), features.dim());
    let mut acc = RidgeAccumulator::new(dim, lambda)?;
    let counts = data.visit_counts(h, ns, na);
    for (i, &n) in counts.iter().enumerate() {
        if n == 0 {
            continue;
        }
        for s_next in 0..ns {
            acc.update_weighted(features.get(i / na, i % na, s_next), 0.0, n as f64)?;
        }
    }
    if acc.identity_residual() > crate::numerics::IDENTITY_RESIDUAL_TOL {
        acc.refactor();
    }
    let mut target = DVector::zeros(dim);
    for t in &data.trajectories {
        let (s, a, s_next) = t[h];
        target += DVector::from_column_slice(features.get(s, a, s_next));
    }
    let theta = (acc.gram_inv() * target).iter().copied().collect();
    Ok((theta, acc))
}

/// Γ_h(s,a) = H√d·Σ_{s'} min{κ‖φ(s,a,s')‖_{Λ⁻¹}, 1}, laid out as `[s * A + a]`.
pub fn uncertainty_quantifier(
    features: &TransitionFeatures,
    ridge: &RidgeAccumulator,
    kappa: f64,
    horizon: usize,
    value_scale: f64,
) -> Vec<f64> {
    let (ns, na) = (features.num_states(), features.num_actions());
    let cap = horizon as f64 * value_scale;
    (0..ns * na)
        .map(|i| {
            let (s, a) = (i / na, i % na);
            cap * (0..ns)
                .map(|s_next| (kappa * mahalanobis(ridge, features.get(s, a, s_next))).min(1.0))
                .sum::<f64>()
        })
        .collect()
}

/// Per-row effect of mapping the regression estimate onto the simplex.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityReport {
    /// ℓ₁ distance moved by each row, per step, laid out as `[s * A + a]`.
    pub displacement: Vec<Vec<f64>>,
    /// Whether H√d·δ(s,a) ≤ 2Γ_h(s,a).
    pub theta1_ok: Vec<Vec<bool>>,
}

impl FeasibilityReport {
    pub fn violations(&self) -> usize {
        self.theta1_ok.iter().flatten().filter(|ok| !**ok).count()
    }

    pub fn all_pass(&self) -> bool {
        self.violations() == 0
    }
}

/// The estimated kernel P̂, the regression parameters it came from, and the
/// uncertainty quantifier.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatedKernel {
    pub num_states: usize,
    pub num_actions: usize,
    pub horizon: usize,
    pub init_state: usize,
    /// Ridge estimate θ̃_h before projection.
    pub theta: Vec<Vec<f64>>,
    /// Rows P̂_h(·|s,a) laid out as `[(s * A + a) * S + s']`.
    pub rows: Vec<Vec<f64>>,
    pub gamma: Vec<Vec<f64>>,
    pub kappa: f64,
    pub feasibility: FeasibilityReport,
}

#[derive(Debug, Serialize)]
pub struct KernelSummary<'a> {
    pub theta: &'a [Vec<f64>],
    pub kappa: f64,
    pub gamma_min: Vec<f64>,
    pub gamma_mean: Vec<f64>,
    pub gamma_max: Vec<f64>,
    pub feasibility: &'a FeasibilityReport,
    pub theta1_violations: usize,
}

impl EstimatedKernel {
    /// [P̂_h V](s,a).
    pub fn apply(&self, h: usize, values: &[f64]) -> Vec<f64> {
        crate::mdp::apply_rows(&self.rows[h], self.num_states, values)
    }

    pub fn row(&self, h: usize, s: usize, a: usize) -> &[f64] {
        let start = (s * self.num_actions + a) * self.num_states;
        &self.rows[h][start..start + self.num_states]
    }

    pub fn summary(&self) -> KernelSummary<'_> {
        let stat = |f: fn(&[f64]) -> f64| self.gamma.iter().map(|g| f(g)).collect::<Vec<_>>();
        KernelSummary {
            theta: &self.theta,
            kappa: self.kappa,
            gamma_min: stat(|g| g.iter().copied().fold(f64::INFINITY, f64::min)),
            gamma_mean: stat(|g| g.iter().sum::<f64>() / g.len() as f64),
            gamma_max: stat(|g| g.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
            feasibility: &self.feasibility,
            theta1_violations: self.feasibility.violations(),
        }
    }
}

/// Projects every row φᵀθ̃_h onto the simplex and checks the displacement
/// against Γ. Violations are logged and reported, not fatal.
pub fn project_to_feasible(
    features: &TransitionFeatures,
    theta: Vec<Vec<f64>>,
    gamma: Vec<Vec<f64>>,
    kappa: f64,
    init_state: usize,
    value_scale: f64,
) -> EstimatedKernel {
    let (ns, na) = (features.num_states(), features.num_actions());
    let horizon = theta.len();
    let cap = horizon as f64 * value_scale;
    let mut rows = Vec::with_capacity(horizon);
    let mut displacement = Vec::with_capacity(horizon);
    let mut theta1_ok = Vec::with_capacity(horizon);
    for h in 0..horizon {
        let mut step_rows = Vec::with_capacity(ns * na * ns);
        let mut step_disp = Vec::with_capacity(ns * na);
        let mut step_ok = Vec::with_capacity(ns * na);
        for i in 0..ns * na {
            let raw: Vec<f64> = (0..ns).map(|s_next| dot(features.get(i / na, i % na, s_next), &theta[h])).collect();
            let projected = project_simplex(&raw);
            let delta: f64 = raw.iter().zip(&projected).map(|(x, y)| (x - y).abs()).sum();
            step_ok.push(cap * delta <= 2.0 * gamma[h][i]);
            step_disp.push(delta);
            step_rows.extend(projected);
        }
        rows.push(step_rows);
        displacement.push(step_disp);
        theta1_ok.push(step_ok);
    }
    let feasibility = FeasibilityReport {
        displacement,
        theta1_ok,
    };
    if !feasibility.all_pass() {
        log::warn!(
            "{} estimated rows moved farther than the uncertainty quantifier allows",
            feasibility.violations()
        );
    }
    EstimatedKernel {
        num_states: ns,
        num_actions: na,
        horizon,
        init_state,
        theta,
        rows,
        gamma,
        kappa,
        feasibility,
    }
}

/// The full initial construction: regression, quantifier and projection
/// for every step.
pub fn estimate_kernel(
    mdp: &LinearKernelMdp,
    data: &AdditionalSet,
    params: &PgapParams,
) -> Result<EstimatedKernel> {
    if data.horizon != mdp.horizon() {
        return Err(Error::Dimension(format!(
            "additional data have horizon {}, model has {}",
            data.horizon,
            mdp.horizon()
        )));
    }
    let features = mdp.features();
    let horizon = mdp.horizon();
    let fits = (0..horizon)
        .into_par_iter()
        .map(|h| {
            let (theta, ridge) = fit_transition_offline(features, data, h, params.lambda)?;
            let gamma = uncertainty_quantifier(features, &ridge, params.kappa, horizon, params.value_scale);
            Ok((theta, gamma))
        })
        .collect::<Result<Vec<_>>>()?;
    let (theta, gamma): (Vec<_>, Vec<_>) = fits.into_iter().unzip();
    Ok(project_to_feasible(
        features,
        theta,
        gamma,
        params.kappa,
        mdp.init_state(),
        params.value_scale,
    ))
}

/// Q̂ = max{r + P̂V̂ − Γ, 0}.
pub fn pessimistic_backup(reward: &[f64], phat_v: &[f64], gamma: &[f64]) -> Vec<f64> {
    reward
        .iter()
        .zip(phat_v)
        .zip(gamma)
        .map(|((r, pv), g)| (r + pv - g).max(0.0))
        .collect()
}

/// Pessimistic evaluation of `policy` under per-step reward tables. Also
/// returns the unclipped targets r + P̂V̂ − Γ.
pub fn pessimistic_evaluation(
    kernel: &EstimatedKernel,
    rewards: &[Vec<f64>],
    policy: &Policy,
) -> (ValueTables, Vec<Vec<f64>>) {
    let mut values = ValueTables::zeros(kernel.num_states, kernel.num_actions, kernel.horizon);
    let mut targets = vec![Vec::new(); kernel.horizon];
    for h in (0..kernel.horizon).rev() {
        let phat_v = kernel.apply(h, values.v_step(h + 1));
        let raw: Vec<f64> = rewards[h]
            .iter()
            .zip(&phat_v)
            .zip(&kernel.gamma[h])
            .map(|((r, pv), g)| r + pv - g)
            .collect();
        let q = pessimistic_backup(&rewards[h], &phat_v, &kernel.gamma[h]);
        values.set_step(h, &q, policy);
        targets[h] = raw;
    }
    (values, targets)
}

/// ∇_{μ_h} V̂₁(x) for every h: the gated occupancy
/// w_{t+1}(s') = Σ w_t(s)π_t(a|s)g_t(s,a)P̂_t(s'|s,a), w_1 = e_x, contracted
/// against π_h·g_h·ψ at step h, with g = 1{Q̂ > 0}.
pub fn pgap_value_gradients(
    kernel: &EstimatedKernel,
    policy: &Policy,
    values: &ValueTables,
    psi: &RewardFeatures,
) -> Vec<Vec<f64>> {
    let (ns, na) = (kernel.num_states, kernel.num_actions);
    let mut w = vec![0.0; ns];
    w[kernel.init_state] = 1.0;
    let mut out = Vec::with_capacity(kernel.horizon);
    for h in 0..kernel.horizon {
        let q = values.q_step(h);
        let mut weights = vec![0.0; ns * na];
        for s in 0..ns {
            if w[s] == 0.0 {
                continue;
            }
            for a in 0..na {
                if q[s * na + a] > 0.0 {
                    weights[s * na + a] = w[s] * policy.prob(h, s, a);
                }
            }
        }
        out.push(psi.weighted_sum(&weights));
        let mut next = vec![0.0; ns];
        for (i, &wt) in weights.iter().enumerate() {
            if wt == 0.0 {
                continue;
            }
            for (s_next, p) in kernel.row(h, i / na, i % na).iter().enumerate() {
                next[s_next] += wt * p;
            }
        }
        w = next;
    }
    out
}

/// ∇_{μ_h} V̂₁^{π, r^μ}(x) for a single step h.
pub fn pgap_value_gradient(kernel: &EstimatedKernel, policy: &Policy, reward: &RewardModel, h: usize) -> Vec<f64> {
    let (values, _) = pessimistic_evaluation(kernel, &reward.tables(), policy);
    pgap_value_gradients(kernel, policy, &values, reward.features())
        .swap_remove(h)
}

/// ∇_{μ_h} L̂ = ψ̄_h − ∇_{μ_h} Ĵ.
pub fn reward_grad_offline(demo_mean_psi: &[Vec<f64>], value_gradients: &[Vec<f64>]) -> Vec<Vec<f64>> {
    demo_mean_psi
        .iter()
        .zip(value_gradients)
        .map(|(m, g)| m.iter().zip(g).map(|(a, b)| a - b).collect())
        .collect()
}

/// L̂(π, μ) = Σ_h ⟨ψ̄_h, μ_h⟩ − V̂₁^{π, r^μ}(x).
pub fn estimated_objective(kernel: &EstimatedKernel, demo_mean_psi: &[Vec<f64>], policy: &Policy, reward: &RewardModel) -> f64 {
    let (values, _) = pessimistic_evaluation(kernel, &reward.tables(), policy);
    let expert: f64 = demo_mean_psi.iter().zip(reward.mu()).map(|(m, mu)| dot(m, mu)).sum();
    expert - values.v(0, kernel.init_state)
}

/// The uniform mixture over the iterates π¹..π^K.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedPolicy {
    pub iterates: Vec<Policy>,
}

impl MixedPolicy {
    pub fn new(iterates: Vec<Policy>) -> Result<Self> {
        if iterates.is_empty() {
            return Err(Error::Dimension("mixed policy needs at least one iterate".into()));
        }
        Ok(Self { iterates })
    }

    pub fn len(&self) -> usize {
        self.iterates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterates.is_empty()
    }
}

/// K⁻¹ Σ_k J(π^k, r).
pub fn evaluate_mixed_policy(mdp: &LinearKernelMdp, reward: &RewardModel, mixed: &MixedPolicy) -> Result<f64> {
    let mut total = 0.0;
    for policy in &mixed.iterates {
        total += expected_return(mdp, reward, policy)?;
    }
    Ok(total / mixed.len() as f64)
}

/// Runs the offline learner: builds the kernel estimate once from `data`,
/// then K rounds of improvement, pessimistic evaluation and reward ascent.
pub fn run_pgap(
    mdp: &LinearKernelMdp,
    psi: &RewardFeatures,
    demos: &DemoSet,
    data: &AdditionalSet,
    config: &PgapConfig,
) -> Result<(MixedPolicy, RunLog)> {
    check_inputs(mdp, psi, demos)?;
    let params = config.resolve(mdp, psi, data.len())?;
    let kernel = estimate_kernel(mdp, data, &params)?;
    for g in &kernel.gamma {
        ensure_finite(g, 0, "uncertainty quantifier")?;
    }
    let (ns, na, horizon) = (mdp.num_states(), mdp.num_actions(), mdp.horizon());
    let demo_mean = demos.mean_features(psi);

    let mut policy = Policy::uniform(ns, na, horizon);
    let mut previous_q: Option<ValueTables> = None;
    let mut mu = vec![vec![0.0; psi.dim()]; horizon];
    let mut episodes = Vec::with_capacity(params.iterations);
    for k in 1..=params.iterations {
        if let Some(q) = &previous_q {
            policy = policy.mirror_step(q, params.alpha).map_err(|e| Error::Aborted {
                episode: k,
                reason: e.to_string(),
            })?;
        }
        let rewards: Vec<Vec<f64>> = mu.iter().map(|m| psi.reward_table(m)).collect();
        let (values, _) = pessimistic_evaluation(&kernel, &rewards, &policy);
        ensure_finite(values.q_all(), k, "Q estimate")?;
        let iota = config.diagnostics.then(|| {
            (0..horizon)
                .map(|h| {
                    let pv = mdp.apply_kernel(h, values.v_step(h + 1));
                    let q = values.q_step(h);
                    (0..ns * na).map(|i| rewards[h][i] + pv[i] - q[i]).collect()
                })
                .collect()
        });
        let grads = pgap_value_gradients(&kernel, &policy, &values, psi);
        let ascent = reward_grad_offline(&demo_mean, &grads);
        let mut next_mu = Vec::with_capacity(horizon);
        for h in 0..horizon {
            let updated = reward_update(&mu[h], &ascent[h], params.eta, config.reward_domain);
            ensure_finite(&updated, k, "reward parameter")?;
            next_mu.push(updated);
        }
        episodes.push(EpisodeRecord {
            policy: policy.clone(),
            mu: std::mem::replace(&mut mu, next_mu),
            values: values.clone(),
            gamma: None,
            transitions: Vec::new(),
            iota,
        });
        previous_q = Some(values);
    }

    let mixed = MixedPolicy::new(episodes.iter().map(|e| e.policy.clone()).collect())?;
    let log = RunLog {
        algorithm: Algorithm::Pgap,
        seed: config.seed,
        params: serde_json::to_value(params).expect("serializable"),
        episodes,
        regressors: Vec::new(),
        lambda: params.lambda,
        kernel: Some(kernel),
    };
    Ok((mixed, log))
}
