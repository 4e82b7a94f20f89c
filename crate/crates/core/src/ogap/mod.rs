//! Online learner: mirror-descent policy improvement, rollouts, optimistic
//! value-targeted regression, and projected gradient ascent on the reward.

use serde::{Deserialize, Serialize};

use crate::datasets::{DemoSet, Transition};
use crate::error::{Error, Result};
use crate::mdp::{rollout_transitions, LinearKernelMdp, Policy, RewardFeatures, TransitionFeatures, ValueTables};
use crate::numerics::{dot, mahalanobis, RewardDomain, RidgeAccumulator};
use crate::rng::seeded;
use crate::runlog::{Algorithm, EpisodeRecord, RunLog};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OgapConfig {
    /// Number of episodes K.
    pub episodes: usize,
    /// Mirror-descent step; derived from K when absent.
    pub alpha: Option<f64>,
    /// Reward step; 1/√(HK) when absent.
    pub eta: Option<f64>,
    pub lambda: f64,
    /// Constant C in κ = C·√(d·log(HdK/ξ)).
    pub kappa_scale: f64,
    pub xi: f64,
    pub seed: u64,
    pub reward_domain: RewardDomain,
    /// Record ι against the true kernel.
    pub diagnostics: bool,
}

impl Default for OgapConfig {
    fn default() -> Self {
        Self {
            episodes: 1,
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

/// Hyperparameters after filling in defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OgapParams {
    pub episodes: usize,
    pub alpha: f64,
    pub eta: f64,
    pub lambda: f64,
    pub kappa: f64,
    pub xi: f64,
    /// √d_R: scale of rewards and values.
    pub value_scale: f64,
}

pub(crate) fn config_error(field: &str, message: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        message: message.into(),
    }
}

pub(crate) fn check_positive(field: &str, value: f64) -> Result<()> {
    if !(value > 0.0 && value.is_finite()) {
        return Err(config_error(field, format!("must be positive, got {value}")));
    }
    Ok(())
}

pub(crate) fn check_xi(xi: f64) -> Result<()> {
    if !(xi > 0.0 && xi < 1.0) {
        return Err(config_error("xi", format!("must lie in (0, 1), got {xi}")));
    }
    Ok(())
}

/// α = √(2·log|A| / (H²·√d·K)), with log|A| the log-volume of a finite
/// action set under counting measure.
pub fn default_alpha(num_actions: usize, horizon: usize, value_dim: usize, episodes: usize) -> f64 {
    let h = horizon as f64;
    (2.0 * (num_actions as f64).ln() / (h * h * (value_dim as f64).sqrt() * episodes as f64)).sqrt()
}

/// η = 1/√(H·K).
pub fn default_eta(horizon: usize, episodes: usize) -> f64 {
    1.0 / ((horizon * episodes) as f64).sqrt()
}

impl OgapConfig {
    pub fn resolve(&self, mdp: &LinearKernelMdp, psi: &RewardFeatures) -> Result<OgapParams> {
        if self.episodes == 0 {
            return Err(config_error("episodes", "must be at least 1"));
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
            None => default_alpha(mdp.num_actions(), horizon, psi.dim(), self.episodes),
        };
        let eta = match self.eta {
            Some(e) => {
                check_positive("eta", e)?;
                e
            }
            None => default_eta(horizon, self.episodes),
        };
        let d = mdp.feature_dim() as f64;
        let kappa = self.kappa_scale * (d * (horizon as f64 * d * self.episodes as f64 / self.xi).ln()).sqrt();
        Ok(OgapParams {
            episodes: self.episodes,
            alpha,
            eta,
            lambda: self.lambda,
            kappa,
            xi: self.xi,
            value_scale: (psi.dim() as f64).sqrt(),
        })
    }
}

/// φ̄(s,a) = Σ_{s'} φ(s,a,s')·V(s') for every pair, laid out as `[s * A + a]`.
pub fn value_regressors(features: &TransitionFeatures, v_next: &[f64]) -> Vec<Vec<f64>> {
    let (ns, na) = (features.num_states(), features.num_actions());
    (0..ns * na).map(|i| features.integrate(i / na, i % na, v_next)).collect()
}

/// Solves the value-targeted ridge regression from scratch:
/// θ̂ = (λI + Σ_τ φ̄_τφ̄_τᵀ)⁻¹ Σ_τ φ̄_τ·V̂^τ(s'_τ), where each history entry
/// is a transition with the V̂_{h+1} table of its own episode.
pub fn fit_transition_online(
    features: &TransitionFeatures,
    history: &[(Transition, Vec<f64>)],
    lambda: f64,
) -> Result<Vec<f64>> {
    let mut acc = RidgeAccumulator::new(features.dim(), lambda)?;
    for ((s, a, s_next), v_next) in history {
        let u = features.integrate(*s, *a, v_next);
        acc.update(&u, v_next[*s_next])?;
    }
    Ok(acc.solution())
}

/// Γ(s,a) = H√d·min{κ‖φ̄(s,a)‖_{Λ⁻¹}, 1}.
pub fn bonus_online(
    ridge: &RidgeAccumulator,
    regressors: &[Vec<f64>],
    kappa: f64,
    horizon: usize,
    value_scale: f64,
) -> Vec<f64> {
    let cap = horizon as f64 * value_scale;
    regressors
        .iter()
        .map(|u| cap * (kappa * mahalanobis(ridge, u)).min(1.0))
        .collect()
}

/// Q̂ = clip(r + P̂V̂ + Γ, 0, (H−h)√d) for 0-based step h.
pub fn optimistic_backup(
    reward: &[f64],
    phat_v: &[f64],
    gamma: &[f64],
    h: usize,
    horizon: usize,
    value_scale: f64,
) -> Vec<f64> {
    let cap = (horizon - h) as f64 * value_scale;
    reward
        .iter()
        .zip(phat_v)
        .zip(gamma)
        .map(|((r, pv), g)| (r + pv + g).min(cap).max(0.0))
        .collect()
}

/// ψ̄_h − ψ(s_h^k, a_h^k).
pub fn reward_grad_online(demo_mean_psi: &[f64], psi_visited: &[f64]) -> Vec<f64> {
    demo_mean_psi.iter().zip(psi_visited).map(|(m, p)| m - p).collect()
}

/// μ' = Proj(μ + η·grad) onto the radius-√d reward domain.
pub fn reward_update(mu: &[f64], grad: &[f64], eta: f64, domain: RewardDomain) -> Vec<f64> {
    let radius = (mu.len() as f64).sqrt();
    let step: Vec<f64> = mu.iter().zip(grad).map(|(m, g)| m + eta * g).collect();
    domain.project(&step, radius)
}

pub(crate) fn ensure_finite(values: &[f64], episode: usize, what: &str) -> Result<()> {
    if values.iter().any(|x| !x.is_finite()) {
        return Err(Error::Aborted {
            episode,
            reason: format!("non-finite {what}"),
        });
    }
    Ok(())
}

pub(crate) fn check_inputs(mdp: &LinearKernelMdp, psi: &RewardFeatures, demos: &DemoSet) -> Result<()> {
    if demos.horizon != mdp.horizon() {
        return Err(Error::Dimension(format!(
            "demonstrations have horizon {}, model has {}",
            demos.horizon,
            mdp.horizon()
        )));
    }
    if demos.is_empty() {
        return Err(Error::Dimension("empty demonstration set".into()));
    }
    if psi.num_states() != mdp.num_states() || psi.num_actions() != mdp.num_actions() {
        return Err(Error::Dimension("reward features do not match the model".into()));
    }
    Ok(())
}

/// Runs K episodes of the online learner against `mdp`, which serves only
/// as the environment; the true kernel is consulted for ι diagnostics.
pub fn run_ogap(mdp: &LinearKernelMdp, psi: &RewardFeatures, demos: &DemoSet, config: &OgapConfig) -> Result<RunLog> {
    check_inputs(mdp, psi, demos)?;
    let params = config.resolve(mdp, psi)?;
    let (ns, na, horizon) = (mdp.num_states(), mdp.num_actions(), mdp.horizon());
    let features = mdp.features();
    let demo_mean = demos.mean_features(psi);
    let mut rng = seeded(config.seed);

    let mut ridges = (0..horizon)
        .map(|_| RidgeAccumulator::new(features.dim(), params.lambda))
        .collect::<Result<Vec<_>>>()?;
    let mut regressor_log: Vec<Vec<Vec<f64>>> = vec![Vec::with_capacity(params.episodes); horizon];
    let mut policy = Policy::uniform(ns, na, horizon);
    let mut previous_q: Option<ValueTables> = None;
    let mut mu = vec![vec![0.0; psi.dim()]; horizon];
    let mut episodes = Vec::with_capacity(params.episodes);

    for k in 1..=params.episodes {
        if let Some(q) = &previous_q {
            policy = policy.mirror_step(q, params.alpha).map_err(|e| Error::Aborted {
                episode: k,
                reason: e.to_string(),
            })?;
        }
        let transitions = rollout_transitions(mdp, &policy, &mut rng);
        let rewards: Vec<Vec<f64>> = mu.iter().map(|m| psi.reward_table(m)).collect();

        let mut values = ValueTables::zeros(ns, na, horizon);
        let mut gamma = vec![Vec::new(); horizon];
        let mut iota = config.diagnostics.then(|| vec![Vec::new(); horizon]);
        let mut new_regressors = Vec::with_capacity(horizon);
        for h in (0..horizon).rev() {
            let v_next = values.v_step(h + 1).to_vec();
            let regressors = value_regressors(features, &v_next);
            let theta = ridges[h].solution();
            let phat_v: Vec<f64> = regressors.iter().map(|u| dot(u, &theta)).collect();
            let bonus = bonus_online(&ridges[h], &regressors, params.kappa, horizon, params.value_scale);
            let q = optimistic_backup(&rewards[h], &phat_v, &bonus, h, horizon, params.value_scale);
            ensure_finite(&q, k, "Q estimate")?;
            values.set_step(h, &q, &policy);
            if let Some(iota) = iota.as_mut() {
                let pv = mdp.apply_kernel(h, &v_next);
                iota[h] = (0..ns * na).map(|i| rewards[h][i] + pv[i] - q[i]).collect();
            }
            let (s, a, s_next) = transitions[h];
            new_regressors.push((h, regressors[s * na + a].clone(), v_next[s_next]));
            gamma[h] = bonus;
        }
        for (h, u, y) in new_regressors {
            ridges[h].update(&u, y).map_err(|e| Error::Aborted {
                episode: k,
                reason: e.to_string(),
            })?;
            regressor_log[h].push(u);
        }

        let mut next_mu = Vec::with_capacity(horizon);
        for h in 0..horizon {
            let (s, a, _) = transitions[h];
            let grad = reward_grad_online(&demo_mean[h], psi.get(s, a));
            let updated = reward_update(&mu[h], &grad, params.eta, config.reward_domain);
            ensure_finite(&updated, k, "reward parameter")?;
            next_mu.push(updated);
        }

        episodes.push(EpisodeRecord {
            policy: policy.clone(),
            mu: std::mem::replace(&mut mu, next_mu),
            values: values.clone(),
            gamma: Some(gamma),
            transitions,
            iota,
        });
        previous_q = Some(values);
    }

    Ok(RunLog {
        algorithm: Algorithm::Ogap,
        seed: config.seed,
        params: serde_json::to_value(params).expect("serializable"),
        episodes,
        regressors: regressor_log,
        lambda: params.lambda,
        kernel: None,
    })
}
