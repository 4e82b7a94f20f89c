//! Exact worst-case regret and optimality gap over the reward ball,
//! intrinsic uncertainty, Monte Carlo bound checks and curve fitting.
//!
//! The reward set is a product of balls of radius √d over steps, so for a
//! linear payoff Σ_h ⟨Δ_h, μ_h⟩ the supremum is √d·Σ_h ‖Δ_h‖ attained at
//! μ*_h = √d·Δ_h/‖Δ_h‖.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::datasets::{generate_demos, DemoSet};
use crate::error::{Error, Result};
use crate::mdp::{evaluate_rewards, occupancy_measures, LinearKernelMdp, Policy, RewardFeatures, ValueTables};
use crate::numerics::{dot, elliptical_potential_audit, norm2, EllipticalAudit};
use crate::pgap::MixedPolicy;
use crate::rng::{derive_seed, SimRng};
use crate::runlog::RunLog;

/// E_{ρ_h^π}[ψ] for every step.
pub fn feature_expectations(mdp: &LinearKernelMdp, policy: &Policy, psi: &RewardFeatures) -> Result<Vec<Vec<f64>>> {
    Ok(occupancy_measures(mdp, policy)?
        .iter()
        .map(|rho| psi.weighted_sum(rho))
        .collect())
}

/// sup over the product of radius-√d balls of Σ_h ⟨Δ_h, μ_h⟩, with the
/// maximizer (zero on steps where Δ_h vanishes).
pub fn ball_supremum(deltas: &[Vec<f64>]) -> (f64, Vec<Vec<f64>>) {
    let mut total = 0.0;
    let mut argmax = Vec::with_capacity(deltas.len());
    for delta in deltas {
        let radius = (delta.len() as f64).sqrt();
        let norm = norm2(delta);
        total += radius * norm;
        if norm > 0.0 {
            argmax.push(delta.iter().map(|x| radius * x / norm).collect());
        } else {
            argmax.push(vec![0.0; delta.len()]);
        }
    }
    (total, argmax)
}

#[derive(Debug, Clone, Serialize)]
pub struct RegretReport {
    /// Regret(k) for k = 1..K.
    pub cumulative: Vec<f64>,
    /// Worst-case gap of each iterate on its own.
    pub per_episode: Vec<f64>,
    /// Δ_h = Σ_k (E_E[ψ] − E_k[ψ]).
    pub delta: Vec<Vec<f64>>,
    pub mu_star: Vec<Vec<f64>>,
}

impl RegretReport {
    pub fn total(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    /// Rows `k,cumulative_regret`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,cumulative_regret\n");
        for (k, r) in self.cumulative.iter().enumerate() {
            writeln!(out, "{},{r}", k + 1).expect("string write");
        }
        out
    }
}

/// sup_{μ∈S} Σ_k [J(π^E, r^μ) − J(π^k, r^μ)] in closed form, for every prefix.
pub fn worst_case_regret(
    mdp: &LinearKernelMdp,
    expert: &Policy,
    iterates: &[Policy],
    psi: &RewardFeatures,
) -> Result<RegretReport> {
    if iterates.is_empty() {
        return Err(Error::Dimension("regret needs at least one iterate".into()));
    }
    let expert_features = feature_expectations(mdp, expert, psi)?;
    let gaps = iterates
        .par_iter()
        .map(|p| {
            let f = feature_expectations(mdp, p, psi)?;
            Ok(expert_features
                .iter()
                .zip(&f)
                .map(|(e, x)| e.iter().zip(x).map(|(a, b)| a - b).collect::<Vec<f64>>())
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut delta = vec![vec![0.0; psi.dim()]; mdp.horizon()];
    let mut cumulative = Vec::with_capacity(iterates.len());
    let mut per_episode = Vec::with_capacity(iterates.len());
    for gap in &gaps {
        for (acc, g) in delta.iter_mut().zip(gap) {
            acc.iter_mut().zip(g).for_each(|(a, b)| *a += b);
        }
        cumulative.push(ball_supremum(&delta).0);
        per_episode.push(ball_supremum(gap).0);
    }
    let mu_star = ball_supremum(&delta).1;
    Ok(RegretReport {
        cumulative,
        per_episode,
        delta,
        mu_star,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GapReport {
    /// D_R(π^E, π̂).
    pub gap: f64,
    pub mu_star: Vec<Vec<f64>>,
    /// E_E[ψ] − K⁻¹ Σ_k E_k[ψ] per step.
    pub feature_gap: Vec<Vec<f64>>,
    pub intrinsic_uncertainty: Option<f64>,
    pub iterations: usize,
    pub n1: Option<usize>,
    pub n2: Option<usize>,
    pub reward_dim: usize,
    pub horizon: usize,
}

/// sup_{μ∈S} [J(π^E, r^μ) − K⁻¹Σ_k J(π^k, r^μ)] in closed form.
pub fn optimality_gap(
    mdp: &LinearKernelMdp,
    expert: &Policy,
    mixed: &MixedPolicy,
    psi: &RewardFeatures,
) -> Result<GapReport> {
    let expert_features = feature_expectations(mdp, expert, psi)?;
    let k = mixed.len() as f64;
    let mut feature_gap = expert_features.clone();
    let per_iterate = mixed
        .iterates
        .par_iter()
        .map(|p| feature_expectations(mdp, p, psi))
        .collect::<Result<Vec<_>>>()?;
    for f in &per_iterate {
        for (acc, x) in feature_gap.iter_mut().zip(f) {
            acc.iter_mut().zip(x).for_each(|(a, b)| *a -= b / k);
        }
    }
    let (gap, mu_star) = ball_supremum(&feature_gap);
    Ok(GapReport {
        gap,
        mu_star,
        feature_gap,
        intrinsic_uncertainty: None,
        iterations: mixed.len(),
        n1: None,
        n2: None,
        reward_dim: psi.dim(),
        horizon: mdp.horizon(),
    })
}

/// 2·Σ_h E_{ρ_h^{π^E}}[Γ_h(s_h, a_h)].
pub fn intrinsic_uncertainty(mdp: &LinearKernelMdp, expert: &Policy, gamma: &[Vec<f64>]) -> Result<f64> {
    let rho = occupancy_measures(mdp, expert)?;
    Ok(2.0 * rho.iter().zip(gamma).map(|(r, g)| dot(r, g)).sum::<f64>())
}

/// 4·√(H³d²/N₁)·log(6N₁/ξ).
pub fn mc_bound(horizon: usize, dim: usize, n1: usize, xi: f64) -> f64 {
    let (h, d, n) = (horizon as f64, dim as f64, n1 as f64);
    4.0 * (h.powi(3) * d * d / n).sqrt() * (6.0 * n / xi).ln()
}

/// sup_{μ∈S} |J̃(π^E, r^μ) − J(π^E, r^μ)| = √d·Σ_h ‖ψ̄_h − E_E[ψ]‖.
pub fn mc_deviation(mdp: &LinearKernelMdp, expert: &Policy, psi: &RewardFeatures, demos: &DemoSet) -> Result<f64> {
    let exact = feature_expectations(mdp, expert, psi)?;
    let empirical = demos.mean_features(psi);
    let deltas: Vec<Vec<f64>> = exact
        .iter()
        .zip(&empirical)
        .map(|(e, m)| e.iter().zip(m).map(|(a, b)| a - b).collect())
        .collect();
    Ok(ball_supremum(&deltas).0)
}

#[derive(Debug, Clone, Serialize)]
pub struct McReport {
    pub bound: f64,
    pub deviations: Vec<f64>,
    pub violation_fraction: f64,
}

/// Resamples `trials` demonstration sets of size `n1` and reports how often
/// the deviation exceeds the high-probability bound.
pub fn mc_bound_check(
    mdp: &LinearKernelMdp,
    expert: &Policy,
    psi: &RewardFeatures,
    n1: usize,
    trials: usize,
    xi: f64,
    seed: u64,
) -> Result<McReport> {
    let bound = mc_bound(mdp.horizon(), psi.dim(), n1, xi);
    let deviations = (0..trials)
        .map(|t| {
            let demos = generate_demos(mdp, expert, n1, derive_seed(seed, t as u64), "expert");
            mc_deviation(mdp, expert, psi, &demos)
        })
        .collect::<Result<Vec<_>>>()?;
    let violations = deviations.iter().filter(|&&d| d > bound).count();
    Ok(McReport {
        bound,
        violation_fraction: violations as f64 / trials.max(1) as f64,
        deviations,
    })
}

/// Least-squares slope of log(value) against log(x). Nonpositive values are
/// dropped with a warning.
pub fn slope_fit(xs: &[f64], values: &[f64]) -> Result<f64> {
    if xs.len() != values.len() {
        return Err(Error::Dimension("slope fit inputs differ in length".into()));
    }
    let points: Vec<(f64, f64)> = xs
        .iter()
        .zip(values)
        .filter(|&(&x, &y)| {
            let keep = x > 0.0 && y > 0.0;
            if !keep {
                log::warn!("slope fit: dropping nonpositive point ({x}, {y})");
            }
            keep
        })
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if points.len() < 2 {
        return Err(Error::Degenerate("slope fit needs two positive points".into()));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("slope fit needs distinct abscissae".into()));
    }
    Ok(sxy / sxx)
}

/// Central differences of `f` at `point` against `gradient`: the largest
/// coordinate error divided by the larger sup-norm of the two gradients
/// (absolute error when both vanish).
pub fn finite_diff_check(f: &dyn Fn(&[f64]) -> f64, gradient: &[f64], point: &[f64], step: f64) -> f64 {
    let mut x = point.to_vec();
    let mut numeric = Vec::with_capacity(point.len());
    for i in 0..point.len() {
        x[i] = point[i] + step;
        let up = f(&x);
        x[i] = point[i] - step;
        let down = f(&x);
        x[i] = point[i];
        numeric.push((up - down) / (2.0 * step));
    }
    let err = numeric
        .iter()
        .zip(gradient)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let scale = numeric
        .iter()
        .chain(gradient)
        .map(|x| x.abs())
        .fold(0.0, f64::max);
    if scale > 0.0 {
        err / scale
    } else {
        err
    }
}

/// Both sides of the extended value difference identity for arbitrary Q̂:
/// V̂₁(x) − V₁^{π'}(x) on the left; on the right the π'-expected policy
/// mismatch ⟨Q̂_h, π_h − π'_h⟩ plus the Bellman residual Q̂_h − r_h − P_hV̂_{h+1}.
pub fn extended_value_difference(
    mdp: &LinearKernelMdp,
    rewards: &[Vec<f64>],
    policy: &Policy,
    other: &Policy,
    qhat: &[Vec<f64>],
) -> Result<(f64, f64)> {
    let (ns, na, horizon) = (mdp.num_states(), mdp.num_actions(), mdp.horizon());
    if qhat.len() != horizon || qhat.iter().any(|q| q.len() != ns * na) {
        return Err(Error::Dimension("Q̂ tables do not match the model".into()));
    }
    let mut estimated = ValueTables::zeros(ns, na, horizon);
    for h in (0..horizon).rev() {
        estimated.set_step(h, &qhat[h], policy);
    }
    let other_values = evaluate_rewards(mdp, rewards, other)?;
    let x = mdp.init_state();
    let lhs = estimated.v(0, x) - other_values.v(0, x);

    let rho = occupancy_measures(mdp, other)?;
    let mut rhs = 0.0;
    for h in 0..horizon {
        let pv = mdp.apply_kernel(h, estimated.v_step(h + 1));
        for s in 0..ns {
            let mass: f64 = (0..na).map(|a| rho[h][s * na + a]).sum();
            if mass == 0.0 {
                continue;
            }
            let mismatch: f64 = (0..na)
                .map(|a| qhat[h][s * na + a] * (policy.prob(h, s, a) - other.prob(h, s, a)))
                .sum();
            rhs += mass * mismatch;
            for a in 0..na {
                let i = s * na + a;
                rhs += rho[h][i] * (qhat[h][i] - rewards[h][i] - pv[i]);
            }
        }
    }
    Ok((lhs, rhs))
}

/// Elliptical potential audit of every step's regressor sequence in an
/// online run log.
pub fn audit_run(log: &RunLog) -> Result<Vec<EllipticalAudit>> {
    log.regressors
        .iter()
        .map(|seq| {
            let dim = seq.first().map(|u| u.len()).unwrap_or(0);
            let lambda0 = DMatrix::identity(dim, dim) * log.lambda;
            elliptical_potential_audit(&lambda0, seq)
        })
        .collect()
}

/// Samples a point uniformly from the radius-√d ball in every step.
pub fn sample_reward_parameter(dim: usize, horizon: usize, rng: &mut SimRng) -> Vec<Vec<f64>> {
    use rand::Rng;
    use rand_distr::StandardNormal;
    let radius = (dim as f64).sqrt();
    (0..horizon)
        .map(|_| {
            let g: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let norm = norm2(&g).max(f64::MIN_POSITIVE);
            let r = radius * rng.random::<f64>().powf(1.0 / dim as f64);
            g.iter().map(|x| r * x / norm).collect()
        })
        .collect()
}
