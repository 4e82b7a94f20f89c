//! Random instance generators and the kernel-parameter fit they rely on.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::mdp::dp::optimal_policy;
use crate::mdp::model::{
    LinearKernelMdp, Policy, RewardFeatures, RewardModel, TransitionFeatures,
};
use crate::numerics::{dot, norm2};
use crate::rng::seeded;

/// Maximum least-squares residual accepted when fitting θ_h onto the span of φ.
pub const KERNEL_FIT_TOL: f64 = 1e-8;

/// Dirichlet(1, …, 1) draw.
pub fn random_distribution<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let draws: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|x| x / total).collect()
}

/// Policy whose rows are independent Dirichlet(1) draws.
pub fn random_policy<R: Rng + ?Sized>(num_states: usize, num_actions: usize, horizon: usize, rng: &mut R) -> Policy {
    let probs = (0..horizon * num_states)
        .flat_map(|_| random_distribution(num_actions, rng))
        .collect();
    Policy::new(num_states, num_actions, horizon, probs).expect("Dirichlet rows are distributions")
}

/// Uniformly random unit vector.
pub fn random_unit_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        let norm = norm2(&v);
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Least-squares θ with φ(s,a,s')ᵀθ ≈ P(s'|s,a); rejects kernels that are not
/// in the span of the features.
pub fn fit_kernel_parameter(features: &TransitionFeatures, kernel: &[f64]) -> Result<Vec<f64>> {
    let rows = features.num_states() * features.num_actions() * features.num_states();
    if kernel.len() != rows {
        return Err(Error::Dimension(format!(
            "kernel has {} entries, expected {rows}",
            kernel.len()
        )));
    }
    let design = DMatrix::from_row_slice(rows, features.dim(), features.raw());
    let target = DVector::from_column_slice(kernel);
    let svd = design.clone().svd(true, true);
    let theta = svd
        .solve(&target, 1e-12)
        .map_err(|e| Error::InvalidModel(format!("kernel fit failed: {e}")))?;
    let residual = (&design * &theta - &target).amax();
    if residual > KERNEL_FIT_TOL {
        return Err(Error::InvalidModel(format!(
            "kernel is not representable by the features (residual {residual:.3e})"
        )));
    }
    Ok(theta.iter().copied().collect())
}

/// Checks the regularity condition on `samples` random unit directions:
/// max_{s'} |φᵀy|² ≤ R²·Σ_{s'} |φᵀy|² and Σ_{s'} |φᵀy|² ≤ d.
pub fn check_regularity(features: &TransitionFeatures, regularity: f64, samples: usize, seed: u64) -> Result<()> {
    let mut rng = seeded(seed);
    let dim = features.dim() as f64;
    for _ in 0..samples {
        let y = random_unit_vector(features.dim(), &mut rng);
        for s in 0..features.num_states() {
            for a in 0..features.num_actions() {
                let mut max_sq: f64 = 0.0;
                let mut total = 0.0;
                for s_next in 0..features.num_states() {
                    let v = dot(features.get(s, a, s_next), &y);
                    max_sq = max_sq.max(v * v);
                    total += v * v;
                }
                if max_sq > regularity * regularity * total * (1.0 + 1e-12) + 1e-15 {
                    return Err(Error::InvalidModel(format!(
                        "regularity constant {regularity} violated at ({s}, {a})"
                    )));
                }
                if total > dim + 1e-9 {
                    return Err(Error::InvalidModel(format!(
                        "feature energy {total} exceeds d_P at ({s}, {a})"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Tabular MDP with Dirichlet(1) transition rows, θ_h fitted onto the
/// canonical embedding.
pub fn random_tabular_mdp(num_states: usize, num_actions: usize, horizon: usize, seed: u64) -> Result<LinearKernelMdp> {
    if num_states == 0 || num_actions == 0 || horizon == 0 {
        return Err(Error::InvalidModel(format!(
            "empty tabular MDP: |S| = {num_states}, |A| = {num_actions}, H = {horizon}"
        )));
    }
    let mut rng = seeded(seed);
    let features = TransitionFeatures::tabular(num_states, num_actions);
    let theta = (0..horizon)
        .map(|_| {
            let kernel: Vec<f64> = (0..num_states * num_actions)
                .flat_map(|_| random_distribution(num_states, &mut rng))
                .collect();
            fit_kernel_parameter(&features, &kernel)
        })
        .collect::<Result<Vec<_>>>()?;
    LinearKernelMdp::new(features, theta, 0, 1.0)
}

/// Linear-kernel MDP whose features are `dim` base kernels:
/// φ(s,a,s') = (q_1(s'|s,a), …, q_d(s'|s,a)) and θ_h a convex combination.
pub fn random_mixture_mdp(
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    dim: usize,
    seed: u64,
) -> Result<LinearKernelMdp> {
    let mut rng = seeded(seed);
    let bases: Vec<Vec<f64>> = (0..dim)
        .map(|_| {
            (0..num_states * num_actions)
                .flat_map(|_| random_distribution(num_states, &mut rng))
                .collect()
        })
        .collect();
    let rows = num_states * num_actions * num_states;
    let mut data = vec![0.0; rows * dim];
    for (i, base) in bases.iter().enumerate() {
        for r in 0..rows {
            data[r * dim + i] = base[r];
        }
    }
    let features = TransitionFeatures::new(num_states, num_actions, dim, data)?;
    let theta = (0..horizon).map(|_| random_distribution(dim, &mut rng)).collect();
    LinearKernelMdp::new(features, theta, 0, 1.0)
}

/// Random reward features with norms in (0, 1], nonnegative when requested.
pub fn random_reward_features(
    num_states: usize,
    num_actions: usize,
    dim: usize,
    nonnegative: bool,
    seed: u64,
) -> Result<RewardFeatures> {
    let mut rng = seeded(seed);
    let mut data = Vec::with_capacity(num_states * num_actions * dim);
    for _ in 0..num_states * num_actions {
        let mut v = random_unit_vector(dim, &mut rng);
        if nonnegative {
            v.iter_mut().for_each(|x| *x = x.abs());
        }
        let scale: f64 = rng.random_range(0.2..1.0);
        data.extend(v.into_iter().map(|x| x * scale));
    }
    RewardFeatures::new(num_states, num_actions, dim, data)
}

/// Random reward parameter with ‖μ_h‖ ≤ √d.
pub fn random_mu<R: Rng + ?Sized>(dim: usize, horizon: usize, nonnegative: bool, rng: &mut R) -> Vec<Vec<f64>> {
    let radius = (dim as f64).sqrt();
    (0..horizon)
        .map(|_| {
            let mut v = random_unit_vector(dim, rng);
            if nonnegative {
                v.iter_mut().for_each(|x| *x = x.abs());
            }
            let scale: f64 = rng.random_range(0.0..1.0);
            v.into_iter().map(|x| x * radius * scale).collect()
        })
        .collect()
}

/// A ground-truth environment together with the reward features available to
/// the learner, the hidden reward the expert optimizes, and the expert.
#[derive(Debug, Clone)]
pub struct Instance {
    pub mdp: LinearKernelMdp,
    pub reward_features: Arc<RewardFeatures>,
    pub expert_reward: RewardModel,
    pub expert: Policy,
}

impl Instance {
    pub fn from_parts(mdp: LinearKernelMdp, expert_reward: RewardModel) -> Result<Self> {
        let expert = optimal_policy(&mdp, &expert_reward)?;
        Ok(Self {
            reward_features: expert_reward.shared_features(),
            mdp,
            expert_reward,
            expert,
        })
    }

    /// Random tabular instance with canonical embeddings; the expert is the
    /// optimal policy for a random nonnegative reward.
    pub fn tabular(num_states: usize, num_actions: usize, horizon: usize, seed: u64) -> Result<Self> {
        let mdp = random_tabular_mdp(num_states, num_actions, horizon, seed)?;
        let psi = Arc::new(RewardFeatures::tabular(num_states, num_actions));
        let mut rng = seeded(seed ^ 0x5EED_0F_E8E7);
        let mu = random_mu(psi.dim(), horizon, true, &mut rng);
        let reward = RewardModel::new(psi, mu)?;
        Self::from_parts(mdp, reward)
    }

    /// The 4-state, 3-action, horizon-4 tabular instance used by the
    /// experiment suites.
    pub fn reference() -> Self {
        Self::tabular(4, 3, 4, REFERENCE_SEED).expect("reference instance is valid")
    }

    pub fn reward_dim(&self) -> usize {
        self.reward_features.dim()
    }
}

pub const REFERENCE_SEED: u64 = 20_230_515;
