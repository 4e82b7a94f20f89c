//! Expert demonstrations, additional offline data, the coverage diagnostic,
//! and the JSON Lines dataset format.

mod coverage;
mod generate;
mod io;

pub use coverage::coverage_ratio;
pub use generate::{generate_additional, generate_demos, AdaptiveRule, Behavior, History};
pub use io::{load_additional, load_dataset, load_demos, save_dataset, Dataset, DATASET_VERSION};

use crate::mdp::{RewardFeatures, Trajectory};

/// A transition (s_h, a_h, s_{h+1}).
pub type Transition = (usize, usize, usize);

/// Expert demonstration: N₁ independent trajectories of the expert.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoSet {
    pub horizon: usize,
    pub trajectories: Vec<Trajectory>,
    pub source_policy_id: String,
    pub seed: u64,
}

impl DemoSet {
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    /// ψ̄_h = N₁⁻¹ Σ_τ ψ(s_{h,τ}, a_{h,τ}) for every step.
    pub fn mean_features(&self, psi: &RewardFeatures) -> Vec<Vec<f64>> {
        let n = self.trajectories.len().max(1) as f64;
        let ncols = psi.num_actions();
        (0..self.horizon)
            .map(|h| {
                let mut counts = vec![0.0; psi.num_states() * ncols];
                for t in &self.trajectories {
                    let (s, a) = t.steps[h];
                    counts[s * ncols + a] += 1.0;
                }
                counts.iter_mut().for_each(|c| *c /= n);
                psi.weighted_sum(&counts)
            })
            .collect()
    }
}

/// Additional dataset: N₂ trajectories of (s, a, s') triples collected by an
/// arbitrary (possibly adaptive) experimenter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdditionalSet {
    pub horizon: usize,
    pub trajectories: Vec<Vec<Transition>>,
    pub behavior_spec: String,
    pub seed: u64,
}

impl AdditionalSet {
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    /// Visit counts n_h(s,a) laid out as `[s * A + a]`.
    pub fn visit_counts(&self, h: usize, num_states: usize, num_actions: usize) -> Vec<usize> {
        let mut counts = vec![0; num_states * num_actions];
        for t in &self.trajectories {
            let (s, a, _) = t[h];
            counts[s * num_actions + a] += 1;
        }
        counts
    }

    /// First `n` trajectories, keeping provenance.
    pub fn prefix(&self, n: usize) -> Self {
        Self {
            horizon: self.horizon,
            trajectories: self.trajectories[..n.min(self.len())].to_vec(),
            behavior_spec: self.behavior_spec.clone(),
            seed: self.seed,
        }
    }
}
