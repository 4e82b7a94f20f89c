use rand::RngCore;
use rayon::prelude::*;

use super::{AdditionalSet, DemoSet, Transition};
use crate::mdp::{rollout, rollout_transitions, LinearKernelMdp, Policy};
use crate::rng::{derive_seed, sample_index, seeded};

/// N₁ independent expert rollouts; trajectory τ uses a seed derived from
/// (`seed`, τ), so the set does not depend on thread scheduling.
pub fn generate_demos(mdp: &LinearKernelMdp, expert: &Policy, n1: usize, seed: u64, source_policy_id: &str) -> DemoSet {
    let trajectories = (0..n1)
        .into_par_iter()
        .map(|tau| {
            let mut rng = seeded(derive_seed(seed, tau as u64));
            rollout(mdp, expert, &mut rng)
        })
        .collect();
    DemoSet {
        horizon: mdp.horizon(),
        trajectories,
        source_policy_id: source_policy_id.to_string(),
        seed,
    }
}

/// Information available to an adaptive experimenter before choosing a_h in
/// trajectory τ: all earlier trajectories and the prefix of the current one.
pub struct History<'a> {
    pub completed: &'a [Vec<Transition>],
    pub current: &'a [Transition],
}

/// A history-dependent action rule.
pub trait AdaptiveRule {
    fn choose(&mut self, history: &History<'_>, h: usize, state: usize, rng: &mut dyn RngCore) -> usize;
    fn describe(&self) -> String;
}

/// How the additional dataset is collected.
pub enum Behavior<'a> {
    Policy { policy: &'a Policy, id: String },
    Uniform,
    Adaptive(Box<dyn AdaptiveRule + 'a>),
}

impl Behavior<'_> {
    pub fn describe(&self) -> String {
        match self {
            Behavior::Policy { id, .. } => format!("policy:{id}"),
            Behavior::Uniform => "uniform".to_string(),
            Behavior::Adaptive(rule) => format!("adaptive:{}", rule.describe()),
        }
    }
}

pub fn generate_additional(mdp: &LinearKernelMdp, behavior: Behavior<'_>, n2: usize, seed: u64) -> AdditionalSet {
    let behavior_spec = behavior.describe();
    let trajectories = match behavior {
        Behavior::Policy { policy, .. } => parallel_rollouts(mdp, policy, n2, seed),
        Behavior::Uniform => {
            let uniform = Policy::uniform(mdp.num_states(), mdp.num_actions(), mdp.horizon());
            parallel_rollouts(mdp, &uniform, n2, seed)
        }
        Behavior::Adaptive(mut rule) => {
            let mut done: Vec<Vec<Transition>> = Vec::with_capacity(n2);
            for tau in 0..n2 {
                let mut rng = seeded(derive_seed(seed, tau as u64));
                let mut current = Vec::with_capacity(mdp.horizon());
                let mut s = mdp.init_state();
                for h in 0..mdp.horizon() {
                    let history = History {
                        completed: &done,
                        current: &current,
                    };
                    let a = rule.choose(&history, h, s, &mut rng) % mdp.num_actions();
                    let s_next = sample_index(mdp.next_state_dist(h, s, a), &mut rng);
                    current.push((s, a, s_next));
                    s = s_next;
                }
                done.push(current);
            }
            done
        }
    };
    AdditionalSet {
        horizon: mdp.horizon(),
        trajectories,
        behavior_spec,
        seed,
    }
}

fn parallel_rollouts(mdp: &LinearKernelMdp, policy: &Policy, n: usize, seed: u64) -> Vec<Vec<Transition>> {
    (0..n)
        .into_par_iter()
        .map(|tau| {
            let mut rng = seeded(derive_seed(seed, tau as u64));
            rollout_transitions(mdp, policy, &mut rng)
        })
        .collect()
}
