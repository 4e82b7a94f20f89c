//! Finite linear-kernel episodic MDPs: representation, exact dynamic
//! programming, occupancy measures and rollouts.
//!
//! Steps are 0-based throughout: step `h` in code is step `h + 1` in the
//! usual 1-based episodic notation, and value layer `horizon` is the
//! terminal zero layer.

mod dp;
mod generate;
mod io;
mod model;
mod rollout;

pub use dp::{
    evaluate_rewards, expected_return, expected_return_rewards, gail_objective, occupancy_measures,
    optimal_policy, optimal_policy_rewards, policy_evaluation,
};
pub use generate::{
    check_regularity, fit_kernel_parameter, random_distribution, random_mixture_mdp, random_mu,
    random_policy, random_reward_features, random_tabular_mdp, random_unit_vector, Instance, KERNEL_FIT_TOL,
    REFERENCE_SEED,
};
pub use io::{load_expert_instance, load_instance, save_instance, InstanceDocument};
pub use model::{
    tabular_embedding, transition_matrix, LinearKernelMdp, Policy, RewardFeatures, RewardModel,
    Trajectory, TransitionFeatures, ValueTables, BALL_TOL, SIMPLEX_TOL,
};
pub(crate) use model::apply_rows;
pub use rollout::{rollout, rollout_transitions};
