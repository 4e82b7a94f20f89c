use rand::Rng;

use crate::mdp::model::{LinearKernelMdp, Policy, Trajectory};
use crate::rng::sample_index;

/// Samples one episode from the initial state, returning the H triples
/// (s_h, a_h, s_{h+1}).
pub fn rollout_transitions<R: Rng + ?Sized>(
    mdp: &LinearKernelMdp,
    policy: &Policy,
    rng: &mut R,
) -> Vec<(usize, usize, usize)> {
    let mut s = mdp.init_state();
    let mut out = Vec::with_capacity(mdp.horizon());
    for h in 0..mdp.horizon() {
        let a = sample_index(policy.row(h, s), rng);
        let s_next = sample_index(mdp.next_state_dist(h, s, a), rng);
        out.push((s, a, s_next));
        s = s_next;
    }
    out
}

/// a_h ~ π_h(·|s_h), s_{h+1} ~ P_h(·|s_h, a_h), starting at the initial state.
pub fn rollout<R: Rng + ?Sized>(mdp: &LinearKernelMdp, policy: &Policy, rng: &mut R) -> Trajectory {
    Trajectory {
        steps: rollout_transitions(mdp, policy, rng)
            .into_iter()
            .map(|(s, a, _)| (s, a))
            .collect(),
    }
}
