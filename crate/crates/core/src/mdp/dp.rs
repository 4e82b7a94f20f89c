//! Exact dynamic programming on the true kernel.

use crate::error::{Error, Result};
use crate::mdp::model::{LinearKernelMdp, Policy, RewardModel, ValueTables};

fn check_rewards(mdp: &LinearKernelMdp, rewards: &[Vec<f64>]) -> Result<()> {
    if rewards.len() != mdp.horizon() {
        return Err(Error::Dimension(format!(
            "{} reward tables for horizon {}",
            rewards.len(),
            mdp.horizon()
        )));
    }
    let n = mdp.num_states() * mdp.num_actions();
    if let Some(bad) = rewards.iter().position(|r| r.len() != n) {
        return Err(Error::Dimension(format!("reward table {bad} has wrong size")));
    }
    Ok(())
}

/// Backward recursion Q_h = r_h + P_h V_{h+1}, V_h = ⟨Q_h, π_h⟩, V_{H+1} = 0,
/// with explicit per-step reward tables.
pub fn evaluate_rewards(mdp: &LinearKernelMdp, rewards: &[Vec<f64>], policy: &Policy) -> Result<ValueTables> {
    check_rewards(mdp, rewards)?;
    policy.check_shape(mdp.num_states(), mdp.num_actions(), mdp.horizon())?;
    let (ns, na, horizon) = (mdp.num_states(), mdp.num_actions(), mdp.horizon());
    let mut tables = ValueTables::zeros(ns, na, horizon);
    for h in (0..horizon).rev() {
        let next = mdp.apply_kernel(h, tables.v_step(h + 1));
        let q: Vec<f64> = rewards[h].iter().zip(&next).map(|(r, pv)| r + pv).collect();
        tables.set_step(h, &q, policy);
    }
    Ok(tables)
}

pub fn policy_evaluation(mdp: &LinearKernelMdp, reward: &RewardModel, policy: &Policy) -> Result<ValueTables> {
    evaluate_rewards(mdp, &reward.tables(), policy)
}

/// J(π, r) = V_1(x).
pub fn expected_return(mdp: &LinearKernelMdp, reward: &RewardModel, policy: &Policy) -> Result<f64> {
    expected_return_rewards(mdp, &reward.tables(), policy)
}

pub fn expected_return_rewards(mdp: &LinearKernelMdp, rewards: &[Vec<f64>], policy: &Policy) -> Result<f64> {
    let tables = evaluate_rewards(mdp, rewards, policy)?;
    Ok(tables.v(0, mdp.init_state()))
}

/// Per-step state-action visitation densities ρ_h(s,a), each laid out as
/// `[s * A + a]` and summing to one.
pub fn occupancy_measures(mdp: &LinearKernelMdp, policy: &Policy) -> Result<Vec<Vec<f64>>> {
    policy.check_shape(mdp.num_states(), mdp.num_actions(), mdp.horizon())?;
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let mut state_dist = vec![0.0; ns];
    state_dist[mdp.init_state()] = 1.0;
    let mut out = Vec::with_capacity(mdp.horizon());
    for h in 0..mdp.horizon() {
        let mut rho = vec![0.0; ns * na];
        for s in 0..ns {
            if state_dist[s] == 0.0 {
                continue;
            }
            for (a, p) in policy.row(h, s).iter().enumerate() {
                rho[s * na + a] = state_dist[s] * p;
            }
        }
        let mut next = vec![0.0; ns];
        for s in 0..ns {
            for a in 0..na {
                let w = rho[s * na + a];
                if w == 0.0 {
                    continue;
                }
                for (n, p) in next.iter_mut().zip(mdp.next_state_dist(h, s, a)) {
                    *n += w * p;
                }
            }
        }
        out.push(rho);
        state_dist = next;
    }
    Ok(out)
}

/// Greedy backward induction; ties go to the lowest action index.
pub fn optimal_policy(mdp: &LinearKernelMdp, reward: &RewardModel) -> Result<Policy> {
    optimal_policy_rewards(mdp, &reward.tables())
}

pub fn optimal_policy_rewards(mdp: &LinearKernelMdp, rewards: &[Vec<f64>]) -> Result<Policy> {
    check_rewards(mdp, rewards)?;
    let (ns, na, horizon) = (mdp.num_states(), mdp.num_actions(), mdp.horizon());
    let mut actions = vec![0usize; horizon * ns];
    let mut v_next = vec![0.0; ns];
    for h in (0..horizon).rev() {
        let pv = mdp.apply_kernel(h, &v_next);
        let mut v = vec![0.0; ns];
        for s in 0..ns {
            let mut best = 0;
            let mut best_q = f64::NEG_INFINITY;
            for a in 0..na {
                let q = rewards[h][s * na + a] + pv[s * na + a];
                if q > best_q {
                    best_q = q;
                    best = a;
                }
            }
            actions[h * ns + s] = best;
            v[s] = best_q;
        }
        v_next = v;
    }
    Policy::deterministic(ns, na, horizon, &actions)
}

/// L(π, μ) = J(π^E, r^μ) − J(π, r^μ).
pub fn gail_objective(
    mdp: &LinearKernelMdp,
    reward: &RewardModel,
    expert: &Policy,
    policy: &Policy,
) -> Result<f64> {
    let rewards = reward.tables();
    Ok(expected_return_rewards(mdp, &rewards, expert)? - expected_return_rewards(mdp, &rewards, policy)?)
}
