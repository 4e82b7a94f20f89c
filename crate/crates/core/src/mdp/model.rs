use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::{dot, mirror_descent_step, norm2};

/// Tolerance for simplex membership of kernel rows and policy rows.
pub const SIMPLEX_TOL: f64 = 1e-9;
/// Tolerance for ball membership of parameters.
pub const BALL_TOL: f64 = 1e-9;
const NEGATIVE_MASS_TOL: f64 = 1e-12;

/// Transition feature map φ(s, a, s') ∈ R^{d_P}, stored densely.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionFeatures {
    num_states: usize,
    num_actions: usize,
    dim: usize,
    tabular: bool,
    data: Vec<f64>,
}

impl TransitionFeatures {
    /// `data` is laid out as `[(s * A + a) * S + s'][dim]`.
    pub fn new(num_states: usize, num_actions: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if num_states == 0 || num_actions == 0 || dim == 0 {
            return Err(Error::InvalidModel("empty transition feature map".into()));
        }
        let expected = num_states * num_actions * num_states * dim;
        if data.len() != expected {
            return Err(Error::Dimension(format!(
                "transition features have {} entries, expected {expected}",
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                context: "transition features".into(),
            });
        }
        Ok(Self {
            num_states,
            num_actions,
            dim,
            tabular: false,
            data,
        })
    }

    /// Canonical basis φ(s,a,s') = e_{(s,a,s')}.
    pub fn tabular(num_states: usize, num_actions: usize) -> Self {
        let dim = num_states * num_states * num_actions;
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = 1.0;
        }
        Self {
            num_states,
            num_actions,
            dim,
            tabular: true,
            data,
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_tabular(&self) -> bool {
        self.tabular
    }

    pub fn get(&self, s: usize, a: usize, s_next: usize) -> &[f64] {
        let row = (s * self.num_actions + a) * self.num_states + s_next;
        &self.data[row * self.dim..(row + 1) * self.dim]
    }

    /// Σ_{s'} φ(s,a,s')·w(s').
    pub fn integrate(&self, s: usize, a: usize, weights: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (s_next, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (o, f) in out.iter_mut().zip(self.get(s, a, s_next)) {
                *o += w * f;
            }
        }
        out
    }

    pub(crate) fn raw(&self) -> &[f64] {
        &self.data
    }
}

/// Reward feature map ψ(s, a) ∈ R^{d_R} with ‖ψ(s,a)‖₂ ≤ 1.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardFeatures {
    num_states: usize,
    num_actions: usize,
    dim: usize,
    tabular: bool,
    data: Vec<f64>,
}

impl RewardFeatures {
    /// `data` is laid out as `[s * A + a][dim]`.
    pub fn new(num_states: usize, num_actions: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if num_states == 0 || num_actions == 0 || dim == 0 {
            return Err(Error::InvalidModel("empty reward feature map".into()));
        }
        if data.len() != num_states * num_actions * dim {
            return Err(Error::Dimension(format!(
                "reward features have {} entries, expected {}",
                data.len(),
                num_states * num_actions * dim
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                context: "reward features".into(),
            });
        }
        let features = Self {
            num_states,
            num_actions,
            dim,
            tabular: false,
            data,
        };
        for s in 0..num_states {
            for a in 0..num_actions {
                let n = norm2(features.get(s, a));
                if n > 1.0 + 1e-12 {
                    return Err(Error::InvalidModel(format!(
                        "reward feature at ({s}, {a}) has norm {n} > 1"
                    )));
                }
            }
        }
        Ok(features)
    }

    /// Canonical basis ψ(s,a) = e_{(s,a)}.
    pub fn tabular(num_states: usize, num_actions: usize) -> Self {
        let dim = num_states * num_actions;
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = 1.0;
        }
        Self {
            num_states,
            num_actions,
            dim,
            tabular: true,
            data,
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_tabular(&self) -> bool {
        self.tabular
    }

    pub fn get(&self, s: usize, a: usize) -> &[f64] {
        let row = s * self.num_actions + a;
        &self.data[row * self.dim..(row + 1) * self.dim]
    }

    /// True when every feature entry is nonnegative.
    pub fn is_nonnegative(&self) -> bool {
        self.data.iter().all(|&x| x >= 0.0)
    }

    /// r(s,a) = ψ(s,a)ᵀμ for one step, laid out as `[s * A + a]`.
    pub fn reward_table(&self, mu: &[f64]) -> Vec<f64> {
        (0..self.num_states * self.num_actions)
            .map(|row| dot(&self.data[row * self.dim..(row + 1) * self.dim], mu))
            .collect()
    }

    /// Σ_{s,a} w(s,a)·ψ(s,a) for a weight table laid out as `[s * A + a]`.
    pub fn weighted_sum(&self, weights: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (row, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (o, f) in out.iter_mut().zip(&self.data[row * self.dim..(row + 1) * self.dim]) {
                *o += w * f;
            }
        }
        out
    }
}

/// Returns the canonical one-hot embedding of a tabular MDP: (φ, ψ) with
/// d_P = |S|²|A| and d_R = |S||A|.
pub fn tabular_embedding(num_states: usize, num_actions: usize) -> (TransitionFeatures, RewardFeatures) {
    (
        TransitionFeatures::tabular(num_states, num_actions),
        RewardFeatures::tabular(num_states, num_actions),
    )
}

/// Builds P_h(s'|s,a) = φ(s,a,s')ᵀθ_h, laid out as `[(s * A + a) * S + s']`,
/// rejecting rows that are not probability distributions.
pub fn transition_matrix(features: &TransitionFeatures, theta: &[f64]) -> Result<Vec<f64>> {
    if theta.len() != features.dim() {
        return Err(Error::Dimension(format!(
            "kernel parameter has length {}, feature dim is {}",
            theta.len(),
            features.dim()
        )));
    }
    let (ns, na) = (features.num_states(), features.num_actions());
    let mut kernel = Vec::with_capacity(ns * na * ns);
    for s in 0..ns {
        for a in 0..na {
            let mut total = 0.0;
            for s_next in 0..ns {
                let p = dot(features.get(s, a, s_next), theta);
                if !p.is_finite() || p < -NEGATIVE_MASS_TOL {
                    return Err(Error::InvalidModel(format!(
                        "P({s_next} | {s}, {a}) = {p} is not a probability"
                    )));
                }
                total += p;
                kernel.push(p);
            }
            if (total - 1.0).abs() > SIMPLEX_TOL {
                return Err(Error::InvalidModel(format!(
                    "row ({s}, {a}) sums to {total}, not 1"
                )));
            }
        }
    }
    Ok(kernel)
}

/// A finite linear-kernel episodic MDP. Steps are indexed `0..horizon`.
#[derive(Debug, Clone)]
pub struct LinearKernelMdp {
    features: Arc<TransitionFeatures>,
    theta: Vec<Vec<f64>>,
    horizon: usize,
    init_state: usize,
    regularity: f64,
    kernels: Vec<Vec<f64>>,
}

impl LinearKernelMdp {
    pub fn new(
        features: TransitionFeatures,
        theta: Vec<Vec<f64>>,
        init_state: usize,
        regularity: f64,
    ) -> Result<Self> {
        Self::with_shared_features(Arc::new(features), theta, init_state, regularity)
    }

    pub fn with_shared_features(
        features: Arc<TransitionFeatures>,
        theta: Vec<Vec<f64>>,
        init_state: usize,
        regularity: f64,
    ) -> Result<Self> {
        let horizon = theta.len();
        if horizon == 0 {
            return Err(Error::InvalidModel("horizon must be at least 1".into()));
        }
        if init_state >= features.num_states() {
            return Err(Error::InvalidModel(format!(
                "initial state {init_state} out of range"
            )));
        }
        if !(regularity > 0.0 && regularity.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "regularity constant must be positive, got {regularity}"
            )));
        }
        let bound = (features.dim() as f64).sqrt() + BALL_TOL;
        let mut kernels = Vec::with_capacity(horizon);
        for (h, th) in theta.iter().enumerate() {
            let n = norm2(th);
            if n > bound {
                return Err(Error::InvalidModel(format!(
                    "‖θ_{h}‖ = {n} exceeds √d_P"
                )));
            }
            kernels.push(
                transition_matrix(&features, th)
                    .map_err(|e| Error::InvalidModel(format!("step {h}: {e}")))?,
            );
        }
        Ok(Self {
            features,
            theta,
            horizon,
            init_state,
            regularity,
            kernels,
        })
    }

    pub fn num_states(&self) -> usize {
        self.features.num_states()
    }

    pub fn num_actions(&self) -> usize {
        self.features.num_actions()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn init_state(&self) -> usize {
        self.init_state
    }

    pub fn regularity(&self) -> f64 {
        self.regularity
    }

    pub fn features(&self) -> &TransitionFeatures {
        &self.features
    }

    pub fn shared_features(&self) -> Arc<TransitionFeatures> {
        Arc::clone(&self.features)
    }

    pub fn feature_dim(&self) -> usize {
        self.features.dim()
    }

    pub fn theta(&self, h: usize) -> &[f64] {
        &self.theta[h]
    }

    /// Row-stochastic kernel of step `h`, laid out as `[(s * A + a) * S + s']`.
    pub fn kernel(&self, h: usize) -> &[f64] {
        &self.kernels[h]
    }

    /// P_h(·|s,a).
    pub fn next_state_dist(&self, h: usize, s: usize, a: usize) -> &[f64] {
        let ns = self.num_states();
        let row = s * self.num_actions() + a;
        &self.kernels[h][row * ns..(row + 1) * ns]
    }

    /// [P_h f](s,a) for every (s,a), laid out as `[s * A + a]`.
    pub fn apply_kernel(&self, h: usize, values: &[f64]) -> Vec<f64> {
        apply_rows(&self.kernels[h], self.num_states(), values)
    }
}

/// Multiplies each length-|S| row of `rows` against `values`.
pub(crate) fn apply_rows(rows: &[f64], num_states: usize, values: &[f64]) -> Vec<f64> {
    rows.chunks_exact(num_states).map(|row| dot(row, values)).collect()
}

/// Reward model r_h(s,a) = ψ(s,a)ᵀμ_h with μ_h in the ball of radius √d_R.
#[derive(Debug, Clone)]
pub struct RewardModel {
    features: Arc<RewardFeatures>,
    mu: Vec<Vec<f64>>,
}

impl RewardModel {
    pub fn new(features: Arc<RewardFeatures>, mu: Vec<Vec<f64>>) -> Result<Self> {
        let radius = (features.dim() as f64).sqrt();
        for (h, m) in mu.iter().enumerate() {
            if m.len() != features.dim() {
                return Err(Error::Dimension(format!(
                    "μ_{h} has length {}, reward dim is {}",
                    m.len(),
                    features.dim()
                )));
            }
            if m.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite {
                    context: format!("μ_{h}"),
                });
            }
            let n = norm2(m);
            if n > radius + BALL_TOL {
                return Err(Error::InvalidModel(format!("‖μ_{h}‖ = {n} exceeds √d_R")));
            }
        }
        Ok(Self { features, mu })
    }

    pub fn zero(features: Arc<RewardFeatures>, horizon: usize) -> Self {
        let mu = vec![vec![0.0; features.dim()]; horizon];
        Self { features, mu }
    }

    pub fn features(&self) -> &RewardFeatures {
        &self.features
    }

    pub fn shared_features(&self) -> Arc<RewardFeatures> {
        Arc::clone(&self.features)
    }

    pub fn horizon(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[Vec<f64>] {
        &self.mu
    }

    /// Per-step reward tables, each laid out as `[s * A + a]`.
    pub fn tables(&self) -> Vec<Vec<f64>> {
        self.mu.iter().map(|m| self.features.reward_table(m)).collect()
    }
}

/// A nonstationary stochastic policy: one distribution over actions per (h, s).
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    probs: Vec<f64>,
}

impl Policy {
    /// `probs` is laid out as `[(h * S + s) * A + a]`.
    pub fn new(num_states: usize, num_actions: usize, horizon: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != horizon * num_states * num_actions {
            return Err(Error::Dimension(format!(
                "policy table has {} entries, expected {}",
                probs.len(),
                horizon * num_states * num_actions
            )));
        }
        let policy = Self {
            num_states,
            num_actions,
            horizon,
            probs,
        };
        for h in 0..horizon {
            for s in 0..num_states {
                check_distribution(policy.row(h, s))
                    .map_err(|e| Error::InvalidModel(format!("policy row ({h}, {s}): {e}")))?;
            }
        }
        Ok(policy)
    }

    pub fn uniform(num_states: usize, num_actions: usize, horizon: usize) -> Self {
        Self {
            num_states,
            num_actions,
            horizon,
            probs: vec![1.0 / num_actions as f64; horizon * num_states * num_actions],
        }
    }

    /// Deterministic policy from an action table laid out as `[h * S + s]`.
    pub fn deterministic(num_states: usize, num_actions: usize, horizon: usize, actions: &[usize]) -> Result<Self> {
        if actions.len() != horizon * num_states {
            return Err(Error::Dimension("action table size".into()));
        }
        let mut probs = vec![0.0; horizon * num_states * num_actions];
        for (i, &a) in actions.iter().enumerate() {
            if a >= num_actions {
                return Err(Error::InvalidModel(format!("action {a} out of range")));
            }
            probs[i * num_actions + a] = 1.0;
        }
        Ok(Self {
            num_states,
            num_actions,
            horizon,
            probs,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn row(&self, h: usize, s: usize) -> &[f64] {
        let start = (h * self.num_states + s) * self.num_actions;
        &self.probs[start..start + self.num_actions]
    }

    pub fn prob(&self, h: usize, s: usize, a: usize) -> f64 {
        self.probs[(h * self.num_states + s) * self.num_actions + a]
    }

    /// Replaces row (h, s); the caller guarantees it is a distribution.
    pub(crate) fn set_row(&mut self, h: usize, s: usize, row: &[f64]) {
        let start = (h * self.num_states + s) * self.num_actions;
        self.probs[start..start + self.num_actions].copy_from_slice(row);
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    /// Mirror-descent improvement of every row against `q`:
    /// π'_h(·|s) ∝ π_h(·|s)·exp(α·Q_h(s,·)).
    pub fn mirror_step(&self, q: &ValueTables, alpha: f64) -> Result<Policy> {
        let mut next = self.clone();
        let na = self.num_actions;
        for h in 0..self.horizon {
            let q_h = q.q_step(h);
            for s in 0..self.num_states {
                let row = mirror_descent_step(self.row(h, s), &q_h[s * na..(s + 1) * na], alpha)?;
                next.set_row(h, s, &row);
            }
        }
        Ok(next)
    }

    pub(crate) fn check_shape(&self, num_states: usize, num_actions: usize, horizon: usize) -> Result<()> {
        if self.num_states != num_states || self.num_actions != num_actions || self.horizon != horizon {
            return Err(Error::Dimension(format!(
                "policy shape ({}, {}, {}) does not match model ({num_states}, {num_actions}, {horizon})",
                self.num_states, self.num_actions, self.horizon
            )));
        }
        Ok(())
    }
}

pub(crate) fn check_distribution(row: &[f64]) -> std::result::Result<(), String> {
    if row.iter().any(|&p| !p.is_finite() || p < 0.0) {
        return Err("negative or non-finite mass".into());
    }
    let total: f64 = row.iter().sum();
    if (total - 1.0).abs() > SIMPLEX_TOL {
        return Err(format!("sums to {total}"));
    }
    Ok(())
}

/// Action-value and state-value tables; `v` has `horizon + 1` layers with
/// the last one identically zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTables {
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    q: Vec<f64>,
    v: Vec<f64>,
}

impl ValueTables {
    pub fn zeros(num_states: usize, num_actions: usize, horizon: usize) -> Self {
        Self {
            num_states,
            num_actions,
            horizon,
            q: vec![0.0; horizon * num_states * num_actions],
            v: vec![0.0; (horizon + 1) * num_states],
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn q(&self, h: usize, s: usize, a: usize) -> f64 {
        self.q[(h * self.num_states + s) * self.num_actions + a]
    }

    pub fn v(&self, h: usize, s: usize) -> f64 {
        self.v[h * self.num_states + s]
    }

    /// All Q layers, laid out as `[(h * S + s) * A + a]`.
    pub fn q_all(&self) -> &[f64] {
        &self.q
    }

    /// All V layers including the terminal one, laid out as `[h * S + s]`.
    pub fn v_all(&self) -> &[f64] {
        &self.v
    }

    /// Q_h laid out as `[s * A + a]`.
    pub fn q_step(&self, h: usize) -> &[f64] {
        let n = self.num_states * self.num_actions;
        &self.q[h * n..(h + 1) * n]
    }

    /// V_h over states; `h == horizon` gives the terminal zero layer.
    pub fn v_step(&self, h: usize) -> &[f64] {
        &self.v[h * self.num_states..(h + 1) * self.num_states]
    }

    pub(crate) fn q_step_mut(&mut self, h: usize) -> &mut [f64] {
        let n = self.num_states * self.num_actions;
        &mut self.q[h * n..(h + 1) * n]
    }

    pub(crate) fn v_step_mut(&mut self, h: usize) -> &mut [f64] {
        &mut self.v[h * self.num_states..(h + 1) * self.num_states]
    }

    /// Sets Q_h and derives V_h(s) = ⟨Q_h(s,·), π_h(·|s)⟩.
    pub(crate) fn set_step(&mut self, h: usize, q: &[f64], policy: &Policy) {
        self.q_step_mut(h).copy_from_slice(q);
        let na = self.num_actions;
        for s in 0..self.num_states {
            let value = dot(&q[s * na..(s + 1) * na], policy.row(h, s));
            self.v_step_mut(h)[s] = value;
        }
    }
}

/// One episode of H (state, action) pairs.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Trajectory {
    pub steps: Vec<(usize, usize)>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}
