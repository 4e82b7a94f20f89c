//! JSON instance documents: dimensions, φ (dense or the "tabular" tag), θ,
//! ψ, μ, R, x, H.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::generate::{check_regularity, Instance};
use crate::mdp::model::{LinearKernelMdp, RewardFeatures, RewardModel, TransitionFeatures};

const TABULAR_TAG: &str = "tabular";
const REGULARITY_SAMPLES: usize = 32;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TransitionFeatureSpec {
    Tag(String),
    /// Indexed `[s][a][s'][i]`.
    Dense(Vec<Vec<Vec<Vec<f64>>>>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RewardFeatureSpec {
    Tag(String),
    /// Indexed `[s][a][i]`.
    Dense(Vec<Vec<Vec<f64>>>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDocument {
    pub num_states: usize,
    pub num_actions: usize,
    pub horizon: usize,
    pub init_state: usize,
    pub regularity: f64,
    pub phi: TransitionFeatureSpec,
    pub theta: Vec<Vec<f64>>,
    pub psi: RewardFeatureSpec,
    pub mu: Vec<Vec<f64>>,
}

impl InstanceDocument {
    pub fn from_models(mdp: &LinearKernelMdp, reward: &RewardModel) -> Self {
        let (ns, na) = (mdp.num_states(), mdp.num_actions());
        let phi = if mdp.features().is_tabular() {
            TransitionFeatureSpec::Tag(TABULAR_TAG.into())
        } else {
            TransitionFeatureSpec::Dense(
                (0..ns)
                    .map(|s| {
                        (0..na)
                            .map(|a| (0..ns).map(|t| mdp.features().get(s, a, t).to_vec()).collect())
                            .collect()
                    })
                    .collect(),
            )
        };
        let psi = if reward.features().is_tabular() {
            RewardFeatureSpec::Tag(TABULAR_TAG.into())
        } else {
            RewardFeatureSpec::Dense(
                (0..ns)
                    .map(|s| (0..na).map(|a| reward.features().get(s, a).to_vec()).collect())
                    .collect(),
            )
        };
        Self {
            num_states: ns,
            num_actions: na,
            horizon: mdp.horizon(),
            init_state: mdp.init_state(),
            regularity: mdp.regularity(),
            phi,
            theta: (0..mdp.horizon()).map(|h| mdp.theta(h).to_vec()).collect(),
            psi,
            mu: reward.mu().to_vec(),
        }
    }

    /// Builds and validates every model invariant.
    pub fn into_models(self) -> Result<(LinearKernelMdp, RewardModel)> {
        let (ns, na) = (self.num_states, self.num_actions);
        if self.theta.len() != self.horizon || self.mu.len() != self.horizon {
            return Err(Error::Dimension(format!(
                "horizon {} but {} θ and {} μ entries",
                self.horizon,
                self.theta.len(),
                self.mu.len()
            )));
        }
        let phi = match self.phi {
            TransitionFeatureSpec::Tag(tag) if tag == TABULAR_TAG => TransitionFeatures::tabular(ns, na),
            TransitionFeatureSpec::Tag(tag) => {
                return Err(Error::InvalidModel(format!("unknown feature tag `{tag}`")))
            }
            TransitionFeatureSpec::Dense(rows) => {
                let dim = rows
                    .first()
                    .and_then(|r| r.first())
                    .and_then(|r| r.first())
                    .map(Vec::len)
                    .unwrap_or(0);
                let mut data = Vec::new();
                check_len(rows.len(), ns, "φ states")?;
                for by_action in rows {
                    check_len(by_action.len(), na, "φ actions")?;
                    for by_next in by_action {
                        check_len(by_next.len(), ns, "φ next states")?;
                        for v in by_next {
                            check_len(v.len(), dim, "φ dimension")?;
                            data.extend(v);
                        }
                    }
                }
                TransitionFeatures::new(ns, na, dim, data)?
            }
        };
        check_regularity(&phi, self.regularity, REGULARITY_SAMPLES, 0)?;
        let psi = match self.psi {
            RewardFeatureSpec::Tag(tag) if tag == TABULAR_TAG => RewardFeatures::tabular(ns, na),
            RewardFeatureSpec::Tag(tag) => {
                return Err(Error::InvalidModel(format!("unknown feature tag `{tag}`")))
            }
            RewardFeatureSpec::Dense(rows) => {
                let dim = rows
                    .first()
                    .and_then(|r| r.first())
                    .map(Vec::len)
                    .unwrap_or(0);
                let mut data = Vec::new();
                check_len(rows.len(), ns, "ψ states")?;
                for by_action in rows {
                    check_len(by_action.len(), na, "ψ actions")?;
                    for v in by_action {
                        check_len(v.len(), dim, "ψ dimension")?;
                        data.extend(v);
                    }
                }
                RewardFeatures::new(ns, na, dim, data)?
            }
        };
        let mdp = LinearKernelMdp::new(phi, self.theta, self.init_state, self.regularity)?;
        let reward = RewardModel::new(Arc::new(psi), self.mu)?;
        Ok((mdp, reward))
    }
}

fn check_len(got: usize, expected: usize, what: &str) -> Result<()> {
    if got != expected {
        return Err(Error::Dimension(format!("{what}: got {got}, expected {expected}")));
    }
    Ok(())
}

pub fn save_instance(path: &Path, mdp: &LinearKernelMdp, reward: &RewardModel) -> Result<()> {
    let doc = InstanceDocument::from_models(mdp, reward);
    let text = serde_json::to_string_pretty(&doc).map_err(|e| Error::format(path, e.to_string()))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_instance(path: &Path) -> Result<(LinearKernelMdp, RewardModel)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: InstanceDocument = serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
    doc.into_models()
}

/// Loads an instance file; the stored μ is the hidden reward the expert optimizes.
pub fn load_expert_instance(path: &Path) -> Result<Instance> {
    let (mdp, reward) = load_instance(path)?;
    Instance::from_parts(mdp, reward)
}
