use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{load_expert_instance, Instance, REFERENCE_SEED};
use crate::numerics::RewardDomain;
use crate::ogap::OgapConfig;
use crate::pgap::PgapConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Ogap,
    Pgap,
    Invariants,
    Sweep,
}

/// Either inline tabular dimensions or a path to an instance document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpSpec {
    pub states: Option<usize>,
    pub actions: Option<usize>,
    pub horizon: Option<usize>,
    pub seed: Option<u64>,
    pub file: Option<PathBuf>,
}

impl Default for MdpSpec {
    fn default() -> Self {
        Self {
            states: Some(4),
            actions: Some(3),
            horizon: Some(4),
            seed: Some(REFERENCE_SEED),
            file: None,
        }
    }
}

impl MdpSpec {
    pub fn build(&self) -> Result<Instance> {
        if let Some(path) = &self.file {
            return load_expert_instance(path);
        }
        let get = |v: Option<usize>, field: &str| {
            v.filter(|&x| x > 0).ok_or_else(|| Error::Config {
                field: format!("mdp.{field}"),
                message: "required positive integer when no file is given".into(),
            })
        };
        Instance::tabular(
            get(self.states, "states")?,
            get(self.actions, "actions")?,
            get(self.horizon, "horizon")?,
            self.seed.unwrap_or(REFERENCE_SEED),
        )
    }

    /// Short description recorded in manifests.
    pub fn reference(&self) -> String {
        match &self.file {
            Some(path) => format!("file:{}", path.display()),
            None => format!(
                "tabular:{}x{}x{}:seed={}",
                self.states.unwrap_or(0),
                self.actions.unwrap_or(0),
                self.horizon.unwrap_or(0),
                self.seed.unwrap_or(REFERENCE_SEED)
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BehaviorSpec {
    Expert,
    Uniform,
}

/// Hyperparameters shared by both learners; absent values take the
/// theoretical defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlgorithmSection {
    pub alpha: Option<f64>,
    pub eta: Option<f64>,
    pub lambda: f64,
    pub kappa_scale: f64,
    pub xi: f64,
    pub reward_domain: RewardDomain,
}

impl Default for AlgorithmSection {
    fn default() -> Self {
        Self {
            alpha: None,
            eta: None,
            lambda: 1.0,
            kappa_scale: 1.0,
            xi: 0.1,
            reward_domain: RewardDomain::Ball,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    #[serde(default)]
    pub mdp: MdpSpec,
    /// Episode (OGAP) or iteration (PGAP) counts.
    #[serde(default = "default_k_grid")]
    pub k_grid: Vec<usize>,
    #[serde(default = "default_n1")]
    pub n1: usize,
    /// Additional-data sizes (PGAP).
    #[serde(default)]
    pub n2: Vec<usize>,
    #[serde(default = "default_behavior")]
    pub behavior: BehaviorSpec,
    #[serde(default)]
    pub algorithm: AlgorithmSection,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub diagnostics: bool,
    /// Suites to run in invariants mode; all when empty.
    #[serde(default)]
    pub suites: Vec<String>,
}

fn default_k_grid() -> Vec<usize> {
    vec![1000]
}

fn default_n1() -> usize {
    1000
}

fn default_behavior() -> BehaviorSpec {
    BehaviorSpec::Expert
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_output() -> PathBuf {
    PathBuf::from("runs")
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub diagnostics: bool,
}

impl ExperimentConfig {
    /// Parses a TOML document; errors carry the offending key path.
    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::Config {
            field: "<document>".into(),
            message: e.message().to_string(),
        })?;
        let config: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::Config {
                field: if path == "." { "<document>".into() } else { path },
                message: e.into_inner().message().to_string(),
            }
        })?;
        Ok(config)
    }

    pub fn apply(&mut self, overrides: &Overrides) {
        if let Some(seed) = overrides.seed {
            self.seeds = vec![seed];
        }
        if let Some(out) = &overrides.output {
            self.output = out.clone();
        }
        if overrides.diagnostics {
            self.diagnostics = true;
        }
    }

    pub fn validate(&self) -> Result<()> {
        let field_error = |field: &str, message: &str| Error::Config {
            field: field.into(),
            message: message.into(),
        };
        if self.k_grid.is_empty() || self.k_grid.contains(&0) {
            return Err(field_error("k_grid", "must be a nonempty list of positive counts"));
        }
        if self.seeds.is_empty() {
            return Err(field_error("seeds", "must not be empty"));
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return Err(field_error("seeds", "must be distinct"));
        }
        if self.n1 == 0 && self.mode != Mode::Invariants {
            return Err(field_error("n1", "must be positive"));
        }
        if self.mode == Mode::Pgap && (self.n2.is_empty() || self.n2.contains(&0)) {
            return Err(field_error("n2", "pgap mode needs a nonempty list of positive sizes"));
        }
        if let Some(path) = &self.mdp.file {
            if !path.exists() {
                return Err(field_error("mdp.file", &format!("{} does not exist", path.display())));
            }
        }
        for name in &self.suites {
            if !crate::suites::SUITES.iter().any(|s| s.name == name) {
                return Err(field_error("suites", &format!("unknown suite `{name}`")));
            }
        }
        Ok(())
    }

    pub fn ogap_config(&self, episodes: usize, seed: u64) -> OgapConfig {
        let a = &self.algorithm;
        OgapConfig {
            episodes,
            alpha: a.alpha,
            eta: a.eta,
            lambda: a.lambda,
            kappa_scale: a.kappa_scale,
            xi: a.xi,
            seed,
            reward_domain: a.reward_domain,
            diagnostics: self.diagnostics,
        }
    }

    pub fn pgap_config(&self, iterations: usize, seed: u64) -> PgapConfig {
        let a = &self.algorithm;
        PgapConfig {
            iterations,
            alpha: a.alpha,
            eta: a.eta,
            lambda: a.lambda,
            kappa_scale: a.kappa_scale,
            xi: a.xi,
            seed,
            reward_domain: a.reward_domain,
            diagnostics: self.diagnostics,
        }
    }
}

/// Reads, overrides and validates a config file. A relative instance path
/// is taken relative to the config file.
pub fn parse_config(path: &Path, overrides: &Overrides) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut config = ExperimentConfig::from_toml(&text)?;
    if let (Some(file), Some(dir)) = (&config.mdp.file, path.parent()) {
        if file.is_relative() {
            config.mdp.file = Some(dir.join(file));
        }
    }
    config.apply(overrides);
    config.validate()?;
    Ok(config)
}
