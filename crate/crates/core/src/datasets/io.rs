use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AdditionalSet, DemoSet, Transition};
use crate::error::{Error, Result};
use crate::mdp::{LinearKernelMdp, Trajectory};

pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Dataset {
    Demos(DemoSet),
    Additional(AdditionalSet),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Kind {
    Demos,
    Additional,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    version: u32,
    kind: Kind,
    #[serde(rename = "H")]
    horizon: usize,
    #[serde(rename = "N")]
    count: usize,
    seed: u64,
    behavior_spec: String,
    #[serde(flatten)]
    unknown: BTreeMap<String, serde_json::Value>,
}

/// Writes a header line followed by one trajectory per line.
pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    let (kind, horizon, count, seed, spec) = match dataset {
        Dataset::Demos(d) => (Kind::Demos, d.horizon, d.len(), d.seed, d.source_policy_id.clone()),
        Dataset::Additional(d) => (Kind::Additional, d.horizon, d.len(), d.seed, d.behavior_spec.clone()),
    };
    let header = Header {
        version: DATASET_VERSION,
        kind,
        horizon,
        count,
        seed,
        behavior_spec: spec,
        unknown: BTreeMap::new(),
    };
    let mut out = serde_json::to_string(&header).map_err(|e| Error::format(path, e.to_string()))?;
    out.push('\n');
    match dataset {
        Dataset::Demos(d) => {
            for t in &d.trajectories {
                let pairs: Vec<[usize; 2]> = t.steps.iter().map(|&(s, a)| [s, a]).collect();
                writeln!(out, "{}", serde_json::to_string(&pairs).expect("serializable")).expect("string write");
            }
        }
        Dataset::Additional(d) => {
            for t in &d.trajectories {
                let triples: Vec<[usize; 3]> = t.iter().map(|&(s, a, n)| [s, a, n]).collect();
                writeln!(out, "{}", serde_json::to_string(&triples).expect("serializable")).expect("string write");
            }
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads and validates a dataset file. When `mdp` is given, horizons and
/// state/action indices are checked against it.
pub fn load_dataset(path: &Path, mdp: Option<&LinearKernelMdp>) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header_line = lines.next().ok_or_else(|| Error::format(path, "empty file"))?;
    let header: Header =
        serde_json::from_str(header_line).map_err(|e| Error::format(path, format!("header: {e}")))?;
    if header.version > DATASET_VERSION {
        log::warn!("{}: dataset version {} is newer than {DATASET_VERSION}", path.display(), header.version);
    }
    for key in header.unknown.keys() {
        log::warn!("{}: ignoring unknown header field `{key}`", path.display());
    }
    if let Some(mdp) = mdp {
        if mdp.horizon() != header.horizon {
            return Err(Error::Dimension(format!(
                "{}: dataset horizon {} does not match model horizon {}",
                path.display(),
                header.horizon,
                mdp.horizon()
            )));
        }
    }
    let bounds = mdp.map(|m| (m.num_states(), m.num_actions()));
    let body: Vec<&str> = lines.filter(|l| !l.trim().is_empty()).collect();
    if body.len() != header.count {
        return Err(Error::format(
            path,
            format!("header announces {} trajectories, found {}", header.count, body.len()),
        ));
    }
    let check = |s: usize, a: usize, line: usize| -> Result<()> {
        if let Some((ns, na)) = bounds {
            if s >= ns || a >= na {
                return Err(Error::Dimension(format!(
                    "{}: line {line}: index ({s}, {a}) out of range",
                    path.display()
                )));
            }
        }
        Ok(())
    };
    match header.kind {
        Kind::Demos => {
            let mut trajectories = Vec::with_capacity(body.len());
            for (i, line) in body.iter().enumerate() {
                let pairs: Vec<[usize; 2]> =
                    serde_json::from_str(line).map_err(|e| Error::format(path, format!("line {}: {e}", i + 2)))?;
                if pairs.len() != header.horizon {
                    return Err(Error::format(path, format!("line {}: trajectory length {}", i + 2, pairs.len())));
                }
                for &[s, a] in &pairs {
                    check(s, a, i + 2)?;
                }
                trajectories.push(Trajectory {
                    steps: pairs.into_iter().map(|[s, a]| (s, a)).collect(),
                });
            }
            if trajectories.is_empty() {
                return Err(Error::format(path, "demonstration set is empty"));
            }
            Ok(Dataset::Demos(DemoSet {
                horizon: header.horizon,
                trajectories,
                source_policy_id: header.behavior_spec,
                seed: header.seed,
            }))
        }
        Kind::Additional => {
            let mut trajectories = Vec::with_capacity(body.len());
            for (i, line) in body.iter().enumerate() {
                let triples: Vec<[usize; 3]> =
                    serde_json::from_str(line).map_err(|e| Error::format(path, format!("line {}: {e}", i + 2)))?;
                if triples.len() != header.horizon {
                    return Err(Error::format(path, format!("line {}: trajectory length {}", i + 2, triples.len())));
                }
                for &[s, a, n] in &triples {
                    check(s, a, i + 2)?;
                    check(n, 0, i + 2)?;
                }
                trajectories.push(triples.into_iter().map(|[s, a, n]| (s, a, n)).collect::<Vec<Transition>>());
            }
            Ok(Dataset::Additional(AdditionalSet {
                horizon: header.horizon,
                trajectories,
                behavior_spec: header.behavior_spec,
                seed: header.seed,
            }))
        }
    }
}

pub fn load_demos(path: &Path, mdp: Option<&LinearKernelMdp>) -> Result<DemoSet> {
    match load_dataset(path, mdp)? {
        Dataset::Demos(d) => Ok(d),
        Dataset::Additional(_) => Err(Error::format(path, "expected a demonstration set")),
    }
}

pub fn load_additional(path: &Path, mdp: Option<&LinearKernelMdp>) -> Result<AdditionalSet> {
    match load_dataset(path, mdp)? {
        Dataset::Additional(d) => Ok(d),
        Dataset::Demos(_) => Err(Error::format(path, "expected an additional dataset")),
    }
}
