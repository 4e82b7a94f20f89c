//! Per-run records shared by the online and offline learners, and their
//! on-disk layout.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::datasets::Transition;
use crate::error::{Error, Result};
use crate::mdp::{Policy, ValueTables};
use crate::numerics::norm2;
use crate::pgap::EstimatedKernel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Ogap,
    Pgap,
}

/// Everything recorded for one episode (OGAP) or iteration (PGAP).
#[derive(Debug, Clone)]
pub struct EpisodeRecord {
    /// The iterate π^k used in this episode.
    pub policy: Policy,
    /// The reward parameter μ^k the episode was evaluated under.
    pub mu: Vec<Vec<f64>>,
    /// Estimated Q̂^k and V̂^k.
    pub values: ValueTables,
    /// Per-episode bonus Γ_h^k laid out as `[s * A + a]`; PGAP keeps its
    /// fixed quantifier in the kernel estimate instead.
    pub gamma: Option<Vec<Vec<f64>>>,
    /// Rollout transitions; empty offline.
    pub transitions: Vec<Transition>,
    /// Prediction error against the true kernel, when diagnostics are on.
    pub iota: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone)]
pub struct RunLog {
    pub algorithm: Algorithm,
    pub seed: u64,
    /// Resolved hyperparameters.
    pub params: serde_json::Value,
    pub episodes: Vec<EpisodeRecord>,
    /// Ridge regressors φ̄_h^k(s_h^k, a_h^k) in the order they entered Λ_h.
    pub regressors: Vec<Vec<Vec<f64>>>,
    pub lambda: f64,
    /// Offline kernel estimate (PGAP only).
    pub kernel: Option<EstimatedKernel>,
}

impl RunLog {
    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn policies(&self) -> Vec<Policy> {
        self.episodes.iter().map(|e| e.policy.clone()).collect()
    }

    /// Writes manifest.json, episodes.csv and, with `diagnostics`, raw
    /// little-endian f64 dumps of every per-episode table.
    pub fn write_dir(&self, dir: &Path, mdp_reference: &str, diagnostics: bool) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut files = vec!["episodes.csv".to_string()];
        if diagnostics {
            for (name, data) in self.dumps() {
                let path = dir.join(&name);
                let bytes: Vec<u8> = data.iter().flat_map(|x| x.to_le_bytes()).collect();
                std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
                files.push(name);
            }
        }
        if let Some(kernel) = &self.kernel {
            let path = dir.join("kernel_estimate.json");
            let text = serde_json::to_string_pretty(&kernel.summary()).expect("serializable");
            std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
            files.push("kernel_estimate.json".into());
        }
        let path = dir.join("episodes.csv");
        std::fs::write(&path, self.episodes_csv()).map_err(|e| Error::io(&path, e))?;

        let manifest = serde_json::json!({
            "algorithm": self.algorithm,
            "seed": self.seed,
            "params": self.params,
            "mdp": mdp_reference,
            "episodes": self.episodes.len(),
            "files": files,
            "dump_layout": if diagnostics {
                "f64 little-endian; policy/qhat [k][h][s][a], vhat [k][h][s] with h up to H, gamma/iota [k][h][s][a]"
            } else {
                "none"
            },
        });
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).expect("serializable");
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
    }

    /// One row per (k, h): the visited pair (online), ‖μ_h‖, max Q̂_h,
    /// mean Γ_h and the range of ι_h.
    pub fn episodes_csv(&self) -> String {
        let mut out = String::from("k,h,state,action,mu_norm,qhat_max,gamma_mean,iota_min,iota_max\n");
        for (k, ep) in self.episodes.iter().enumerate() {
            for h in 0..ep.mu.len() {
                let (state, action) = match ep.transitions.get(h) {
                    Some(&(s, a, _)) => (s.to_string(), a.to_string()),
                    None => (String::new(), String::new()),
                };
                let qmax = ep.values.q_step(h).iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let gamma_mean = ep
                    .gamma
                    .as_ref()
                    .map(|g| (g[h].iter().sum::<f64>() / g[h].len() as f64).to_string())
                    .unwrap_or_default();
                let (imin, imax) = match &ep.iota {
                    Some(iota) => {
                        let lo = iota[h].iter().copied().fold(f64::INFINITY, f64::min);
                        let hi = iota[h].iter().copied().fold(f64::NEG_INFINITY, f64::max);
                        (lo.to_string(), hi.to_string())
                    }
                    None => (String::new(), String::new()),
                };
                writeln!(
                    out,
                    "{},{h},{state},{action},{},{qmax},{gamma_mean},{imin},{imax}",
                    k + 1,
                    norm2(&ep.mu[h])
                )
                .expect("string write");
            }
        }
        out
    }

    fn dumps(&self) -> Vec<(String, Vec<f64>)> {
        let flat = |f: &dyn Fn(&EpisodeRecord) -> Vec<f64>| -> Vec<f64> { self.episodes.iter().flat_map(f).collect() };
        let mut out = vec![
            ("policy.bin".to_string(), flat(&|e| e.policy.as_slice().to_vec())),
            ("qhat.bin".to_string(), flat(&|e| e.values.q_all().to_vec())),
            ("vhat.bin".to_string(), flat(&|e| e.values.v_all().to_vec())),
            ("mu.bin".to_string(), flat(&|e| e.mu.concat())),
        ];
        if self.episodes.iter().all(|e| e.gamma.is_some()) && !self.episodes.is_empty() {
            out.push(("gamma.bin".into(), flat(&|e| e.gamma.as_ref().map(|g| g.concat()).unwrap_or_default())));
        }
        if self.episodes.iter().all(|e| e.iota.is_some()) && !self.episodes.is_empty() {
            out.push(("iota.bin".into(), flat(&|e| e.iota.as_ref().map(|g| g.concat()).unwrap_or_default())));
        }
        out
    }
}
