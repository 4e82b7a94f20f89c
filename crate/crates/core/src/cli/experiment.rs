use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{BehaviorSpec, ExperimentConfig, Mode};
use super::plot::{render_plot, write_series, Series};
use crate::datasets::{generate_additional, generate_demos, AdditionalSet, Behavior, DemoSet};
use crate::error::{Error, Result};
use crate::eval::{audit_run, intrinsic_uncertainty, optimality_gap, slope_fit, worst_case_regret};
use crate::mdp::Instance;
use crate::ogap::run_ogap;
use crate::pgap::run_pgap;
use crate::rng::derive_seed;
use crate::suites::{run_suites, Outcome};

/// Environment variable bounding the worker pool.
pub const THREADS_ENV: &str = "GAIL_LIN_THREADS";

const DEMO_STREAM: u64 = 1;
const DATA_STREAM: u64 = 2;

#[derive(Debug, Clone, Default)]
pub struct ExperimentSummary {
    pub runs: usize,
    pub outcomes: Vec<Outcome>,
}

impl ExperimentSummary {
    pub fn invariant_failures(&self) -> usize {
        self.outcomes.iter().filter(|o| !o.passed).count()
    }
}

fn pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(value) = std::env::var(THREADS_ENV) {
        let threads: usize = value.parse().map_err(|_| Error::Config {
            field: THREADS_ENV.into(),
            message: format!("expected a positive integer, got `{value}`"),
        })?;
        builder = builder.num_threads(threads.max(1));
    }
    builder.build().map_err(|e| Error::Config {
        field: THREADS_ENV.into(),
        message: e.to_string(),
    })
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn demos_for(instance: &Instance, n1: usize, seed: u64) -> DemoSet {
    generate_demos(&instance.mdp, &instance.expert, n1, derive_seed(seed, DEMO_STREAM), "expert")
}

fn additional_for(instance: &Instance, behavior: BehaviorSpec, n2: usize, seed: u64) -> AdditionalSet {
    let behavior = match behavior {
        BehaviorSpec::Expert => Behavior::Policy {
            policy: &instance.expert,
            id: "expert".into(),
        },
        BehaviorSpec::Uniform => Behavior::Uniform,
    };
    generate_additional(&instance.mdp, behavior, n2, derive_seed(seed, DATA_STREAM))
}

/// Executes the configured mode and writes its artifact tree under
/// `config.output`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentSummary> {
    config.validate()?;
    let out = &config.output;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let pool = pool()?;
    let summary = match config.mode {
        Mode::Ogap | Mode::Sweep => pool.install(|| run_online(config))?,
        Mode::Pgap => pool.install(|| run_offline(config))?,
        Mode::Invariants => pool.install(|| run_invariants(config))?,
    };
    write_json(
        &out.join("manifest.json"),
        &serde_json::json!({
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "config": config,
            "mdp": config.mdp.reference(),
            "runs": summary.runs,
        }),
    )?;
    Ok(summary)
}

#[derive(Debug, Serialize)]
struct OnlineRun {
    episodes: usize,
    seed: u64,
    regret: f64,
    final_gap: f64,
    elliptical_holds: bool,
    dir: String,
}

fn run_online(config: &ExperimentConfig) -> Result<ExperimentSummary> {
    let instance = config.mdp.build()?;
    let psi = &instance.reward_features;
    let demos: Vec<DemoSet> = config.seeds.iter().map(|&s| demos_for(&instance, config.n1, s)).collect();
    let jobs: Vec<(usize, usize)> = config
        .k_grid
        .iter()
        .flat_map(|&k| (0..config.seeds.len()).map(move |i| (k, i)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(k, i)| {
            let seed = config.seeds[i];
            let log = run_ogap(&instance.mdp, psi, &demos[i], &config.ogap_config(k, seed))?;
            let dir_name = format!("K{k}_seed{seed}");
            let dir = config.output.join(&dir_name);
            log.write_dir(&dir, &config.mdp.reference(), config.diagnostics)?;
            let report = worst_case_regret(&instance.mdp, &instance.expert, &log.policies(), psi)?;
            let path = dir.join("regret.csv");
            std::fs::write(&path, report.to_csv()).map_err(|e| Error::io(&path, e))?;
            let elliptical_holds = audit_run(&log)?.iter().all(|a| a.holds());
            let run = OnlineRun {
                episodes: k,
                seed,
                regret: report.total(),
                final_gap: report.per_episode.last().copied().unwrap_or(0.0),
                elliptical_holds,
                dir: dir_name,
            };
            Ok((run, report.cumulative))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut series: Series = Vec::new();
    let mut medians = Vec::new();
    if config.mode == Mode::Sweep {
        let mut points = Vec::new();
        for &k in &config.k_grid {
            let mut values: Vec<f64> = results.iter().filter(|(r, _)| r.episodes == k).map(|(r, _)| r.regret).collect();
            let m = median(&mut values);
            medians.push(serde_json::json!({ "episodes": k, "median_regret": m }));
            points.push((k as f64, m));
        }
        series.push(("median".into(), points));
        for &seed in &config.seeds {
            let pts = results
                .iter()
                .filter(|(r, _)| r.seed == seed)
                .map(|(r, _)| (r.episodes as f64, r.regret))
                .collect();
            series.push((format!("seed_{seed}"), pts));
        }
    } else {
        for (run, cumulative) in &results {
            let pts = cumulative.iter().enumerate().map(|(k, &r)| ((k + 1) as f64, r)).collect();
            series.push((format!("K{}_seed{}", run.episodes, run.seed), pts));
        }
    }
    let slope = if config.k_grid.len() >= 2 {
        let xs: Vec<f64> = config.k_grid.iter().map(|&k| k as f64).collect();
        let ys: Vec<f64> = medians.iter().map(|m| m["median_regret"].as_f64().unwrap_or(0.0)).collect();
        if config.mode == Mode::Sweep {
            slope_fit(&xs, &ys).ok()
        } else {
            None
        }
    } else {
        None
    };
    let runs: Vec<&OnlineRun> = results.iter().map(|(r, _)| r).collect();
    write_json(
        &config.output.join("report.json"),
        &serde_json::json!({ "mode": config.mode, "runs": runs, "medians": medians, "slope": slope }),
    )?;
    let csv = config.output.join("regret_curve.csv");
    write_series(&csv, &series)?;
    render_plot(&csv, &config.output.join("regret_curve.svg"))?;
    Ok(ExperimentSummary {
        runs: results.len(),
        outcomes: Vec::new(),
    })
}

#[derive(Debug, Serialize)]
struct OfflineRun {
    n2: usize,
    iterations: usize,
    seed: u64,
    gap: f64,
    intrinsic_uncertainty: f64,
    theta1_violations: usize,
    dir: String,
}

fn run_offline(config: &ExperimentConfig) -> Result<ExperimentSummary> {
    let instance = config.mdp.build()?;
    let psi = &instance.reward_features;
    let n2_max = config.n2.iter().copied().max().unwrap_or(0);
    let inputs: Vec<(DemoSet, AdditionalSet)> = config
        .seeds
        .iter()
        .map(|&s| (demos_for(&instance, config.n1, s), additional_for(&instance, config.behavior, n2_max, s)))
        .collect();
    let mut jobs = Vec::new();
    for &n2 in &config.n2 {
        for &k in &config.k_grid {
            for i in 0..config.seeds.len() {
                jobs.push((n2, k, i));
            }
        }
    }
    let results = jobs
        .par_iter()
        .map(|&(n2, k, i)| {
            let seed = config.seeds[i];
            let (demos, data) = &inputs[i];
            let data = data.prefix(n2);
            let (mixed, log) = run_pgap(&instance.mdp, psi, demos, &data, &config.pgap_config(k, seed))?;
            let dir_name = format!("N2_{n2}_K{k}_seed{seed}");
            log.write_dir(&config.output.join(&dir_name), &config.mdp.reference(), config.diagnostics)?;
            let kernel = log.kernel.as_ref().expect("offline runs carry a kernel estimate");
            let gap = optimality_gap(&instance.mdp, &instance.expert, &mixed, psi)?;
            Ok(OfflineRun {
                n2,
                iterations: k,
                seed,
                gap: gap.gap,
                intrinsic_uncertainty: intrinsic_uncertainty(&instance.mdp, &instance.expert, &kernel.gamma)?,
                theta1_violations: kernel.feasibility.violations(),
                dir: dir_name,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut series: Series = Vec::new();
    let mut medians = Vec::new();
    for &k in &config.k_grid {
        let mut gap_pts = Vec::new();
        let mut iu_pts = Vec::new();
        for &n2 in &config.n2 {
            let pick = |f: fn(&OfflineRun) -> f64| {
                let mut v: Vec<f64> = results.iter().filter(|r| r.n2 == n2 && r.iterations == k).map(f).collect();
                median(&mut v)
            };
            let (g, iu) = (pick(|r| r.gap), pick(|r| r.intrinsic_uncertainty));
            medians.push(serde_json::json!({ "n2": n2, "iterations": k, "median_gap": g, "median_intrinsic_uncertainty": iu }));
            gap_pts.push((n2 as f64, g));
            iu_pts.push((n2 as f64, iu));
        }
        series.push((format!("gap_K{k}"), gap_pts));
        series.push((format!("int_uncert_K{k}"), iu_pts));
    }
    write_json(
        &config.output.join("report.json"),
        &serde_json::json!({ "mode": config.mode, "runs": results, "medians": medians }),
    )?;
    let csv = config.output.join("gap_curve.csv");
    write_series(&csv, &series)?;
    render_plot(&csv, &config.output.join("gap_curve.svg"))?;
    Ok(ExperimentSummary {
        runs: results.len(),
        outcomes: Vec::new(),
    })
}

fn run_invariants(config: &ExperimentConfig) -> Result<ExperimentSummary> {
    let names: Vec<&str> = config.suites.iter().map(String::as_str).collect();
    let outcomes = run_suites(&names)?;
    let mut csv = String::from("criterion,suite,passed,detail\n");
    for o in &outcomes {
        csv.push_str(&format!("{},{},{},\"{}\"\n", o.criterion, o.name, o.passed, o.detail.replace('"', "'")));
    }
    let path = config.output.join("invariants.csv");
    std::fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
    write_json(
        &config.output.join("report.json"),
        &serde_json::json!({ "mode": config.mode, "suites": outcomes }),
    )?;
    Ok(ExperimentSummary { runs: 0, outcomes })
}
