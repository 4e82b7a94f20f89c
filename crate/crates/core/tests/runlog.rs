use gail_lin::datasets::generate_demos;
use gail_lin::mdp::Instance;
use gail_lin::ogap::{run_ogap, OgapConfig};

fn small_run(diagnostics: bool) -> (Instance, gail_lin::runlog::RunLog) {
    let inst = Instance::tabular(3, 2, 3, 11).unwrap();
    let demos = generate_demos(&inst.mdp, &inst.expert, 40, 5, "expert");
    let config = OgapConfig {
        episodes: 7,
        seed: 5,
        kappa_scale: 2.0,
        diagnostics,
        ..OgapConfig::default()
    };
    let log = run_ogap(&inst.mdp, &inst.reward_features, &demos, &config).unwrap();
    (inst, log)
}

#[test]
fn episodes_csv_has_one_row_per_step() {
    let (_, log) = small_run(true);
    let csv = log.episodes_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "k,h,state,action,mu_norm,qhat_max,gamma_mean,iota_min,iota_max");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 7 * 3);
    for row in &rows {
        assert_eq!(row.len(), 9);
        assert!(row.iter().all(|c| !c.is_empty()), "{row:?}");
        let (lo, hi): (f64, f64) = (row[7].parse().unwrap(), row[8].parse().unwrap());
        assert!(lo <= hi && hi <= 1e-8);
    }
}

#[test]
fn dumps_have_expected_sizes() {
    let (inst, log) = small_run(true);
    let dir = tempfile::tempdir().unwrap();
    log.write_dir(dir.path(), "tabular", true).unwrap();
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["algorithm"], "ogap");
    assert_eq!(manifest["episodes"], 7);
    let (k, h, s, a) = (7, inst.mdp.horizon(), inst.mdp.num_states(), inst.mdp.num_actions());
    for name in manifest["files"].as_array().unwrap() {
        let name = name.as_str().unwrap();
        let len = std::fs::metadata(dir.path().join(name)).unwrap().len() as usize;
        if name.ends_with(".bin") {
            let expected = if name.starts_with("vhat") { k * (h + 1) * s } else { k * h * s * a };
            assert_eq!(len, 8 * expected, "{name}");
        }
    }
    assert!(!dir.path().join("kernel_estimate.json").exists());
}

#[test]
fn no_dumps_without_diagnostics() {
    let (_, log) = small_run(false);
    let dir = tempfile::tempdir().unwrap();
    log.write_dir(dir.path(), "tabular", false).unwrap();
    let names: Vec<String> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    assert!(names.iter().all(|n| !n.ends_with(".bin")), "{names:?}");
    assert!(log.episodes_csv().lines().nth(1).unwrap().ends_with(",,"));
}

#[test]
fn identical_seeds_give_identical_logs() {
    let (_, a) = small_run(true);
    let (_, b) = small_run(true);
    assert_eq!(a.episodes_csv(), b.episodes_csv());
}
