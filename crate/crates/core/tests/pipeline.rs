use jrc_core::config::ScenarioConfig;
use jrc_core::eval::{run_trial, simulate_frame, targets_resolved, trial_seed};

fn config() -> ScenarioConfig {
    ScenarioConfig::default()
}

#[test]
fn noiseless_single_static_target_is_exact() {
    let mut c = config();
    c.targets.ranges_m = vec![90.0];
    c.targets.velocities_mps = vec![0.0];
    c.radar.refine_doppler = false;
    let s = c.scenario().unwrap();
    let t = run_trial(&s, f64::INFINITY, 5).unwrap();
    assert_eq!(t.bit_errors, 0);
    assert_eq!(t.ber, 0.0);
    assert!(t.mse_h <= 1e-12, "mse {}", t.mse_h);
    assert!(!t.detection_failure);
}

#[test]
fn default_scenario_resolves_three_targets_at_20db() {
    let s = config().scenario().unwrap();
    let run = simulate_frame(&s, 20.0, trial_seed(1, 0)).unwrap();
    assert_eq!(run.radar.estimates.len(), 3);
    assert!(targets_resolved(&s, &run.truth, &run.radar.estimates));
}

#[test]
fn no_targets_gives_no_detections() {
    let mut c = config();
    c.targets.ranges_m.clear();
    c.targets.velocities_mps.clear();
    let s = c.scenario().unwrap();
    let t = run_trial(&s, 20.0, 3).unwrap();
    assert!(t.detections.is_empty());
    assert!(t.detection_failure);
    assert_eq!(t.ber, 0.5);
}

#[test]
fn trial_is_reproducible() {
    let s = config().scenario().unwrap();
    let a = run_trial(&s, 10.0, 77).unwrap();
    let b = run_trial(&s, 10.0, 77).unwrap();
    assert_eq!(a, b);
}

#[test]
fn perfect_csi_never_worse_on_average() {
    let s = config().scenario().unwrap();
    let (mut e, mut p) = (0.0, 0.0);
    for i in 0..20 {
        let t = run_trial(&s, 6.0, trial_seed(4, i)).unwrap();
        e += t.ber;
        p += t.perfect_csi_ber;
    }
    assert!(p <= e, "perfect {p} estimated {e}");
}
