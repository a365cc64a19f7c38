//! Scenario-level behaviour of the harness library.

use leonav::config::ScenarioConfig;
use leonav::fixture::{self, FixtureParams};
use leonav::io::{self, RidgeRow};
use leonav::replay::{self, Reference, ReplayInputs};
use leonav::scenario::{self, PreparedScenario};
use leonav_core::fusion::FusionMode;
use leonav_core::tle::{parse_tle_file, ParseMode};

fn quick() -> ScenarioConfig {
    ScenarioConfig { duration_s: 10.0, n_leo: vec![5, 20, 40], n_runs: 12, ..ScenarioConfig::default() }
}

#[test]
fn adding_gps_never_hurts_and_every_rmse_has_a_bound() {
    let prep = PreparedScenario::prepare(&quick()).unwrap();
    let res = scenario::sweep(&prep, None).unwrap();
    for &n in &[5, 20, 40] {
        let alpha = res.point(FusionMode::LeoAlphaImu, n).unwrap();
        let hybrid = res.point(FusionMode::GpsLeoAlphaImu, n).unwrap();
        assert!(hybrid.rmse.aggregate.pos <= alpha.rmse.aggregate.pos, "n = {n}");
    }
    for p in &res.points {
        assert_eq!(p.bound.len(), p.rmse.per_epoch.len());
        assert!(p.bound_aggregate.pos > 0.0);
    }
    let dir = tempfile::tempdir().unwrap();
    scenario::write_sweep(&res, dir.path()).unwrap();
    let rmse = std::fs::read_to_string(dir.path().join("rmse.csv")).unwrap();
    // two statistics per (mode, count) cell
    assert_eq!(rmse.lines().count(), 1 + 2 * res.points.len());
}

#[test]
fn bound_shrinks_with_more_satellites() {
    let prep = PreparedScenario::prepare(&quick()).unwrap();
    for mode in [FusionMode::LeoAlphaImu, FusionMode::LeoOfdmImu] {
        let few = prep.bound(mode, 5).unwrap();
        let many = prep.bound(mode, 40).unwrap();
        for (a, b) in few.iter().zip(&many) {
            assert!(b.pos <= a.pos * (1.0 + 1e-9) && b.vel <= a.vel * (1.0 + 1e-9));
        }
    }
}

#[test]
fn replay_without_ridges_is_plain_gps_imu() {
    let dir = tempfile::tempdir().unwrap();
    let man = fixture::generate(&ScenarioConfig::default(), &FixtureParams::default(), dir.path()).unwrap();
    let mut cfg = ScenarioConfig::load(&man.config_path).unwrap();
    cfg.replay.survey = None;
    let cat = parse_tle_file(&std::fs::read_to_string(&man.tle_path).unwrap(), ParseMode::Strict).unwrap().catalog;
    let bare = ReplayInputs::load(&man.gps_path, &man.imu_path, &[], &cfg).unwrap();
    let res = replay::replay(&bare, &cat, &cfg).unwrap();
    assert_eq!(res.reference, Reference::GpsImu);
    let gps = res.mode(FusionMode::GpsImu).unwrap();
    assert_eq!(res.mode(FusionMode::GpsLeoAlphaImu).unwrap().states, gps.states);
    assert_eq!(res.reference_states, gps.states);
    assert!(res.alpha_measurements.is_empty());
}

#[test]
fn fixture_associations_match_their_satellites() {
    let dir = tempfile::tempdir().unwrap();
    let man = fixture::generate(&ScenarioConfig::default(), &FixtureParams::default(), dir.path()).unwrap();
    let cfg = ScenarioConfig::load(&man.config_path).unwrap();
    let inputs = ReplayInputs::load(&man.gps_path, &man.imu_path, &man.ridge_paths, &cfg).unwrap();
    let cat = parse_tle_file(&std::fs::read_to_string(&man.tle_path).unwrap(), ParseMode::Strict).unwrap().catalog;
    let res = replay::replay(&inputs, &cat, &cfg).unwrap();
    let ids: Vec<u32> = res.associations.iter().map(|(_, a)| a.sat_id).collect();
    assert_eq!(ids, man.ridge_sats);
    for ((_, a), truth) in res.associations.iter().zip(&man.ridge_alpha) {
        assert!(a.accepted);
        assert!((a.alpha_hat - truth).abs() < 3.5, "{} vs {truth}", a.alpha_hat);
    }
}

#[test]
fn unordered_ridge_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ridge.csv");
    io::write_rows(&path, &[RidgeRow { t_s: 1.0, f_hz: 10.0 }, RidgeRow { t_s: 0.5, f_hz: 11.0 }]).unwrap();
    let err = io::read_ridge(&path, 0.0).unwrap_err();
    assert_eq!(err.exit_code(), 3);
}
