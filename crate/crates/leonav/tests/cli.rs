//! Command-line behaviour: outputs, exit codes and determinism.

use std::path::Path;
use std::process::{Command, Output};

fn leonav(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_leonav")).arg("--out").arg(out).args(args).output().expect("binary runs")
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("small.json");
    std::fs::write(&path, r#"{"schema_version": 1, "duration_s": 4.0, "n_leo": [5, 8], "n_runs": 3}"#).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"schema_version": 1, "duration_s": -1}"#).unwrap();
    let out = leonav(&["--config", bad.to_str().unwrap(), "sweep"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    std::fs::write(&bad, r#"{"schema_version": 1, "no_such_field": 3}"#).unwrap();
    assert_eq!(leonav(&["--config", bad.to_str().unwrap(), "pcrb"], dir.path()).status.code(), Some(2));
    assert_eq!(leonav(&["--config", "/does/not/exist.json", "pcrb"], dir.path()).status.code(), Some(2));
}

#[test]
fn data_errors_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let tle = dir.path().join("broken.tle");
    std::fs::write(&tle, "1 25544U 98067A   08264.51782528 -.00002182  00000-0 -11606-4 0  2927\n2 25544  51.6416 247.4627 0006703 130.5360 325.0288 15.72125391563538\n").unwrap();
    let out = leonav(&["catalog", "validate", tle.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let out = leonav(&["replay", "--gps", "/missing/gps.csv", "--imu", "/missing/imu.csv"], dir.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn synthetic_catalog_validates() {
    let dir = tempfile::tempdir().unwrap();
    assert!(leonav(&["catalog", "synth"], dir.path()).status.success());
    let out = leonav(&["catalog", "validate", dir.path().join("catalog.tle").to_str().unwrap()], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("skipped,0"), "{text}");
    assert!(text.lines().any(|l| l.starts_with("navstar,") && l != "navstar,0"));
}

#[test]
fn visibility_reports_enough_satellites() {
    let dir = tempfile::tempdir().unwrap();
    let out = leonav(&["visibility"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let count = |key: &str| -> usize { text.lines().find_map(|l| l.strip_prefix(key)).unwrap().parse().unwrap() };
    assert!(count("min_visible_starlink,") >= 4);
    assert!(count("min_visible_navstar,") >= 4);
    let csv = std::fs::read_to_string(dir.path().join("visibility.csv")).unwrap();
    assert!(csv.starts_with("t,constellation,norad_id,elevation_deg\n"));
}

#[test]
fn fixture_associate_and_replay_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let fx = dir.path().join("fixture");
    assert!(leonav(&["fixture"], &fx).status.success());
    let out = leonav(
        &[
            "associate",
            "--ridge",
            fx.join("ridge_1.csv").to_str().unwrap(),
            "--tle",
            fx.join("catalog.tle").to_str().unwrap(),
            "--lat",
            "43.0848638",
            "--lon",
            "-77.6786127",
            "--alt",
            "170",
            "--t0",
            "2026-01-30T15:00:00Z",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("ridge,sat_id,alpha_hat_hz_s,alpha_pred_hz_s,residual_alpha_hz_s,residual_doppler_hz,accepted"));
    assert!(lines.next().unwrap().ends_with(",true"));

    let cfg = fx.join("config.json");
    let mut args = vec!["--config", cfg.to_str().unwrap(), "replay", "--gps"];
    let (gps, imu) = (fx.join("gps.csv"), fx.join("imu.csv"));
    args.extend([gps.to_str().unwrap(), "--imu", imu.to_str().unwrap()]);
    let ridges: Vec<String> = (1..=5).map(|k| fx.join(format!("ridge_{k}.csv")).to_string_lossy().into_owned()).collect();
    for r in &ridges {
        args.extend(["--ridge", r.as_str()]);
    }
    let rep = dir.path().join("replay");
    let out = leonav(&args, &rep);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["associations.csv", "replay_summary.csv", "reference.csv", "trajectory_leo-alpha_imu.csv", "replay_meta.txt"] {
        assert!(rep.join(f).exists(), "{f}");
    }
    let meta = std::fs::read_to_string(rep.join("replay_meta.txt")).unwrap();
    assert!(meta.contains("surveyed") && meta.contains("alpha_updates: 5"));
}

#[test]
fn simulate_and_sweep_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    for (name, threads) in [("a", "1"), ("b", "3")] {
        let out = leonav(&["--config", &cfg, "--threads", threads, "sweep"], &dir.path().join(name));
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let out = leonav(&["--config", &cfg, "simulate", "--run", "2"], &dir.path().join(name).join("sim"));
        assert!(out.status.success());
    }
    for f in ["rmse.csv", "rmse_epochs.csv", "bound.csv", "sim/truth.csv", "sim/measurements.csv", "sim/trajectory_gps_leo-alpha_imu.csv"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        assert_eq!(a, std::fs::read(dir.path().join("b").join(f)).unwrap(), "{f}");
    }
    let other = leonav(&["--config", &cfg, "--seed", "99", "sweep"], &dir.path().join("c"));
    assert!(other.status.success());
    assert_ne!(std::fs::read(dir.path().join("a/rmse.csv")).unwrap(), std::fs::read(dir.path().join("c/rmse.csv")).unwrap());
}

#[test]
fn trajectory_csv_has_the_documented_header() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    assert!(leonav(&["--config", &cfg, "simulate"], dir.path()).status.success());
    let text = std::fs::read_to_string(dir.path().join("trajectory_gps_imu.csv")).unwrap();
    assert!(text.starts_with("t_s,e_m,n_m,u_m,ve,vn,vu,roll,pitch,yaw,p11,p22,p33,p44,p55,p66,p77,p88,p99\n"));
    assert_eq!(text.lines().count(), 1 + 41);
    let bound = leonav(&["--config", &cfg, "pcrb"], dir.path());
    assert!(bound.status.success());
    let csv = std::fs::read_to_string(dir.path().join("bound.csv")).unwrap();
    assert!(csv.starts_with("t_s,pos_bound_m,vel_bound_mps,att_bound_rad,mode,n_sats\n"));
}

#[test]
fn visibility_flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let count = |mask: &str| -> usize {
        let out = leonav(&["visibility", "--duration", "5", "--mask-leo", mask], dir.path());
        assert!(out.status.success());
        let text = String::from_utf8(out.stdout).unwrap();
        text.lines().find_map(|l| l.strip_prefix("min_visible_starlink,")).unwrap().parse().unwrap()
    };
    assert!(count("15") > count("40"));
    let out = leonav(&["visibility", "--mask-gps", "95"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}
