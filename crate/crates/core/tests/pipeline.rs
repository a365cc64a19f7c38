//! End-to-end runs through the core: truth, synthetic sensors, filter,
//! bound and metrics.

mod common;

use leonav_core::bound::pcrb_trajectory;
use leonav_core::frames::enu_frame_at;
use leonav_core::fusion::{initial_covariance, run_filter, EphemerisTable, FilterConfig, FilterState, FusionMode};
use leonav_core::inertial::{synthesize_imu, trajectories, ImuNoiseModel, StateVector};
use leonav_core::metrics::{compute_rmse, EnsembleAccumulator};
use leonav_core::noise::{derive_seed, keyed_normal};
use leonav_core::observables::{simulate_measurements, EpochSatellites, SimulationConfig};
use leonav_core::propagate::{elevation, propagate};
use leonav_core::{NavState, TleRecord, Vec3};

struct Setup {
    truth: Vec<NavState>,
    epochs: Vec<EpochSatellites>,
    table: EphemerisTable,
}

fn gps_record(id: u32, raan: f64, ma: f64) -> TleRecord {
    let mut r = common::circular(id, 20_180_000.0, 55.0, raan, ma);
    r.name = format!("GPS BIIF-{id}");
    r.constellation = leonav_core::Constellation::Navstar;
    r
}

fn setup(duration: f64) -> Setup {
    let frame = common::frame();
    let truth = trajectories::stationary(common::epoch(), Vec3::zeros(), Vec3::new(0.0, 0.0, std::f64::consts::FRAC_PI_2), duration, 10.0);
    let mut gps = Vec::new();
    let mut leo = Vec::new();
    for k in 0..24 {
        gps.push(gps_record(100 + k, 60.0 * (k / 4) as f64, 90.0 * (k % 4) as f64 + 15.0 * (k / 4) as f64));
    }
    for plane in 0..36u32 {
        for slot in 0..12u32 {
            let ma = 30.0 * slot as f64 + 5.0 * plane as f64;
            leo.push(common::circular(1000 + 12 * plane + slot, 550_000.0, 53.0, 10.0 * plane as f64, ma % 360.0));
        }
    }
    let above = |r: &TleRecord, mask: f64| {
        let s = propagate(r, &truth[0].t).unwrap();
        elevation(&s, &frame.origin_ecef, &frame) > mask.to_radians()
    };
    gps.retain(|r| above(r, 10.0));
    leo.retain(|r| above(r, 20.0));
    assert!(gps.len() >= 4 && leo.len() >= 4, "{} gps, {} leo", gps.len(), leo.len());
    let mut table = EphemerisTable::new();
    let epochs = truth
        .iter()
        .map(|nav| {
            let g: Vec<_> = gps.iter().map(|r| propagate(r, &nav.t).unwrap()).collect();
            let l: Vec<_> = leo
                .iter()
                .map(|r| {
                    let s = propagate(r, &nav.t).unwrap();
                    (s, elevation(&s, &frame.origin_ecef, &frame))
                })
                .collect();
            table.extend(g.iter().copied());
            table.extend(l.iter().map(|(s, _)| *s));
            EpochSatellites { t: nav.t, gps: g, leo: l }
        })
        .collect();
    Setup { truth, epochs, table }
}

#[test]
fn noiseless_inputs_reproduce_truth_in_every_mode() {
    let s = setup(5.0);
    let frame = enu_frame_at(&common::site());
    let imu = synthesize_imu(&s.truth, &ImuNoiseModel::NOISELESS, 10.0, 0).unwrap();
    let sim = SimulationConfig { noise_scale: 0.0, ..SimulationConfig::default() };
    let meas = simulate_measurements(&frame, &s.truth, &s.epochs, &sim).unwrap().measurements;
    for mode in FusionMode::ALL {
        let init = FilterState::new(s.truth[0], initial_covariance(5.0, 0.5, 0.02), frame, mode);
        let out = run_filter(&imu, &mode.select(&meas), &s.table, init, &FilterConfig::default()).unwrap();
        let rmse = compute_rmse(&out.states, &s.truth).unwrap();
        assert!(rmse.aggregate.pos < 1e-3, "{}: {}", mode.label(), rmse.aggregate.pos);
        assert_eq!(out.gated, 0);
    }
}

#[test]
fn monte_carlo_rmse_respects_the_bound() {
    let s = setup(10.0);
    let frame = enu_frame_at(&common::site());
    let cfg = FilterConfig::default();
    let noise = ImuNoiseModel::tactical(10.0);
    let p0 = initial_covariance(5.0, 0.5, 1f64.to_radians());
    let clean = synthesize_imu(&s.truth, &ImuNoiseModel::NOISELESS, 10.0, 0).unwrap();
    for mode in [FusionMode::GpsImu, FusionMode::LeoAlphaImu, FusionMode::LeoOfdmImu] {
        let mut acc = EnsembleAccumulator::default();
        let mut schedule = Vec::new();
        for run in 0..20u64 {
            let seed = derive_seed(5, &[run]);
            let imu = synthesize_imu(&s.truth, &noise, 10.0, seed).unwrap();
            let sim = SimulationConfig { seed, ..SimulationConfig::default() };
            let meas = simulate_measurements(&frame, &s.truth, &s.epochs, &sim).unwrap().measurements;
            let dx = StateVector::from_fn(|i, _| p0[(i, i)].sqrt() * keyed_normal(seed, &[99, i as u64]));
            let init = FilterState::new(s.truth[0].retract(&dx), p0, frame, mode);
            let out = run_filter(&imu, &mode.select(&meas), &s.table, init, &cfg).unwrap();
            acc.add_run(&out.states, &s.truth).unwrap();
            schedule = meas;
        }
        let bound = pcrb_trajectory(&s.truth, &clean, &schedule, &s.table, &frame, mode, &p0, &cfg).unwrap();
        let n = bound.len() as f64;
        let agg = (bound.iter().map(|b| b.pos * b.pos).sum::<f64>() / n).sqrt();
        let rmse = acc.report().aggregate.pos;
        // 20 runs: allow a wider statistical margin than the 50-run sweep
        assert!(rmse >= 0.8 * agg, "{}: rmse {rmse} bound {agg}", mode.label());
        assert!(rmse <= 1.5 * agg, "{}: rmse {rmse} bound {agg}", mode.label());
    }
}
