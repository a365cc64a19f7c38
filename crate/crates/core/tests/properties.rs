//! Model invariants checked over random inputs.

mod common;

use leonav_core::frames::wrap_pi;
use leonav_core::fusion::{initial_covariance, predict, update, FilterConfig, FilterState, FusionMode, MeasurementGeometry};
use leonav_core::inertial::{mechanize, ImuSample, NavState};
use leonav_core::observables::{doppler_rate, geometry, gps_pseudorange, ofdm_diff_range, sort_measurements, Axis};
use leonav_core::propagate::propagate;
use leonav_core::{BeaconCarrier, Measurement, MeasurementKind, Vec3};
use proptest::prelude::*;

fn psd_and_symmetric(p: &leonav_core::fusion::Covariance) -> bool {
    let asym = (p - p.transpose()).norm();
    let min_eig = p.symmetric_eigenvalues().min();
    asym <= 1e-9 * p.norm() && min_eig >= -1e-9 * p.trace()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn range_rate_is_the_derivative_of_range(raan in 0.0f64..360.0, ma in 0.0f64..360.0, dt in 0.0f64..3000.0) {
        let rec = common::circular(1, 550_000.0, 53.0, raan, ma);
        let user = common::frame().origin_ecef;
        let t = common::epoch().add_seconds(dt);
        let rho = |s: f64| (propagate(&rec, &t.add_seconds(s)).unwrap().r - user).norm();
        let g = geometry(&propagate(&rec, &t).unwrap(), &user, &Vec3::zeros()).unwrap();
        // the Kepler solve leaves ~1e-5 m of jitter, so the step can't be tiny
        let h = 1e-2;
        let fd = (rho(h) - rho(-h)) / (2.0 * h);
        prop_assert!((g.u.dot(&g.v_rel) - fd).abs() < 2e-3, "{} vs {}", g.rho_dot, fd);
    }

    #[test]
    fn doppler_rate_scales_with_carrier(raan in 0.0f64..360.0, ma in 0.0f64..360.0, fc in 10.7e9f64..12.7e9) {
        let rec = common::circular(1, 550_000.0, 53.0, raan, ma);
        let s = propagate(&rec, &common::epoch()).unwrap();
        let g = geometry(&s, &common::frame().origin_ecef, &Vec3::new(3.0, -1.0, 0.5)).unwrap();
        let a1 = doppler_rate(&g, &BeaconCarrier::new(fc));
        let a2 = doppler_rate(&g, &BeaconCarrier::new(2.0 * fc));
        prop_assert!((a2 - 2.0 * a1).abs() <= 1e-12 * a1.abs().max(1.0));
    }

    #[test]
    fn differenced_range_cancels_common_bias(ra in 0.0f64..360.0, rb in 0.0f64..360.0, bias in -1e5f64..1e5) {
        let t = common::epoch();
        let si = propagate(&common::circular(1, 550_000.0, 53.0, ra, 10.0), &t).unwrap();
        let sr = propagate(&common::circular(2, 550_000.0, 53.0, rb, 20.0), &t).unwrap();
        let user = common::frame().origin_ecef;
        let direct = ofdm_diff_range(&si, &sr, &user);
        let from_pseudoranges = gps_pseudorange(&si, &user, bias) - gps_pseudorange(&sr, &user, bias);
        prop_assert!((direct - from_pseudoranges).abs() < 1e-6);
    }

    #[test]
    fn measurements_sort_by_time_then_satellite(keys in proptest::collection::vec((0u32..20, 0u32..6), 1..40)) {
        let t0 = common::epoch();
        let mut ms: Vec<Measurement> = keys
            .iter()
            .map(|&(k, id)| Measurement { kind: MeasurementKind::LeoDopplerRate, t: t0.add_seconds(0.1 * k as f64), sat_id: id, value: 0.0, sigma: 1.0, ref_sat_id: None })
            .collect();
        sort_measurements(&mut ms);
        for w in ms.windows(2) {
            let dt = w[1].t.seconds_since(&w[0].t);
            prop_assert!(dt > 1e-9 || (dt.abs() <= 1e-9 && w[0].sat_id <= w[1].sat_id));
        }
    }

    #[test]
    fn mechanized_yaw_stays_wrapped(yaw in -3.1f64..3.1, wz in -3.0f64..3.0, dt in 0.01f64..0.5) {
        let nav = NavState::new(common::epoch(), Vec3::zeros(), Vec3::zeros(), Vec3::new(0.0, 0.0, yaw));
        let imu = ImuSample { t: nav.t, accel: Vec3::new(0.0, 0.0, 9.80665), gyro: Vec3::new(0.0, 0.0, wz) };
        let mut s = nav;
        for _ in 0..10 {
            s = mechanize(&s, &imu, dt).unwrap();
            prop_assert!(s.theta.z > -std::f64::consts::PI && s.theta.z <= std::f64::consts::PI);
        }
        prop_assert!((wrap_pi(s.theta.z - yaw - 10.0 * wz * dt)).abs() < 1e-9);
    }

    #[test]
    fn covariance_stays_symmetric_psd(values in proptest::collection::vec(-3.0f64..3.0, 12), gyro in -0.01f64..0.01) {
        let t0 = common::epoch();
        let nav = NavState::new(t0, Vec3::zeros(), Vec3::zeros(), Vec3::new(0.0, 0.0, 1.5));
        let mut fs = FilterState::new(nav, initial_covariance(5.0, 0.5, 0.02), common::frame(), FusionMode::GpsImu);
        let cfg = FilterConfig::default();
        for (k, v) in values.iter().enumerate() {
            let imu = ImuSample { t: fs.nav.t, accel: Vec3::new(0.01 * v, 0.0, 9.80665), gyro: Vec3::new(0.0, gyro, 0.0) };
            fs = predict(&fs, &imu, 0.1, &cfg).unwrap();
            prop_assert!(psd_and_symmetric(&fs.cov));
            let axis = [Axis::East, Axis::North, Axis::Up][k % 3];
            let m = Measurement { kind: MeasurementKind::GpsPositionFix(axis), t: fs.nav.t, sat_id: 0, value: *v, sigma: 2.0, ref_sat_id: None };
            fs = update(&fs, &m, MeasurementGeometry::default(), &cfg).unwrap().state;
            prop_assert!(psd_and_symmetric(&fs.cov));
        }
    }
}
