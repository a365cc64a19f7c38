//! Posterior Cramér-Rao bound for the 9D state, linearized about the truth
//! trajectory with the same transition and measurement models as the filter.

use alloc::vec::Vec;

use crate::estimation::{self, spd_inverse, EstimationError};
use crate::frames::EnuFrame;
use crate::fusion::{
    measurement_jacobian, resolve_geometry, transition_jacobian, Covariance, FilterConfig, FusionError, FusionMode, MeasurementGeometry,
    MeasurementRow, SatelliteProvider, TIME_TOLERANCE,
};
use crate::inertial::{ImuSample, InertialError, NavState};
use crate::observables::Measurement;
use crate::time::UtcInstant;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum BoundError {
    #[error("information matrix is singular and no measurement regularizes it")]
    SingularInformation,
    #[error("truth has {truth} epochs but {imu} IMU samples")]
    LengthMismatch { truth: usize, imu: usize },
    #[error("measurement at {0} does not fall on a truth epoch")]
    Misaligned(UtcInstant),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Inertial(#[from] InertialError),
    #[error(transparent)]
    Estimation(EstimationError),
}

impl From<EstimationError> for BoundError {
    fn from(e: EstimationError) -> Self {
        match e {
            EstimationError::SingularInformation => BoundError::SingularInformation,
            other => BoundError::Estimation(other),
        }
    }
}

/// Fisher information at an instant.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundState {
    pub j: Covariance,
    pub t: UtcInstant,
}

impl BoundState {
    /// `J0 = P0⁻¹`.
    pub fn from_prior(t: UtcInstant, p0: &Covariance) -> Result<Self, BoundError> {
        Ok(BoundState { j: spd_inverse(p0).ok_or(BoundError::SingularInformation)?, t })
    }

    pub fn covariance(&self) -> Result<Covariance, BoundError> {
        spd_inverse(&self.j).ok_or(BoundError::SingularInformation)
    }
}

/// `J ← (Q + F J⁻¹ Fᵀ)⁻¹ + Σ Hᵀ R⁻¹ H`, advancing the bound to `t`.
pub fn pcrb_step(
    b: &BoundState,
    t: UtcInstant,
    f: &Covariance,
    q: &Covariance,
    measurements: &[(MeasurementRow, f64)],
) -> Result<BoundState, BoundError> {
    Ok(BoundState { j: estimation::pcrb_step(&b.j, f, q, measurements)?, t })
}

/// Lower bounds on position, velocity and attitude RMSE at one epoch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundPoint {
    pub t: UtcInstant,
    /// sqrt of the summed ENU position variances (m).
    pub pos: f64,
    pub vel: f64,
    pub att: f64,
}

impl BoundPoint {
    pub fn from_state(b: &BoundState) -> Result<Self, BoundError> {
        let c = b.covariance()?;
        let block = |i: usize| (c[(i, i)] + c[(i + 1, i + 1)] + c[(i + 2, i + 2)]).max(0.0).sqrt();
        Ok(BoundPoint { t: b.t, pos: block(0), vel: block(3), att: block(6) })
    }
}

fn measurement_rows<P: SatelliteProvider + ?Sized>(
    ms: &[&Measurement],
    nav: &NavState,
    frame: &EnuFrame,
    sats: &P,
    cfg: &FilterConfig,
) -> Result<Vec<(MeasurementRow, f64)>, BoundError> {
    let x = nav.to_vector();
    let mut rows = Vec::with_capacity(ms.len());
    for m in ms {
        let (sat, sat_ref) = resolve_geometry(m, sats)?;
        let geom = MeasurementGeometry { sat: sat.as_ref(), sat_ref: sat_ref.as_ref() };
        rows.push((measurement_jacobian(m.kind, &x, frame, geom, &cfg.carrier)?, m.sigma * m.sigma));
    }
    Ok(rows)
}

/// Bound along a truth trajectory sampled at the IMU epochs.
///
/// `imu` drives the truth (normally the noiseless synthesized samples) and
/// must hold one sample per interval. Every measurement used by `mode` must
/// fall on a truth epoch; only the measurement times, kinds, satellites and
/// sigmas matter, not the values.
#[allow(clippy::too_many_arguments)]
pub fn pcrb_trajectory<P: SatelliteProvider + ?Sized>(
    truth: &[NavState],
    imu: &[ImuSample],
    meas: &[Measurement],
    sats: &P,
    frame: &EnuFrame,
    mode: FusionMode,
    p0: &Covariance,
    cfg: &FilterConfig,
) -> Result<Vec<BoundPoint>, BoundError> {
    let Some(first) = truth.first() else { return Ok(Vec::new()) };
    if imu.len() + 1 != truth.len() {
        return Err(BoundError::LengthMismatch { truth: truth.len(), imu: imu.len() });
    }
    let used: Vec<&Measurement> = meas.iter().filter(|m| mode.allows(m.kind)).collect();
    let mut buckets: Vec<Vec<&Measurement>> = alloc::vec![Vec::new(); truth.len()];
    for m in used {
        let k = truth.partition_point(|s| s.t.seconds_since(&m.t) < -TIME_TOLERANCE);
        match truth.get(k) {
            Some(s) if s.t.seconds_since(&m.t).abs() <= TIME_TOLERANCE => buckets[k].push(m),
            _ => return Err(BoundError::Misaligned(m.t)),
        }
    }
    let mut b = BoundState::from_prior(first.t, p0)?;
    b.j += estimation::measurement_information(&measurement_rows(&buckets[0], first, frame, sats, cfg)?);
    let mut out = Vec::with_capacity(truth.len());
    out.push(BoundPoint::from_state(&b)?);
    for (k, sample) in imu.iter().enumerate() {
        let dt = truth[k + 1].t.seconds_since(&truth[k].t);
        let f = transition_jacobian(&truth[k], sample, dt)?;
        let rows = measurement_rows(&buckets[k + 1], &truth[k + 1], frame, sats, cfg)?;
        b = pcrb_step(&b, truth[k + 1].t, &f, &cfg.process_noise(dt), &rows)?;
        out.push(BoundPoint::from_state(&b)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::{enu_frame_at, GeodeticPosition};
    use crate::fusion::{initial_covariance, EphemerisTable};
    use crate::inertial::{synthesize_imu, trajectories, ImuNoiseModel};
    use crate::observables::{Axis, MeasurementKind};
    use crate::propagate::test_support::{circular_record, epoch};
    use crate::propagate::{propagate, SatStateEcef};
    use crate::Vec3;
    use alloc::vec;
    use core::f64::consts::FRAC_PI_2;

    struct Scenario {
        truth: Vec<NavState>,
        imu: Vec<ImuSample>,
        table: EphemerisTable,
        frame: EnuFrame,
    }

    fn scenario() -> Scenario {
        let frame = enu_frame_at(&GeodeticPosition::from_degrees(43.0848638, -77.6786127, 170.0).unwrap());
        let truth = trajectories::stationary(epoch(), Vec3::zeros(), Vec3::new(0.0, 0.0, FRAC_PI_2), 5.0, 10.0);
        let imu = synthesize_imu(&truth, &ImuNoiseModel::NOISELESS, 10.0, 0).unwrap();
        let mut table = EphemerisTable::new();
        for nav in &truth {
            for k in 0..6u32 {
                let rec = circular_record(200 + k, "STARLINK-T", 550_000.0, 53.0, 0.0, 0.0, epoch());
                let mut s: SatStateEcef = propagate(&rec, &nav.t).unwrap();
                let dir = Vec3::new((k as f64).cos() * 0.4, (k as f64).sin() * 0.4, 1.0).normalize();
                s.r = frame.origin_ecef + frame.rotation * dir * 800_000.0;
                table.insert(s);
            }
        }
        Scenario { truth, imu, table, frame }
    }

    fn alpha(sc: &Scenario, n: u32, sigma: f64) -> Vec<Measurement> {
        let mut out = vec![];
        for nav in sc.truth.iter().step_by(10) {
            for k in 0..n {
                out.push(Measurement {
                    kind: MeasurementKind::LeoDopplerRate,
                    t: nav.t,
                    sat_id: 200 + k,
                    value: 0.0,
                    sigma,
                    ref_sat_id: None,
                });
            }
        }
        out
    }

    fn fixes(sc: &Scenario) -> Vec<Measurement> {
        let mut out = vec![];
        for nav in &sc.truth {
            for axis in [Axis::East, Axis::North, Axis::Up] {
                out.push(Measurement {
                    kind: MeasurementKind::GpsPositionFix(axis),
                    t: nav.t,
                    sat_id: 0,
                    value: 0.0,
                    sigma: 2.0,
                    ref_sat_id: None,
                });
            }
        }
        out
    }

    fn bound(sc: &Scenario, meas: &[Measurement], mode: FusionMode) -> Vec<BoundPoint> {
        let p0 = initial_covariance(5.0, 0.5, 1f64.to_radians());
        pcrb_trajectory(&sc.truth, &sc.imu, meas, &sc.table, &sc.frame, mode, &p0, &FilterConfig::default()).unwrap()
    }

    #[test]
    fn no_measurements_dissipates_information() {
        let b0 = BoundState { j: Covariance::identity() * 4.0, t: epoch() };
        let b1 = pcrb_step(&b0, epoch(), &Covariance::identity(), &(Covariance::identity() * 0.01), &[]).unwrap();
        assert!((b0.j - b1.j).symmetric_eigenvalues().min() > 0.0);
        let zero = BoundState { j: Covariance::zeros(), t: epoch() };
        assert_eq!(pcrb_step(&zero, epoch(), &Covariance::identity(), &Covariance::zeros(), &[]), Err(BoundError::SingularInformation));
    }

    #[test]
    fn more_satellites_never_raise_the_bound() {
        let sc = scenario();
        let mut prev: Option<Vec<BoundPoint>> = None;
        for n in 2..=6 {
            let b = bound(&sc, &alpha(&sc, n, 1.5), FusionMode::LeoAlphaImu);
            if let Some(p) = &prev {
                for (a, c) in b.iter().zip(p) {
                    assert!(a.pos <= c.pos + 1e-9 && a.vel <= c.vel + 1e-9 && a.att <= c.att + 1e-9);
                }
            }
            prev = Some(b);
        }
    }

    #[test]
    fn hybrid_bound_below_each_source() {
        let sc = scenario();
        let mut both = alpha(&sc, 6, 1.5);
        both.extend(fixes(&sc));
        let hybrid = bound(&sc, &both, FusionMode::GpsLeoAlphaImu);
        let gps = bound(&sc, &both, FusionMode::GpsImu);
        let leo = bound(&sc, &both, FusionMode::LeoAlphaImu);
        for ((h, g), l) in hybrid.iter().zip(&gps).zip(&leo) {
            assert!(h.pos <= g.pos.min(l.pos) + 1e-9);
            assert!(h.vel <= g.vel.min(l.vel) + 1e-9);
        }
    }

    #[test]
    fn quadrupled_noise_at_most_doubles_the_bound() {
        let sc = scenario();
        let base = bound(&sc, &alpha(&sc, 6, 1.5), FusionMode::LeoAlphaImu);
        let noisy = bound(&sc, &alpha(&sc, 6, 3.0), FusionMode::LeoAlphaImu);
        for (a, b) in base.iter().zip(&noisy) {
            assert!(b.pos >= a.pos - 1e-9 && b.pos <= 2.0 * a.pos + 1e-9);
            assert!(b.vel >= a.vel - 1e-9 && b.vel <= 2.0 * a.vel + 1e-9);
        }
    }

    #[test]
    fn first_point_is_the_prior_and_misalignment_is_rejected() {
        let sc = scenario();
        let b = bound(&sc, &[], FusionMode::GpsImu);
        assert!((b[0].pos - 75f64.sqrt()).abs() < 1e-9);
        let mut off = fixes(&sc);
        off[3].t = off[3].t.add_seconds(0.05);
        let p0 = initial_covariance(5.0, 0.5, 0.01);
        let r = pcrb_trajectory(&sc.truth, &sc.imu, &off, &sc.table, &sc.frame, FusionMode::GpsImu, &p0, &FilterConfig::default());
        assert!(matches!(r, Err(BoundError::Misaligned(_))));
    }
}
