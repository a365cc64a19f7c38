//! Mean-element orbit propagation and visibility.
//!
//! The propagator solves the Keplerian problem on the TLE mean elements and
//! applies first-order secular J2 drift to the node, the argument of perigee
//! and the mean anomaly. It is not SGP4; the [`Propagator`] trait is the seam
//! where a full SGP4 implementation can be plugged in.
//!
//! Velocity and acceleration are the exact time derivatives of the
//! propagated trajectory, computed analytically. In ECEF they include the
//! Coriolis and centrifugal terms, so range-acceleration models evaluated
//! with them agree with differencing the propagated positions.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

use crate::frames::{self, ecef_to_geodetic, EnuFrame, GeodeticPosition};
use crate::time::UtcInstant;
use crate::tle::{Constellation, TleCatalog, TleRecord};
use crate::{Mat3, Vec3};

/// Earth gravitational parameter (m^3/s^2).
pub const MU_EARTH: f64 = 3.986_004_418e14;
/// Second zonal harmonic.
pub const J2: f64 = 1.082_626_68e-3;
/// Equatorial radius used by the gravity model (m).
pub const EARTH_RADIUS: f64 = 6_378_137.0;

const KEPLER_TOLERANCE: f64 = 1e-12;
const KEPLER_MAX_NEWTON: usize = 30;
const DECAY_PERIGEE_ALTITUDE: f64 = 100_000.0;
const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Clone, Copy, Debug, PartialEq, thiserror::Error)]
pub enum PropagationError {
    #[error("satellite {norad_id}: elements are {age_days:.2} days from the requested time")]
    StaleElements { norad_id: u32, age_days: f64 },
    #[error("satellite {norad_id}: perigee altitude {perigee_km:.1} km is below the decay limit")]
    DecayedOrbit { norad_id: u32, perigee_km: f64 },
    #[error("satellite {norad_id}: eccentricity {eccentricity} outside [0, 1)")]
    InvalidEccentricity { norad_id: u32, eccentricity: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, thiserror::Error)]
pub enum VisibilityError {
    #[error("elevation mask {0} rad outside [0, pi/2]")]
    InvalidMask(f64),
}

/// Satellite kinematic state in ECEF.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SatStateEcef {
    pub norad_id: u32,
    pub t: UtcInstant,
    pub r: Vec3,
    pub v: Vec3,
    pub a: Vec3,
}

/// Inertial (TEME) state with acceleration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InertialState {
    pub r: Vec3,
    pub v: Vec3,
    pub a: Vec3,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PropagatorConfig {
    /// Apply secular J2 drift to the elements.
    pub j2: bool,
    /// Largest allowed |t - epoch| in seconds.
    pub max_staleness: f64,
}

impl Default for PropagatorConfig {
    fn default() -> Self {
        PropagatorConfig { j2: true, max_staleness: 7.0 * SECONDS_PER_DAY }
    }
}

/// Anything that turns an element set into an ECEF state at a time.
pub trait Propagator {
    fn propagate(&self, rec: &TleRecord, t: &UtcInstant) -> Result<SatStateEcef, PropagationError>;
}

/// Two-body + secular J2 propagator.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct KeplerJ2 {
    pub config: PropagatorConfig,
}

impl Propagator for KeplerJ2 {
    fn propagate(&self, rec: &TleRecord, t: &UtcInstant) -> Result<SatStateEcef, PropagationError> {
        propagate_with(rec, t, &self.config)
    }
}

/// Propagates with the default configuration (J2 on, 7-day staleness guard).
pub fn propagate(rec: &TleRecord, t: &UtcInstant) -> Result<SatStateEcef, PropagationError> {
    propagate_with(rec, t, &PropagatorConfig::default())
}

pub fn propagate_with(rec: &TleRecord, t: &UtcInstant, cfg: &PropagatorConfig) -> Result<SatStateEcef, PropagationError> {
    let s = propagate_inertial(rec, t, cfg)?;
    let (r, v, a) = frames::teme_to_ecef_with_acceleration(&s.r, &s.v, &s.a, t);
    Ok(SatStateEcef { norad_id: rec.norad_id, t: *t, r, v, a })
}

/// Semi-major axis (m) implied by a mean motion in rev/day.
pub fn semi_major_axis(mean_motion_rev_per_day: f64) -> f64 {
    let n = mean_motion_rev_per_day * 2.0 * PI / SECONDS_PER_DAY;
    (MU_EARTH / (n * n)).cbrt()
}

/// Mean motion (rev/day) of a circular orbit at the given altitude.
pub fn mean_motion_for_altitude(altitude_m: f64) -> f64 {
    let a = EARTH_RADIUS + altitude_m;
    (MU_EARTH / (a * a * a)).sqrt() * SECONDS_PER_DAY / (2.0 * PI)
}

/// Solves `E - e sin E = M` for the eccentric anomaly.
pub fn solve_kepler(mean_anomaly: f64, e: f64) -> f64 {
    let m = frames::wrap_pi(mean_anomaly);
    let f = |x: f64| x - e * x.sin() - m;
    let mut x = if e < 0.8 { m } else { PI.copysign(m) };
    for _ in 0..KEPLER_MAX_NEWTON {
        let step = f(x) / (1.0 - e * x.cos());
        x -= step;
        if step.abs() < KEPLER_TOLERANCE {
            return x;
        }
    }
    // bisection on the bracket |E - M| <= e
    let (mut lo, mut hi) = (m - e, m + e);
    while hi - lo > KEPLER_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn rot_z(angle: f64) -> (Mat3, Mat3, Mat3) {
    // R, dR/dangle, d2R/dangle2
    let (s, c) = angle.sin_cos();
    (
        Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0),
        Mat3::new(-s, -c, 0.0, c, -s, 0.0, 0.0, 0.0, 0.0),
        Mat3::new(-c, s, 0.0, -s, -c, 0.0, 0.0, 0.0, 0.0),
    )
}

fn rot_x(angle: f64) -> Mat3 {
    let (s, c) = angle.sin_cos();
    Mat3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

/// Secular rates (rad/s) of node, perigee and mean anomaly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SecularRates {
    pub raan: f64,
    pub arg_perigee: f64,
    pub mean_anomaly: f64,
}

pub fn secular_rates(rec: &TleRecord, j2: bool) -> SecularRates {
    let n = rec.mean_motion * 2.0 * PI / SECONDS_PER_DAY;
    if !j2 {
        return SecularRates { raan: 0.0, arg_perigee: 0.0, mean_anomaly: n };
    }
    let a = semi_major_axis(rec.mean_motion);
    let e = rec.eccentricity;
    let p = a * (1.0 - e * e);
    let k = J2 * (EARTH_RADIUS / p) * (EARTH_RADIUS / p);
    let ci = rec.inclination.cos();
    SecularRates {
        raan: -1.5 * n * k * ci,
        arg_perigee: 0.75 * n * k * (5.0 * ci * ci - 1.0),
        mean_anomaly: n + 0.75 * n * k * (1.0 - e * e).sqrt() * (3.0 * ci * ci - 1.0),
    }
}

/// State in the TEME-like inertial frame of the elements.
pub fn propagate_inertial(rec: &TleRecord, t: &UtcInstant, cfg: &PropagatorConfig) -> Result<InertialState, PropagationError> {
    let dt = t.seconds_since(&rec.epoch);
    if dt.abs() > cfg.max_staleness {
        return Err(PropagationError::StaleElements { norad_id: rec.norad_id, age_days: dt / SECONDS_PER_DAY });
    }
    let e = rec.eccentricity;
    if !(0.0..1.0).contains(&e) {
        return Err(PropagationError::InvalidEccentricity { norad_id: rec.norad_id, eccentricity: e });
    }
    let a = semi_major_axis(rec.mean_motion);
    let perigee_alt = a * (1.0 - e) - EARTH_RADIUS;
    if perigee_alt < DECAY_PERIGEE_ALTITUDE {
        return Err(PropagationError::DecayedOrbit { norad_id: rec.norad_id, perigee_km: perigee_alt / 1000.0 });
    }

    let rates = secular_rates(rec, cfg.j2);
    let raan = rec.raan + rates.raan * dt;
    let argp = rec.arg_perigee + rates.arg_perigee * dt;
    let mean_anomaly = rec.mean_anomaly + rates.mean_anomaly * dt;
    let n_bar = rates.mean_anomaly;

    // perifocal Kepler motion driven by the drifting mean anomaly
    let ecc_anomaly = solve_kepler(mean_anomaly, e);
    let (se, ce) = ecc_anomaly.sin_cos();
    let root = (1.0 - e * e).sqrt();
    let radius = a * (1.0 - e * ce);
    let r_pf = Vec3::new(a * (ce - e), a * root * se, 0.0);
    let edot = n_bar / (1.0 - e * ce);
    let v_pf = Vec3::new(-a * se * edot, a * root * ce * edot, 0.0);
    let a_pf = -(n_bar * n_bar * a * a * a / (radius * radius * radius)) * r_pf;

    // r = Rz(raan) Rx(i) Rz(argp) r_pf with constant angular rates
    let (rw, drw, ddrw) = rot_z(argp);
    let w_dot = rates.arg_perigee;
    let q = rw * r_pf;
    let q_dot = drw * r_pf * w_dot + rw * v_pf;
    let q_ddot = ddrw * r_pf * (w_dot * w_dot) + 2.0 * drw * v_pf * w_dot + rw * a_pf;

    let ri = rot_x(rec.inclination);
    let (ro, dro, ddro) = rot_z(raan);
    let o_dot = rates.raan;
    let r = ro * ri * q;
    let v = dro * ri * q * o_dot + ro * ri * q_dot;
    let acc = ddro * ri * q * (o_dot * o_dot) + 2.0 * dro * ri * q_dot * o_dot + ro * ri * q_ddot;
    Ok(InertialState { r, v, a: acc })
}

/// Elevation of a satellite above the local horizon of `frame`.
pub fn elevation(sat: &SatStateEcef, user_ecef: &Vec3, frame: &EnuFrame) -> f64 {
    let enu = frame.ecef_vector_to_enu(&(sat.r - user_ecef));
    // asin(up / |los|), evaluated as atan2 to stay accurate near zenith
    enu.z.atan2(enu.x.hypot(enu.y))
}

/// Azimuth (rad, clockwise from North) of a satellite seen from `frame`.
pub fn azimuth(sat: &SatStateEcef, user_ecef: &Vec3, frame: &EnuFrame) -> f64 {
    let enu = frame.ecef_vector_to_enu(&(sat.r - user_ecef));
    frames::wrap_two_pi(enu.x.atan2(enu.y))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VisibleSatellite {
    pub norad_id: u32,
    pub elevation: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VisibilityReport {
    pub t: UtcInstant,
    pub visible_starlink: Vec<VisibleSatellite>,
    pub visible_navstar: Vec<VisibleSatellite>,
    /// Satellites that could not be propagated and were skipped.
    pub failures: Vec<PropagationError>,
}

/// Satellites above their constellation's elevation mask, highest first.
pub fn visible_satellites(
    cat: &TleCatalog,
    user: &GeodeticPosition,
    t: &UtcInstant,
    mask_gps: f64,
    mask_leo: f64,
) -> Result<VisibilityReport, VisibilityError> {
    visible_satellites_with(&KeplerJ2::default(), cat, user, t, mask_gps, mask_leo)
}

pub fn visible_satellites_with<P: Propagator>(
    propagator: &P,
    cat: &TleCatalog,
    user: &GeodeticPosition,
    t: &UtcInstant,
    mask_gps: f64,
    mask_leo: f64,
) -> Result<VisibilityReport, VisibilityError> {
    for m in [mask_gps, mask_leo] {
        if !(0.0..=FRAC_PI_2).contains(&m) {
            return Err(VisibilityError::InvalidMask(m));
        }
    }
    let frame = frames::enu_frame_at(user);
    let mut report = VisibilityReport { t: *t, visible_starlink: Vec::new(), visible_navstar: Vec::new(), failures: Vec::new() };
    for rec in &cat.records {
        let (mask, list) = match rec.constellation {
            Constellation::Starlink => (mask_leo, &mut report.visible_starlink),
            Constellation::Navstar => (mask_gps, &mut report.visible_navstar),
            Constellation::Other => continue,
        };
        match propagator.propagate(rec, t) {
            Ok(s) => {
                let el = elevation(&s, &frame.origin_ecef, &frame);
                if el >= mask && el < FRAC_PI_2 + 1e-12 && mask < FRAC_PI_2 {
                    list.push(VisibleSatellite { norad_id: rec.norad_id, elevation: el });
                }
            }
            Err(e) => report.failures.push(e),
        }
    }
    for list in [&mut report.visible_starlink, &mut report.visible_navstar] {
        list.sort_by(|a, b| b.elevation.total_cmp(&a.elevation).then(a.norad_id.cmp(&b.norad_id)));
    }
    Ok(report)
}

/// Geodetic sub-satellite point, mostly useful for diagnostics.
pub fn subsatellite_point(sat: &SatStateEcef) -> Option<GeodeticPosition> {
    ecef_to_geodetic(&sat.r).ok()
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;
    use crate::tle::ImpliedExponent;
    use alloc::string::ToString;

    pub fn circular_record(
        norad_id: u32,
        name: &str,
        altitude: f64,
        incl_deg: f64,
        raan_deg: f64,
        ma_deg: f64,
        epoch: UtcInstant,
    ) -> TleRecord {
        TleRecord {
            name: name.to_string(),
            norad_id,
            classification: 'U',
            international_designator: "26001A".to_string(),
            epoch,
            mean_motion_dot: 0.0,
            mean_motion_ddot: ImpliedExponent::ZERO,
            bstar: ImpliedExponent::ZERO,
            ephemeris_type: 0,
            element_set_number: 999,
            inclination: incl_deg.to_radians(),
            raan: raan_deg.to_radians(),
            eccentricity: 0.0,
            arg_perigee: 0.0,
            mean_anomaly: ma_deg.to_radians(),
            mean_motion: mean_motion_for_altitude(altitude),
            revolution_number: 1,
            constellation: Constellation::from_name(name),
        }
    }

    pub fn epoch() -> UtcInstant {
        UtcInstant::from_calendar(2026, 1, 30, 15, 0, 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn kepler_solver_converges_everywhere() {
        for &e in &[0.0, 0.1, 0.5, 0.9, 0.99] {
            for k in 0..64 {
                let m = -PI + k as f64 * 0.1;
                let big_e = solve_kepler(m, e);
                assert!((big_e - e * big_e.sin() - frames::wrap_pi(m)).abs() < 1e-11, "e={e} m={m}");
            }
        }
    }

    #[test]
    fn circular_equatorial_radius_matches_two_body() {
        let rec = circular_record(1, "STARLINK-T", 550_000.0, 0.0, 0.0, 0.0, epoch());
        let a = semi_major_axis(rec.mean_motion);
        assert!((a - 6_928_137.0).abs() < 1e-3);
        let period = SECONDS_PER_DAY / rec.mean_motion;
        for k in 0..=20 {
            let t = epoch().add_seconds(period * k as f64 / 20.0);
            let s = propagate(&rec, &t).unwrap();
            // the circular two-body oracle has constant radius a
            assert!((s.r.norm() - a).abs() < 1e-6, "{}", s.r.norm() - a);
            assert!(s.a.dot(&s.r) < 0.0);
        }
    }

    #[test]
    fn velocity_matches_central_difference() {
        let rec =
            TleRecord { eccentricity: 0.01, arg_perigee: 1.0, ..circular_record(2, "STARLINK-T", 550_000.0, 53.0, 40.0, 10.0, epoch()) };
        let h = 0.1;
        for k in 0..10 {
            let t = epoch().add_seconds(300.0 * k as f64);
            let s = propagate(&rec, &t).unwrap();
            let p = propagate(&rec, &t.add_seconds(h)).unwrap();
            let m = propagate(&rec, &t.add_seconds(-h)).unwrap();
            let fd_v = (p.r - m.r) / (2.0 * h);
            assert!((fd_v - s.v).norm() < 1e-3, "{}", (fd_v - s.v).norm());
            let fd_a = (p.v - m.v) / (2.0 * h);
            assert!((fd_a - s.a).norm() < 1e-4);
        }
    }

    #[test]
    fn two_body_energy_is_conserved_without_j2() {
        let rec = TleRecord { eccentricity: 0.05, ..circular_record(3, "X", 700_000.0, 63.0, 10.0, 0.0, epoch()) };
        let cfg = PropagatorConfig { j2: false, ..Default::default() };
        let energy = |t: UtcInstant| {
            let s = propagate_inertial(&rec, &t, &cfg).unwrap();
            0.5 * s.v.norm_squared() - MU_EARTH / s.r.norm()
        };
        let e0 = energy(epoch());
        let period = SECONDS_PER_DAY / rec.mean_motion;
        for k in 1..=16 {
            let e = energy(epoch().add_seconds(period * k as f64 / 16.0));
            assert!(((e - e0) / e0).abs() < 1e-12);
        }
        // with J2 the mean-element drift keeps the energy within the budget
        let cfg = PropagatorConfig::default();
        let s0 = propagate_inertial(&rec, &epoch(), &cfg).unwrap();
        let e0 = 0.5 * s0.v.norm_squared() - MU_EARTH / s0.r.norm();
        let s1 = propagate_inertial(&rec, &epoch().add_seconds(period), &cfg).unwrap();
        let e1 = 0.5 * s1.v.norm_squared() - MU_EARTH / s1.r.norm();
        assert!(((e1 - e0) / e0).abs() < 1e-3);
    }

    #[test]
    fn staleness_and_decay_guards() {
        let rec = circular_record(4, "X", 550_000.0, 53.0, 0.0, 0.0, epoch());
        assert!(matches!(propagate(&rec, &epoch().add_seconds(8.0 * 86_400.0)), Err(PropagationError::StaleElements { .. })));
        assert!(propagate(&rec, &epoch().add_seconds(-6.9 * 86_400.0)).is_ok());
        let low = circular_record(5, "X", 90_000.0, 53.0, 0.0, 0.0, epoch());
        assert!(matches!(propagate(&low, &epoch()), Err(PropagationError::DecayedOrbit { .. })));
    }

    #[test]
    fn elevation_geometry() {
        let g = GeodeticPosition::from_degrees(43.0, -77.0, 100.0).unwrap();
        let f = frames::enu_frame_at(&g);
        let mk = |r: Vec3| SatStateEcef { norad_id: 1, t: epoch(), r, v: Vec3::zeros(), a: Vec3::zeros() };
        let above = mk(f.origin_ecef + 5.0e5 * f.up());
        assert!((elevation(&above, &f.origin_ecef, &f) - FRAC_PI_2).abs() < 1e-9);
        let level = mk(f.origin_ecef + 5.0e5 * f.east());
        assert!(elevation(&level, &f.origin_ecef, &f).abs() < 1e-12);
        let below = mk(-f.origin_ecef);
        assert!(elevation(&below, &f.origin_ecef, &f) < 0.0);
        let d = f.up() + 0.3 * f.north();
        let near = mk(f.origin_ecef + 1.0e3 * d);
        let far = mk(f.origin_ecef + 1.0e6 * d);
        assert!((elevation(&near, &f.origin_ecef, &f) - elevation(&far, &f.origin_ecef, &f)).abs() < 1e-10);
    }

    fn small_catalog() -> TleCatalog {
        let mut recs = vec![];
        let mut id = 100;
        for plane in 0..12 {
            for slot in 0..12 {
                id += 1;
                recs.push(circular_record(
                    id,
                    "STARLINK-X",
                    550_000.0,
                    53.0,
                    plane as f64 * 30.0,
                    slot as f64 * 30.0 + plane as f64 * 7.0,
                    epoch(),
                ));
            }
        }
        for plane in 0..6 {
            for slot in 0..4 {
                id += 1;
                recs.push(circular_record(
                    id,
                    "GPS BIII-X",
                    20_182_000.0,
                    55.0,
                    plane as f64 * 60.0,
                    slot as f64 * 90.0 + plane as f64 * 15.0,
                    epoch(),
                ));
            }
        }
        TleCatalog::new(recs)
    }

    #[test]
    fn visibility_masks() {
        let cat = small_catalog();
        let g = GeodeticPosition::from_degrees(43.0848638, -77.6786127, 170.0).unwrap();
        let top = visible_satellites(&cat, &g, &epoch(), FRAC_PI_2, FRAC_PI_2).unwrap();
        assert!(top.visible_starlink.is_empty() && top.visible_navstar.is_empty());
        let r = visible_satellites(&cat, &g, &epoch(), 10f64.to_radians(), 28f64.to_radians()).unwrap();
        assert!(r.visible_navstar.len() >= 4, "{}", r.visible_navstar.len());
        for w in r.visible_navstar.windows(2) {
            assert!(w[0].elevation >= w[1].elevation);
        }
        assert!(r.visible_navstar.iter().all(|s| s.elevation >= 10f64.to_radians()));
        assert!(visible_satellites(&cat, &g, &epoch(), -0.1, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn visibility_is_monotone_in_mask(m1 in 0.0f64..1.5, m2 in 0.0f64..1.5, dt in 0.0f64..6000.0) {
            let cat = small_catalog();
            let g = GeodeticPosition::from_degrees(43.0848638, -77.6786127, 170.0).unwrap();
            let t = epoch().add_seconds(dt);
            let (lo, hi) = if m1 <= m2 { (m1, m2) } else { (m2, m1) };
            let a = visible_satellites(&cat, &g, &t, lo, lo).unwrap();
            let b = visible_satellites(&cat, &g, &t, hi, hi).unwrap();
            for s in b.visible_starlink.iter().chain(&b.visible_navstar) {
                prop_assert!(a.visible_starlink.iter().chain(&a.visible_navstar).any(|x| x.norad_id == s.norad_id));
            }
        }
    }
}
