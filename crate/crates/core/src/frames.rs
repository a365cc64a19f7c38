//! Geodetic, ECEF and local East-North-Up frames on the WGS-84 ellipsoid.

use core::f64::consts::{FRAC_PI_2, PI};

use crate::time::UtcInstant;
use crate::{Mat3, Vec3};

/// WGS-84 semi-major axis (m).
pub const WGS84_A: f64 = 6_378_137.0;
/// WGS-84 flattening.
pub const WGS84_F: f64 = 1.0 / 298.257_223_563;
/// WGS-84 semi-minor axis (m).
pub const WGS84_B: f64 = WGS84_A * (1.0 - WGS84_F);
/// First eccentricity squared.
pub const WGS84_E2: f64 = WGS84_F * (2.0 - WGS84_F);
/// Earth rotation rate (rad/s).
pub const EARTH_ROTATION_RATE: f64 = 7.292_115_9e-5;

const MAX_LATITUDE_ITERATIONS: usize = 20;
const LATITUDE_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, thiserror::Error)]
pub enum FrameError {
    #[error("latitude {0} rad outside [-pi/2, pi/2]")]
    InvalidLatitude(f64),
    #[error("non-finite geodetic coordinate")]
    NonFinite,
    #[error("geodetic inversion did not converge (point too close to the Earth's center)")]
    NoConvergence,
}

/// Geodetic coordinates; longitude is kept in (-pi, pi].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeodeticPosition {
    pub lat: f64,
    pub lon: f64,
    pub alt: f64,
}

impl GeodeticPosition {
    pub fn new(lat: f64, lon: f64, alt: f64) -> Result<Self, FrameError> {
        if !(lat.is_finite() && lon.is_finite() && alt.is_finite()) {
            return Err(FrameError::NonFinite);
        }
        if lat.abs() > FRAC_PI_2 {
            return Err(FrameError::InvalidLatitude(lat));
        }
        Ok(GeodeticPosition { lat, lon: wrap_pi(lon), alt })
    }

    pub fn from_degrees(lat_deg: f64, lon_deg: f64, alt: f64) -> Result<Self, FrameError> {
        Self::new(lat_deg.to_radians(), lon_deg.to_radians(), alt)
    }
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_pi(angle: f64) -> f64 {
    let mut a = angle % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Wraps an angle into [0, 2pi).
pub fn wrap_two_pi(angle: f64) -> f64 {
    let mut a = angle % (2.0 * PI);
    if a < 0.0 {
        a += 2.0 * PI;
    }
    if a >= 2.0 * PI {
        a = 0.0;
    }
    a
}

pub fn geodetic_to_ecef(g: &GeodeticPosition) -> Vec3 {
    let (slat, clat) = g.lat.sin_cos();
    let (slon, clon) = g.lon.sin_cos();
    let n = WGS84_A / (1.0 - WGS84_E2 * slat * slat).sqrt();
    Vec3::new((n + g.alt) * clat * clon, (n + g.alt) * clat * slon, (n * (1.0 - WGS84_E2) + g.alt) * slat)
}

/// Inverse of [`geodetic_to_ecef`] by fixed-point iteration on latitude.
pub fn ecef_to_geodetic(r: &Vec3) -> Result<GeodeticPosition, FrameError> {
    if !(r.x.is_finite() && r.y.is_finite() && r.z.is_finite()) {
        return Err(FrameError::NonFinite);
    }
    let p = r.x.hypot(r.y);
    let lon = if p > 0.0 { r.y.atan2(r.x) } else { 0.0 };
    let mut lat = r.z.atan2(p * (1.0 - WGS84_E2));
    let mut converged = false;
    for _ in 0..MAX_LATITUDE_ITERATIONS {
        let s = lat.sin();
        let n = WGS84_A / (1.0 - WGS84_E2 * s * s).sqrt();
        let next = (r.z + WGS84_E2 * n * s).atan2(p);
        let delta = (next - lat).abs();
        lat = next;
        if delta < LATITUDE_TOLERANCE {
            converged = true;
            break;
        }
    }
    if !converged || r.norm() < 1.0 {
        return Err(FrameError::NoConvergence);
    }
    let (s, c) = lat.sin_cos();
    let n = WGS84_A / (1.0 - WGS84_E2 * s * s).sqrt();
    // valid at all latitudes, including the poles
    let alt = p * c + r.z * s - WGS84_A * WGS84_A / n;
    GeodeticPosition::new(lat, lon, alt)
}

/// Local tangent frame anchored at a geodetic point.
///
/// The columns of `rotation` are the East, North and Up unit vectors
/// expressed in ECEF, so `rotation * enu` maps a local vector to ECEF.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnuFrame {
    pub origin_ecef: Vec3,
    pub rotation: Mat3,
}

impl EnuFrame {
    pub fn east(&self) -> Vec3 {
        self.rotation.column(0).into()
    }
    pub fn north(&self) -> Vec3 {
        self.rotation.column(1).into()
    }
    pub fn up(&self) -> Vec3 {
        self.rotation.column(2).into()
    }

    /// ECEF position to local ENU coordinates.
    pub fn ecef_to_enu(&self, r: &Vec3) -> Vec3 {
        self.rotation.transpose() * (r - self.origin_ecef)
    }

    /// Rotates an ECEF direction into ENU (no translation).
    pub fn ecef_vector_to_enu(&self, v: &Vec3) -> Vec3 {
        self.rotation.transpose() * v
    }
}

pub fn enu_frame_at(g: &GeodeticPosition) -> EnuFrame {
    let (slat, clat) = g.lat.sin_cos();
    let (slon, clon) = g.lon.sin_cos();
    let east = Vec3::new(-slon, clon, 0.0);
    let north = Vec3::new(-slat * clon, -slat * slon, clat);
    let up = Vec3::new(clat * clon, clat * slon, slat);
    EnuFrame { origin_ecef: geodetic_to_ecef(g), rotation: Mat3::from_columns(&[east, north, up]) }
}

/// User ECEF position and velocity from local ENU position and velocity.
pub fn enu_to_ecef_state(frame: &EnuFrame, p_enu: &Vec3, v_enu: &Vec3) -> (Vec3, Vec3) {
    (frame.origin_ecef + frame.rotation * p_enu, frame.rotation * v_enu)
}

/// Rotation taking TEME coordinates to ECEF at a given GMST angle.
pub fn teme_to_ecef_rotation(gmst: f64) -> Mat3 {
    let (s, c) = gmst.sin_cos();
    Mat3::new(c, s, 0.0, -s, c, 0.0, 0.0, 0.0, 1.0)
}

pub fn earth_rotation_vector() -> Vec3 {
    Vec3::new(0.0, 0.0, EARTH_ROTATION_RATE)
}

/// Rotates a TEME state into ECEF with a GMST-only Earth rotation.
pub fn teme_to_ecef(r_teme: &Vec3, v_teme: &Vec3, t: &UtcInstant) -> (Vec3, Vec3) {
    let rot = teme_to_ecef_rotation(t.gmst());
    let r = rot * r_teme;
    let v = rot * v_teme - earth_rotation_vector().cross(&r);
    (r, v)
}

/// As [`teme_to_ecef`] but also carries an acceleration, adding the Coriolis
/// and centrifugal terms so the result is the ECEF second derivative.
pub fn teme_to_ecef_with_acceleration(r_teme: &Vec3, v_teme: &Vec3, a_teme: &Vec3, t: &UtcInstant) -> (Vec3, Vec3, Vec3) {
    let rot = teme_to_ecef_rotation(t.gmst());
    let w = earth_rotation_vector();
    let r = rot * r_teme;
    let v = rot * v_teme - w.cross(&r);
    let a = rot * a_teme - 2.0 * w.cross(&v) - w.cross(&w.cross(&r));
    (r, v, a)
}
