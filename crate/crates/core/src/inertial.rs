//! Strapdown mechanization in a local ENU frame and synthetic IMU generation.
//!
//! Attitude is kept as Z-Y-X Euler angles `[roll, pitch, yaw]` describing the
//! body (forward-left-up) axes relative to ENU, with yaw measured
//! counter-clockwise from East. Earth rate and transport rate are ignored.

use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;

use nalgebra::SVector;

use crate::frames::wrap_pi;
use crate::noise;
use crate::time::UtcInstant;
use crate::{Mat3, Vec3};

/// Standard gravity (m/s^2).
pub const GRAVITY: f64 = 9.806_65;
/// Pitch margin from +-pi/2 treated as gimbal lock.
pub const GIMBAL_LOCK_MARGIN: f64 = 1e-3;
/// Longest accepted mechanization step (s).
pub const MAX_STEP: f64 = 0.5;

pub type StateVector = SVector<f64, 9>;

/// Position and velocity blocks are ENU; the last three entries are Euler
/// angles.
pub const ANGLE_INDICES: [usize; 2] = [6, 8];

#[derive(Clone, Copy, Debug, PartialEq, thiserror::Error)]
pub enum InertialError {
    #[error("pitch {0} rad is within the gimbal-lock margin")]
    GimbalLock(f64),
    #[error("mechanization step {0} s outside (0, {MAX_STEP}]")]
    InvalidStep(f64),
    #[error("trajectory spacing {spacing} s incompatible with IMU rate {rate} Hz")]
    IncompatibleRate { spacing: f64, rate: f64 },
}

/// 9D navigation state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NavState {
    pub t: UtcInstant,
    pub p_enu: Vec3,
    pub v_enu: Vec3,
    /// roll, pitch, yaw (rad)
    pub theta: Vec3,
}

impl NavState {
    pub fn new(t: UtcInstant, p_enu: Vec3, v_enu: Vec3, theta: Vec3) -> Self {
        NavState { t, p_enu, v_enu, theta: wrap_attitude(theta) }
    }

    pub fn to_vector(&self) -> StateVector {
        let mut x = StateVector::zeros();
        x.fixed_rows_mut::<3>(0).copy_from(&self.p_enu);
        x.fixed_rows_mut::<3>(3).copy_from(&self.v_enu);
        x.fixed_rows_mut::<3>(6).copy_from(&self.theta);
        x
    }

    pub fn from_vector(t: UtcInstant, x: &StateVector) -> Self {
        NavState::new(t, x.fixed_rows::<3>(0).into(), x.fixed_rows::<3>(3).into(), x.fixed_rows::<3>(6).into())
    }

    /// `self - other` with roll and yaw differences wrapped to (-pi, pi].
    pub fn difference(&self, other: &NavState) -> StateVector {
        let mut d = self.to_vector() - other.to_vector();
        wrap_angle_components(&mut d);
        d
    }

    /// `self + dx`, re-wrapping the angles.
    pub fn retract(&self, dx: &StateVector) -> NavState {
        NavState::from_vector(self.t, &(self.to_vector() + dx))
    }

    /// Body-to-ENU rotation.
    pub fn body_to_enu(&self) -> Mat3 {
        body_to_enu(&self.theta)
    }
}

pub fn wrap_angle_components(x: &mut StateVector) {
    for i in ANGLE_INDICES {
        x[i] = wrap_pi(x[i]);
    }
}

fn wrap_attitude(theta: Vec3) -> Vec3 {
    Vec3::new(wrap_pi(theta.x), theta.y, wrap_pi(theta.z))
}

/// Rz(yaw) Ry(pitch) Rx(roll).
pub fn body_to_enu(theta: &Vec3) -> Mat3 {
    let (sr, cr) = theta.x.sin_cos();
    let (sp, cp) = theta.y.sin_cos();
    let (sy, cy) = theta.z.sin_cos();
    Mat3::new(
        cy * cp,
        cy * sp * sr - sy * cr,
        cy * sp * cr + sy * sr,
        sy * cp,
        sy * sp * sr + cy * cr,
        sy * sp * cr - cy * sr,
        -sp,
        cp * sr,
        cp * cr,
    )
}

/// Euler-angle rates from body rates.
fn euler_rates(theta: &Vec3, omega: &Vec3) -> Vec3 {
    let (sr, cr) = theta.x.sin_cos();
    let (tp, cp) = (theta.y.tan(), theta.y.cos());
    let a = omega.y * sr + omega.z * cr;
    Vec3::new(omega.x + a * tp, omega.y * cr - omega.z * sr, a / cp)
}

/// Body rates from Euler-angle rates.
fn body_rates(theta: &Vec3, rates: &Vec3) -> Vec3 {
    let (sr, cr) = theta.x.sin_cos();
    let (sp, cp) = theta.y.sin_cos();
    Vec3::new(rates.x - rates.z * sp, rates.y * cr + rates.z * sr * cp, -rates.y * sr + rates.z * cr * cp)
}

fn check_pitch(pitch: f64) -> Result<(), InertialError> {
    if pitch.abs() > FRAC_PI_2 - GIMBAL_LOCK_MARGIN {
        Err(InertialError::GimbalLock(pitch))
    } else {
        Ok(())
    }
}

/// One IMU reading: specific force and angular rate, both in body axes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImuSample {
    pub t: UtcInstant,
    pub accel: Vec3,
    pub gyro: Vec3,
}

/// Gravity vector in ENU.
pub fn gravity_enu() -> Vec3 {
    Vec3::new(0.0, 0.0, -GRAVITY)
}

/// Propagates the navigation state through one IMU interval.
///
/// Attitude and the specific-force rotation use a midpoint rule, position the
/// trapezoidal rule, so the scheme is second order for a held sample.
pub fn mechanize(state: &NavState, sample: &ImuSample, dt: f64) -> Result<NavState, InertialError> {
    if !(dt > 0.0 && dt <= MAX_STEP) {
        return Err(InertialError::InvalidStep(dt));
    }
    check_pitch(state.theta.y)?;
    let theta_mid = state.theta + 0.5 * dt * euler_rates(&state.theta, &sample.gyro);
    check_pitch(theta_mid.y)?;
    let theta = state.theta + dt * euler_rates(&theta_mid, &sample.gyro);
    let accel_enu = body_to_enu(&theta_mid) * sample.accel + gravity_enu();
    let v = state.v_enu + dt * accel_enu;
    let p = state.p_enu + 0.5 * dt * (state.v_enu + v);
    Ok(NavState::new(state.t.add_seconds(dt), p, v, theta))
}

/// Sensor error model applied when synthesizing IMU data. Standard deviations
/// are per sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImuNoiseModel {
    pub accel_noise_std: f64,
    pub gyro_noise_std: f64,
    pub accel_bias: Vec3,
    pub gyro_bias: Vec3,
}

impl ImuNoiseModel {
    pub const NOISELESS: ImuNoiseModel = ImuNoiseModel {
        accel_noise_std: 0.0,
        gyro_noise_std: 0.0,
        accel_bias: Vec3::new(0.0, 0.0, 0.0),
        gyro_bias: Vec3::new(0.0, 0.0, 0.0),
    };

    /// Per-sample model from white-noise densities (deg/s/sqrt(Hz) and
    /// micro-g/sqrt(Hz)) sampled at `rate` Hz.
    pub fn from_densities(gyro_deg_s_rthz: f64, accel_ug_rthz: f64, rate: f64) -> Self {
        ImuNoiseModel {
            accel_noise_std: accel_ug_rthz * 1e-6 * GRAVITY * rate.sqrt(),
            gyro_noise_std: gyro_deg_s_rthz.to_radians() * rate.sqrt(),
            accel_bias: Vec3::zeros(),
            gyro_bias: Vec3::zeros(),
        }
    }

    /// Tactical-grade defaults: 0.005 deg/s/sqrt(Hz) gyro, 50 micro-g/sqrt(Hz)
    /// accelerometer.
    pub fn tactical(rate: f64) -> Self {
        Self::from_densities(0.005, 50.0, rate)
    }
}

/// Inverse mechanization: IMU samples that drive [`mechanize`] along `truth`.
///
/// `truth` must be uniformly spaced at `1 / rate`. One sample is produced per
/// interval, stamped at the interval start. Noise is drawn from a stream
/// derived from `seed`.
pub fn synthesize_imu(truth: &[NavState], noise_model: &ImuNoiseModel, rate: f64, seed: u64) -> Result<Vec<ImuSample>, InertialError> {
    let step = 1.0 / rate;
    let mut rng = noise::rng_for(seed, &[0x494D_5500]);
    let mut out = Vec::with_capacity(truth.len().saturating_sub(1));
    for pair in truth.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let dt = b.t.seconds_since(&a.t);
        if (dt - step).abs() > 1e-6 {
            return Err(InertialError::IncompatibleRate { spacing: dt, rate });
        }
        check_pitch(a.theta.y)?;
        let mut dtheta = b.theta - a.theta;
        dtheta.x = wrap_pi(dtheta.x);
        dtheta.z = wrap_pi(dtheta.z);
        let target = dtheta / dt;
        // fixed point for the midpoint attitude rule
        let mut gyro = body_rates(&a.theta, &target);
        for _ in 0..50 {
            let mid = a.theta + 0.5 * dt * euler_rates(&a.theta, &gyro);
            let next = body_rates(&mid, &target);
            let delta = (next - gyro).norm();
            gyro = next;
            if delta < 1e-15 {
                break;
            }
        }
        let mid = a.theta + 0.5 * dt * euler_rates(&a.theta, &gyro);
        let accel = body_to_enu(&mid).transpose() * ((b.v_enu - a.v_enu) / dt - gravity_enu());
        let mut sample = ImuSample { t: a.t, accel, gyro };
        if noise_model.accel_noise_std > 0.0 || noise_model.gyro_noise_std > 0.0 {
            for i in 0..3 {
                sample.accel[i] += noise_model.accel_noise_std * noise::standard_normal(&mut rng);
            }
            for i in 0..3 {
                sample.gyro[i] += noise_model.gyro_noise_std * noise::standard_normal(&mut rng);
            }
        }
        sample.accel += noise_model.accel_bias;
        sample.gyro += noise_model.gyro_bias;
        out.push(sample);
    }
    Ok(out)
}

/// Truth trajectory helpers used by scenarios and tests.
pub mod trajectories {
    use super::*;

    fn epochs(t0: UtcInstant, duration: f64, rate: f64) -> impl Iterator<Item = (f64, UtcInstant)> {
        let n = (duration * rate).round() as usize;
        (0..=n).map(move |k| {
            let s = k as f64 / rate;
            (s, t0.add_seconds(s))
        })
    }

    /// Stationary user at `p` with fixed attitude.
    pub fn stationary(t0: UtcInstant, p: Vec3, theta: Vec3, duration: f64, rate: f64) -> Vec<NavState> {
        epochs(t0, duration, rate).map(|(_, t)| NavState::new(t, p, Vec3::zeros(), theta)).collect()
    }

    /// Straight-line motion at constant velocity, heading along the velocity.
    pub fn constant_velocity(t0: UtcInstant, p0: Vec3, v: Vec3, duration: f64, rate: f64) -> Vec<NavState> {
        let yaw = v.y.atan2(v.x);
        epochs(t0, duration, rate).map(|(s, t)| NavState::new(t, p0 + v * s, v, Vec3::new(0.0, 0.0, yaw))).collect()
    }

    /// Level circle of `radius` about `center`, angular rate `omega`
    /// (counter-clockwise seen from above), body x along the velocity.
    pub fn circle(t0: UtcInstant, center: Vec3, radius: f64, omega: f64, duration: f64, rate: f64) -> Vec<NavState> {
        epochs(t0, duration, rate)
            .map(|(s, t)| {
                let (sn, cs) = (omega * s).sin_cos();
                NavState::new(
                    t,
                    center + radius * Vec3::new(cs, sn, 0.0),
                    radius * omega * Vec3::new(-sn, cs, 0.0),
                    Vec3::new(0.0, 0.0, omega * s + FRAC_PI_2),
                )
            })
            .collect()
    }
}
