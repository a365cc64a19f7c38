//! Measurement models: relative geometry, range acceleration and Doppler
//! rate, GPS pseudorange, differenced one-way range, and their noisy
//! simulation.

use alloc::vec::Vec;

use crate::frames::{enu_to_ecef_state, EnuFrame};
use crate::inertial::NavState;
use crate::noise;
use crate::propagate::SatStateEcef;
use crate::time::UtcInstant;
use crate::Vec3;

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Starlink Ku-band downlink limits (Hz).
pub const KU_BAND: (f64, f64) = (10.7e9, 12.7e9);
/// Default beacon carrier (Hz).
pub const DEFAULT_CARRIER_HZ: f64 = 11.7e9;

#[derive(Clone, Copy, Debug, PartialEq, thiserror::Error)]
pub enum ObservableError {
    #[error("satellite and user positions coincide")]
    ZeroRange,
    #[error("carrier {0} Hz outside the Ku downlink band")]
    CarrierOutOfBand(f64),
}

/// Line-of-sight geometry between a satellite and the user.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeometryObservables {
    pub rho: f64,
    pub u: Vec3,
    pub v_rel: Vec3,
    pub rho_dot: f64,
    pub rho_ddot: f64,
}

/// Range, range rate and range acceleration of `sat` seen from a user at
/// `r_user` moving with `v_user` (ECEF). User acceleration is not modelled.
pub fn geometry(sat: &SatStateEcef, r_user: &Vec3, v_user: &Vec3) -> Result<GeometryObservables, ObservableError> {
    let r = sat.r - r_user;
    let rho = r.norm();
    if !(rho > 0.0) {
        return Err(ObservableError::ZeroRange);
    }
    let u = r / rho;
    let v_rel = sat.v - v_user;
    let rho_dot = u.dot(&v_rel);
    let rho_ddot = u.dot(&sat.a) + (v_rel.norm_squared() - rho_dot * rho_dot) / rho;
    Ok(GeometryObservables { rho, u, v_rel, rho_dot, rho_ddot })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BeaconCarrier {
    pub f_c: f64,
}

impl BeaconCarrier {
    pub const C: f64 = SPEED_OF_LIGHT;

    /// Any positive carrier.
    pub fn new(f_c: f64) -> Self {
        BeaconCarrier { f_c }
    }

    /// A carrier restricted to the Starlink Ku downlink band.
    pub fn starlink(f_c: f64) -> Result<Self, ObservableError> {
        if (KU_BAND.0..=KU_BAND.1).contains(&f_c) {
            Ok(BeaconCarrier { f_c })
        } else {
            Err(ObservableError::CarrierOutOfBand(f_c))
        }
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.f_c
    }
}

impl Default for BeaconCarrier {
    fn default() -> Self {
        BeaconCarrier { f_c: DEFAULT_CARRIER_HZ }
    }
}

/// Doppler rate (Hz/s): `-(f_c / c) * rho_ddot`.
pub fn doppler_rate(geom: &GeometryObservables, carrier: &BeaconCarrier) -> f64 {
    -(carrier.f_c / SPEED_OF_LIGHT) * geom.rho_ddot
}

/// Doppler shift (Hz): `-(f_c / c) * rho_dot`.
pub fn doppler_shift(geom: &GeometryObservables, carrier: &BeaconCarrier) -> f64 {
    -(carrier.f_c / SPEED_OF_LIGHT) * geom.rho_dot
}

pub fn gps_pseudorange(sat: &SatStateEcef, r_user: &Vec3, clock_bias: f64) -> f64 {
    (sat.r - r_user).norm() + clock_bias
}

/// Range to `sat_i` minus range to `sat_ref`.
pub fn ofdm_diff_range(sat_i: &SatStateEcef, sat_ref: &SatStateEcef, r_user: &Vec3) -> f64 {
    (sat_i.r - r_user).norm() - (sat_ref.r - r_user).norm()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MeasurementKind {
    /// Clock-corrected GPS pseudorange (m).
    GpsPseudorange,
    /// LEO beacon Doppler rate (Hz/s).
    LeoDopplerRate,
    /// Differenced one-way range against a reference LEO satellite (m).
    OfdmDiffRange,
    /// One ENU axis of a GPS receiver position fix (m); used when replaying
    /// receiver solutions instead of raw pseudoranges.
    GpsPositionFix(Axis),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Axis {
    East,
    North,
    Up,
}

impl Axis {
    pub fn index(&self) -> usize {
        match self {
            Axis::East => 0,
            Axis::North => 1,
            Axis::Up => 2,
        }
    }
}

impl MeasurementKind {
    pub fn is_gps(&self) -> bool {
        matches!(self, MeasurementKind::GpsPseudorange | MeasurementKind::GpsPositionFix(_))
    }

    fn key(&self) -> u64 {
        match self {
            MeasurementKind::GpsPseudorange => 1,
            MeasurementKind::LeoDopplerRate => 2,
            MeasurementKind::OfdmDiffRange => 3,
            MeasurementKind::GpsPositionFix(a) => 4 + a.index() as u64,
        }
    }
}

/// A scalar measurement.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Measurement {
    pub kind: MeasurementKind,
    pub t: UtcInstant,
    pub sat_id: u32,
    pub value: f64,
    pub sigma: f64,
    /// Reference satellite, only for [`MeasurementKind::OfdmDiffRange`].
    pub ref_sat_id: Option<u32>,
}

/// Satellites available at one simulation epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochSatellites {
    pub t: UtcInstant,
    pub gps: Vec<SatStateEcef>,
    /// LEO satellites with their elevation (rad).
    pub leo: Vec<(SatStateEcef, f64)>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSigmas {
    pub gps_pseudorange: f64,
    pub doppler_rate: f64,
    pub ofdm: f64,
}

impl Default for NoiseSigmas {
    fn default() -> Self {
        NoiseSigmas { gps_pseudorange: 3.0, doppler_rate: 1.5, ofdm: 5.0 }
    }
}

/// Measurement rates in Hz; zero disables a kind.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasurementRates {
    pub gps: f64,
    pub doppler_rate: f64,
    pub ofdm: f64,
}

impl Default for MeasurementRates {
    fn default() -> Self {
        MeasurementRates { gps: 10.0, doppler_rate: 1.0, ofdm: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimulationConfig {
    pub sigmas: NoiseSigmas,
    pub rates: MeasurementRates,
    pub carrier: BeaconCarrier,
    pub seed: u64,
    /// Noise multiplier; zero yields the noiseless model values.
    pub noise_scale: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            sigmas: NoiseSigmas::default(),
            rates: MeasurementRates::default(),
            carrier: BeaconCarrier::default(),
            seed: 0,
            noise_scale: 1.0,
        }
    }
}

/// Raised when fewer than four satellites of a needed kind are in view.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VisibilityWarning {
    pub t: UtcInstant,
    pub kind: MeasurementKind,
    pub visible: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SimulatedMeasurements {
    pub measurements: Vec<Measurement>,
    pub warnings: Vec<VisibilityWarning>,
}

#[derive(Clone, Copy, Debug, PartialEq, thiserror::Error)]
pub enum SimulationError {
    #[error("truth trajectory has {truth} epochs but satellite table has {sats}")]
    LengthMismatch { truth: usize, sats: usize },
    #[error("epoch {0}: truth and satellite timestamps differ")]
    TimeMismatch(usize),
    #[error(transparent)]
    Observable(#[from] ObservableError),
}

fn due(elapsed: f64, rate: f64) -> bool {
    if rate <= 0.0 {
        return false;
    }
    let k = elapsed * rate;
    (k - k.round()).abs() < 1e-6
}

/// Simulates every measurement kind along a truth trajectory.
///
/// `sats[k]` holds the satellites in view at `truth[k].t`. A kind is sampled
/// at epochs where the elapsed time is a multiple of its period. The OFDM
/// reference is the highest-elevation LEO satellite at each epoch. Noise for
/// a measurement is addressed by (seed, kind, satellite, epoch index), so
/// a given measurement gets the same draw whatever else is simulated.
pub fn simulate_measurements(
    frame: &EnuFrame,
    truth: &[NavState],
    sats: &[EpochSatellites],
    cfg: &SimulationConfig,
) -> Result<SimulatedMeasurements, SimulationError> {
    if truth.len() != sats.len() {
        return Err(SimulationError::LengthMismatch { truth: truth.len(), sats: sats.len() });
    }
    let mut out = SimulatedMeasurements::default();
    let Some(first) = truth.first() else { return Ok(out) };
    let t0 = first.t;
    for (k, (nav, epoch)) in truth.iter().zip(sats).enumerate() {
        if nav.t.seconds_since(&epoch.t).abs() > 1e-9 {
            return Err(SimulationError::TimeMismatch(k));
        }
        let elapsed = nav.t.seconds_since(&t0);
        let (r_u, v_u) = enu_to_ecef_state(frame, &nav.p_enu, &nav.v_enu);
        let mut emit = |kind: MeasurementKind, sat_id: u32, ref_sat_id: Option<u32>, model: f64, sigma: f64| {
            let n = noise::keyed_normal(cfg.seed, &[kind.key(), sat_id as u64, k as u64]);
            out.measurements.push(Measurement { kind, t: nav.t, sat_id, value: model + cfg.noise_scale * sigma * n, sigma, ref_sat_id });
        };
        if due(elapsed, cfg.rates.gps) {
            for s in &epoch.gps {
                emit(MeasurementKind::GpsPseudorange, s.norad_id, None, gps_pseudorange(s, &r_u, 0.0), cfg.sigmas.gps_pseudorange);
            }
        }
        if due(elapsed, cfg.rates.doppler_rate) {
            for (s, _) in &epoch.leo {
                let g = geometry(s, &r_u, &v_u)?;
                emit(MeasurementKind::LeoDopplerRate, s.norad_id, None, doppler_rate(&g, &cfg.carrier), cfg.sigmas.doppler_rate);
            }
        }
        if due(elapsed, cfg.rates.ofdm) {
            let reference = epoch.leo.iter().max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.norad_id.cmp(&a.0.norad_id)));
            if let Some((sref, _)) = reference {
                for (s, _) in epoch.leo.iter().filter(|(s, _)| s.norad_id != sref.norad_id) {
                    emit(MeasurementKind::OfdmDiffRange, s.norad_id, Some(sref.norad_id), ofdm_diff_range(s, sref, &r_u), cfg.sigmas.ofdm);
                }
            }
        }
        for (kind, count, rate) in [
            (MeasurementKind::GpsPseudorange, epoch.gps.len(), cfg.rates.gps),
            (MeasurementKind::LeoDopplerRate, epoch.leo.len(), cfg.rates.doppler_rate.max(cfg.rates.ofdm)),
        ] {
            if rate > 0.0 && due(elapsed, rate) && count < 4 {
                out.warnings.push(VisibilityWarning { t: nav.t, kind, visible: count });
            }
        }
    }
    sort_measurements(&mut out.measurements);
    Ok(out)
}

/// Sorts by time, then satellite id, then kind.
pub fn sort_measurements(ms: &mut [Measurement]) {
    ms.sort_by(|a, b| {
        a.t.seconds_since(&b.t)
            .partial_cmp(&0.0)
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(a.sat_id.cmp(&b.sat_id))
            .then(a.kind.cmp(&b.kind))
    });
}
