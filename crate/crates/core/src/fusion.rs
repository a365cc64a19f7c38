//! 9D extended Kalman filter fusing strapdown propagation with GPS
//! pseudoranges (or position fixes), LEO Doppler rates and OFDM differenced
//! ranges.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use nalgebra::{RowSVector, SMatrix};

use crate::estimation::{numeric_gradient, numeric_jacobian, Ekf, EstimationError};
use crate::frames::EnuFrame;
use crate::inertial::{mechanize, ImuSample, InertialError, NavState, StateVector, ANGLE_INDICES};
use crate::observables::{doppler_rate, geometry, BeaconCarrier, Measurement, MeasurementKind, ObservableError};
use crate::propagate::{propagate, SatStateEcef};
use crate::time::UtcInstant;
use crate::tle::TleRecord;
use crate::Vec3;

pub type Covariance = SMatrix<f64, 9, 9>;
pub type MeasurementRow = RowSVector<f64, 9>;

/// Central-difference steps: 1 mm, 0.1 mm/s, 1 µrad.
pub const JACOBIAN_STEPS: [f64; 9] = [1e-3, 1e-3, 1e-3, 1e-4, 1e-4, 1e-4, 1e-6, 1e-6, 1e-6];

/// Time tolerance when matching measurement and filter epochs (s).
pub const TIME_TOLERANCE: f64 = 1e-6;

fn steps() -> StateVector {
    StateVector::from_column_slice(&JACOBIAN_STEPS)
}

/// Which aiding sources feed the filter (the IMU always propagates).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FusionMode {
    GpsImu,
    LeoAlphaImu,
    GpsLeoAlphaImu,
    LeoOfdmImu,
    GpsLeoOfdmImu,
    LeoAlphaOfdmImu,
}

impl FusionMode {
    pub const ALL: [FusionMode; 6] = [
        FusionMode::GpsImu,
        FusionMode::LeoAlphaImu,
        FusionMode::GpsLeoAlphaImu,
        FusionMode::LeoOfdmImu,
        FusionMode::GpsLeoOfdmImu,
        FusionMode::LeoAlphaOfdmImu,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            FusionMode::GpsImu => "gps+imu",
            FusionMode::LeoAlphaImu => "leo-alpha+imu",
            FusionMode::GpsLeoAlphaImu => "gps+leo-alpha+imu",
            FusionMode::LeoOfdmImu => "leo-ofdm+imu",
            FusionMode::GpsLeoOfdmImu => "gps+leo-ofdm+imu",
            FusionMode::LeoAlphaOfdmImu => "leo-alpha+ofdm+imu",
        }
    }

    pub fn uses_gps(&self) -> bool {
        matches!(self, FusionMode::GpsImu | FusionMode::GpsLeoAlphaImu | FusionMode::GpsLeoOfdmImu)
    }

    pub fn uses_alpha(&self) -> bool {
        matches!(self, FusionMode::LeoAlphaImu | FusionMode::GpsLeoAlphaImu | FusionMode::LeoAlphaOfdmImu)
    }

    pub fn uses_ofdm(&self) -> bool {
        matches!(self, FusionMode::LeoOfdmImu | FusionMode::GpsLeoOfdmImu | FusionMode::LeoAlphaOfdmImu)
    }

    pub fn uses_leo(&self) -> bool {
        self.uses_alpha() || self.uses_ofdm()
    }

    pub fn allows(&self, kind: MeasurementKind) -> bool {
        match kind {
            MeasurementKind::GpsPseudorange | MeasurementKind::GpsPositionFix(_) => self.uses_gps(),
            MeasurementKind::LeoDopplerRate => self.uses_alpha(),
            MeasurementKind::OfdmDiffRange => self.uses_ofdm(),
        }
    }

    /// The subset of `ms` this mode consumes, order preserved.
    pub fn select(&self, ms: &[Measurement]) -> Vec<Measurement> {
        ms.iter().filter(|m| self.allows(m.kind)).cloned().collect()
    }
}

impl fmt::Display for FusionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("unknown fusion mode")]
pub struct UnknownMode;

impl FromStr for FusionMode {
    type Err = UnknownMode;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: alloc::string::String =
            s.trim().chars().filter(|c| !c.is_whitespace() && *c != '(' && *c != ')').map(|c| c.to_ascii_lowercase()).collect();
        let norm = norm.replace('_', "-").replace('α', "alpha").replace("leoalpha", "leo-alpha").replace("leoofdm", "leo-ofdm");
        FusionMode::ALL.into_iter().find(|m| m.label() == norm).ok_or(UnknownMode)
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum FusionError {
    #[error("covariance trace {trace:.3e} exceeds cap {cap:.3e}")]
    CovarianceBlowup { trace: f64, cap: f64 },
    #[error("innovation variance is not positive ({0})")]
    SingularInnovation(f64),
    #[error("{kind:?} measurement is not used by mode {mode}")]
    KindModeMismatch { kind: MeasurementKind, mode: FusionMode },
    #[error("no ephemeris for satellite {sat_id}")]
    MissingEphemeris { sat_id: u32 },
    #[error("measurement at {found} does not match filter time {expected}")]
    TimeMismatch { expected: UtcInstant, found: UtcInstant },
    #[error("measurement or IMU stream is not time-sorted")]
    Unsorted,
    #[error(transparent)]
    Inertial(#[from] InertialError),
    #[error(transparent)]
    Observable(#[from] ObservableError),
    #[error(transparent)]
    Estimation(EstimationError),
}

impl From<EstimationError> for FusionError {
    fn from(e: EstimationError) -> Self {
        match e {
            EstimationError::SingularInnovation(s) => FusionError::SingularInnovation(s),
            other => FusionError::Estimation(other),
        }
    }
}

/// Filter error tagged with the output epoch at which it happened.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
#[error("epoch {epoch}: {source}")]
pub struct RunError {
    pub epoch: usize,
    #[source]
    pub source: FusionError,
}

/// Tuning shared by the filter and the bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterConfig {
    /// Accelerometer white-noise PSD ((m/s²)²/Hz), driving the velocity states.
    pub accel_psd: f64,
    /// Gyro white-noise PSD ((rad/s)²/Hz), driving the attitude states.
    pub gyro_psd: f64,
    pub carrier: BeaconCarrier,
    /// Innovation gate in standard deviations; `None` disables gating.
    pub gate_sigmas: Option<f64>,
    /// Largest tolerated trace(P) before the filter is declared divergent.
    pub trace_cap: f64,
}

impl FilterConfig {
    /// Process noise matched to an IMU with the given white-noise densities
    /// (deg/s/√Hz and µg/√Hz).
    pub fn from_imu_densities(gyro_deg_s_rthz: f64, accel_ug_rthz: f64) -> Self {
        let accel = accel_ug_rthz * 1e-6 * crate::inertial::GRAVITY;
        let gyro = gyro_deg_s_rthz.to_radians();
        FilterConfig { accel_psd: accel * accel, gyro_psd: gyro * gyro, ..Default::default() }
    }

    /// Q·dt.
    pub fn process_noise(&self, dt: f64) -> Covariance {
        let mut q = Covariance::zeros();
        for i in 3..6 {
            q[(i, i)] = self.accel_psd * dt;
        }
        for i in 6..9 {
            q[(i, i)] = self.gyro_psd * dt;
        }
        q
    }
}

impl Default for FilterConfig {
    fn default() -> Self {
        let accel = 50.0e-6 * crate::inertial::GRAVITY;
        let gyro = 0.005f64.to_radians();
        FilterConfig {
            accel_psd: accel * accel,
            gyro_psd: gyro * gyro,
            carrier: BeaconCarrier::default(),
            gate_sigmas: Some(5.0),
            trace_cap: 1e10,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FilterState {
    pub nav: NavState,
    pub cov: Covariance,
    pub frame: EnuFrame,
    pub mode: FusionMode,
}

impl FilterState {
    pub fn new(nav: NavState, cov: Covariance, frame: EnuFrame, mode: FusionMode) -> Self {
        FilterState { nav, cov, frame, mode }
    }

    fn ekf(&self) -> Ekf<9> {
        Ekf::new(self.nav.to_vector(), self.cov, &ANGLE_INDICES)
    }

    fn absorb(&mut self, ekf: Ekf<9>) {
        self.nav = NavState::from_vector(self.nav.t, &ekf.x);
        self.cov = ekf.p;
    }
}

/// Diagonal initial covariance from per-axis position, velocity and attitude
/// standard deviations.
pub fn initial_covariance(sigma_p: f64, sigma_v: f64, sigma_theta: f64) -> Covariance {
    let mut p = Covariance::zeros();
    for i in 0..3 {
        p[(i, i)] = sigma_p * sigma_p;
        p[(i + 3, i + 3)] = sigma_v * sigma_v;
        p[(i + 6, i + 6)] = sigma_theta * sigma_theta;
    }
    p
}

/// Mechanization Jacobian `∂ mechanize / ∂ x` by central differences.
pub fn transition_jacobian(nav: &NavState, imu: &ImuSample, dt: f64) -> Result<Covariance, InertialError> {
    let f = |x: &StateVector| mechanize(&NavState::from_vector(nav.t, x), imu, dt).map(|n| n.to_vector());
    numeric_jacobian(f, &nav.to_vector(), &steps(), &ANGLE_INDICES)
}

/// IMU propagation: mechanize the estimate and `P ← F P Fᵀ + Q·dt`.
pub fn predict(fs: &FilterState, imu: &ImuSample, dt: f64, cfg: &FilterConfig) -> Result<FilterState, FusionError> {
    let mut ekf = fs.ekf();
    let t = fs.nav.t;
    ekf.predict_nonlinear(
        |x: &StateVector| mechanize(&NavState::from_vector(t, x), imu, dt).map(|n| n.to_vector()),
        &steps(),
        &cfg.process_noise(dt),
    )?;
    let trace = ekf.p.trace();
    if !(trace <= cfg.trace_cap) {
        return Err(FusionError::CovarianceBlowup { trace, cap: cfg.trace_cap });
    }
    let mut out = fs.clone();
    out.absorb(ekf);
    out.nav.t = t.add_seconds(dt);
    Ok(out)
}

/// Satellites referenced by a measurement.
#[derive(Clone, Copy, Debug, Default)]
pub struct MeasurementGeometry<'a> {
    pub sat: Option<&'a SatStateEcef>,
    pub sat_ref: Option<&'a SatStateEcef>,
}

/// A measurement model split as `h(x) = base + delta(x)`, where `base` does
/// not depend on the state. Range-type models put the large nominal range in
/// `base` so that differencing `delta` keeps full precision.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelTerms {
    pub base: f64,
    pub delta: f64,
}

/// Satellite position relative to the frame origin.
fn local_offset(sat: &SatStateEcef, frame: &EnuFrame) -> Vec3 {
    sat.r - frame.origin_ecef
}

/// `|d - w| - |d|` without cancellation.
fn range_change(d: &Vec3, w: &Vec3) -> f64 {
    (w.norm_squared() - 2.0 * d.dot(w)) / ((d - w).norm() + d.norm())
}

pub fn measurement_terms(
    kind: MeasurementKind,
    x: &StateVector,
    frame: &EnuFrame,
    geom: MeasurementGeometry<'_>,
    carrier: &BeaconCarrier,
) -> Result<ModelTerms, FusionError> {
    let p: Vec3 = x.fixed_rows::<3>(0).into();
    let v: Vec3 = x.fixed_rows::<3>(3).into();
    let need = |s: Option<&SatStateEcef>| s.copied().ok_or(FusionError::MissingEphemeris { sat_id: 0 });
    let w = frame.rotation * p;
    match kind {
        MeasurementKind::GpsPositionFix(axis) => Ok(ModelTerms { base: 0.0, delta: x[axis.index()] }),
        MeasurementKind::GpsPseudorange => {
            let d = local_offset(&need(geom.sat)?, frame);
            Ok(ModelTerms { base: d.norm(), delta: range_change(&d, &w) })
        }
        MeasurementKind::LeoDopplerRate => {
            let sat = need(geom.sat)?;
            let shifted = SatStateEcef { r: local_offset(&sat, frame), ..sat };
            let alpha = doppler_rate(&geometry(&shifted, &w, &(frame.rotation * v))?, carrier);
            Ok(ModelTerms { base: 0.0, delta: alpha })
        }
        MeasurementKind::OfdmDiffRange => {
            let di = local_offset(&need(geom.sat)?, frame);
            let dr = local_offset(&need(geom.sat_ref)?, frame);
            Ok(ModelTerms { base: di.norm() - dr.norm(), delta: range_change(&di, &w) - range_change(&dr, &w) })
        }
    }
}

/// Noise-free model value `h(x)` of a measurement kind at state `x`.
pub fn measurement_model(
    kind: MeasurementKind,
    x: &StateVector,
    frame: &EnuFrame,
    geom: MeasurementGeometry<'_>,
    carrier: &BeaconCarrier,
) -> Result<f64, FusionError> {
    let terms = measurement_terms(kind, x, frame, geom, carrier)?;
    Ok(terms.base + terms.delta)
}

/// Measurement row `∂h/∂x` by central differences.
pub fn measurement_jacobian(
    kind: MeasurementKind,
    x: &StateVector,
    frame: &EnuFrame,
    geom: MeasurementGeometry<'_>,
    carrier: &BeaconCarrier,
) -> Result<MeasurementRow, FusionError> {
    numeric_gradient(|xx: &StateVector| measurement_terms(kind, xx, frame, geom, carrier).map(|t| t.delta), x, &steps())
}

/// Result of one measurement update.
#[derive(Clone, Debug, PartialEq)]
pub struct UpdateResult {
    pub state: FilterState,
    pub innovation: f64,
    pub innovation_variance: f64,
    /// False if the innovation failed the gate (state unchanged).
    pub applied: bool,
}

/// Scalar EKF update (Joseph form) with innovation gating.
pub fn update(fs: &FilterState, m: &Measurement, geom: MeasurementGeometry<'_>, cfg: &FilterConfig) -> Result<UpdateResult, FusionError> {
    if !fs.mode.allows(m.kind) {
        return Err(FusionError::KindModeMismatch { kind: m.kind, mode: fs.mode });
    }
    if m.t.seconds_since(&fs.nav.t).abs() > TIME_TOLERANCE {
        return Err(FusionError::TimeMismatch { expected: fs.nav.t, found: m.t });
    }
    let mut ekf = fs.ekf();
    let base = measurement_terms(m.kind, &ekf.x, &fs.frame, geom, &cfg.carrier)?.base;
    let out = ekf.update_nonlinear(
        m.value - base,
        |x: &StateVector| measurement_terms(m.kind, x, &fs.frame, geom, &cfg.carrier).map(|t| t.delta),
        &steps(),
        m.sigma * m.sigma,
        cfg.gate_sigmas,
    )?;
    let mut state = fs.clone();
    if out.applied {
        state.absorb(ekf);
    }
    Ok(UpdateResult { state, innovation: out.innovation, innovation_variance: out.variance, applied: out.applied })
}

/// Source of satellite states by NORAD id and time.
pub trait SatelliteProvider {
    fn state(&self, sat_id: u32, t: &UtcInstant) -> Option<SatStateEcef>;
}

/// Precomputed satellite states keyed by id and microsecond time.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EphemerisTable {
    states: BTreeMap<(u32, i64), SatStateEcef>,
}

impl EphemerisTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, s: SatStateEcef) {
        self.states.insert((s.norad_id, s.t.micros()), s);
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

impl Extend<SatStateEcef> for EphemerisTable {
    fn extend<I: IntoIterator<Item = SatStateEcef>>(&mut self, iter: I) {
        for s in iter {
            self.insert(s);
        }
    }
}

impl SatelliteProvider for EphemerisTable {
    fn state(&self, sat_id: u32, t: &UtcInstant) -> Option<SatStateEcef> {
        self.states.get(&(sat_id, t.micros())).copied()
    }
}

/// Propagates element sets on demand.
#[derive(Clone, Debug, Default)]
pub struct TleProvider {
    records: BTreeMap<u32, TleRecord>,
}

impl TleProvider {
    pub fn new<'a>(records: impl IntoIterator<Item = &'a TleRecord>) -> Self {
        TleProvider { records: records.into_iter().map(|r| (r.norad_id, r.clone())).collect() }
    }
}

impl SatelliteProvider for TleProvider {
    fn state(&self, sat_id: u32, t: &UtcInstant) -> Option<SatStateEcef> {
        propagate(self.records.get(&sat_id)?, t).ok()
    }
}

/// Looks up the satellites a measurement refers to.
pub fn resolve_geometry<P: SatelliteProvider + ?Sized>(
    m: &Measurement,
    sats: &P,
) -> Result<(Option<SatStateEcef>, Option<SatStateEcef>), FusionError> {
    match m.kind {
        MeasurementKind::GpsPositionFix(_) => Ok((None, None)),
        kind => {
            let sat = sats.state(m.sat_id, &m.t).ok_or(FusionError::MissingEphemeris { sat_id: m.sat_id })?;
            let sat_ref = if kind == MeasurementKind::OfdmDiffRange {
                let id = m.ref_sat_id.ok_or(FusionError::MissingEphemeris { sat_id: 0 })?;
                Some(sats.state(id, &m.t).ok_or(FusionError::MissingEphemeris { sat_id: id })?)
            } else {
                None
            };
            Ok((Some(sat), sat_ref))
        }
    }
}

/// Filter output: one entry per IMU epoch, starting with the initial state.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FilterOutput {
    pub states: Vec<NavState>,
    pub covariances: Vec<Covariance>,
    pub applied: usize,
    pub gated: usize,
    /// Measurements later than the last IMU epoch.
    pub unused: usize,
}

impl FilterOutput {
    pub fn covariance_diagonals(&self) -> Vec<StateVector> {
        self.covariances.iter().map(|p| p.diagonal()).collect()
    }
}

/// Event-driven filter loop.
///
/// Each IMU sample is held from its own timestamp to the next one (the last
/// sample spans the previous spacing). Measurements falling inside an
/// interval split the propagation; those at an epoch are applied before the
/// epoch is emitted.
pub fn run_filter<P: SatelliteProvider + ?Sized>(
    imu: &[ImuSample],
    meas: &[Measurement],
    sats: &P,
    init: FilterState,
    cfg: &FilterConfig,
) -> Result<FilterOutput, RunError> {
    let mut out = FilterOutput::default();
    let err = |epoch: usize| move |source: FusionError| RunError { epoch, source };
    if meas.windows(2).any(|w| w[1].t.seconds_since(&w[0].t) < -TIME_TOLERANCE)
        || imu.windows(2).any(|w| !(w[1].t.seconds_since(&w[0].t) > 0.0))
    {
        return Err(err(0)(FusionError::Unsorted));
    }
    let mut fs = init;
    let mut next = 0usize;
    let apply_due = |fs: &mut FilterState, next: &mut usize, out: &mut FilterOutput, epoch: usize| -> Result<(), RunError> {
        while *next < meas.len() && meas[*next].t.seconds_since(&fs.nav.t) <= TIME_TOLERANCE {
            let m = &meas[*next];
            *next += 1;
            if m.t.seconds_since(&fs.nav.t) < -TIME_TOLERANCE {
                // predates the filter start
                out.unused += 1;
                continue;
            }
            let (sat, sat_ref) = resolve_geometry(m, sats).map_err(err(epoch))?;
            let geom = MeasurementGeometry { sat: sat.as_ref(), sat_ref: sat_ref.as_ref() };
            let res = update(fs, m, geom, cfg).map_err(err(epoch))?;
            if res.applied {
                out.applied += 1;
            } else {
                out.gated += 1;
            }
            *fs = res.state;
        }
        Ok(())
    };
    apply_due(&mut fs, &mut next, &mut out, 0)?;
    out.states.push(fs.nav);
    out.covariances.push(fs.cov);
    for (k, sample) in imu.iter().enumerate() {
        let epoch = k + 1;
        let t_end = match imu.get(k + 1) {
            Some(s) => s.t,
            None if k > 0 => sample.t.add_seconds(sample.t.seconds_since(&imu[k - 1].t)),
            None => break,
        };
        while next < meas.len() && meas[next].t.seconds_since(&t_end) < -TIME_TOLERANCE {
            let dt = meas[next].t.seconds_since(&fs.nav.t);
            if dt > TIME_TOLERANCE {
                fs = predict(&fs, sample, dt, cfg).map_err(err(epoch))?;
            }
            apply_due(&mut fs, &mut next, &mut out, epoch)?;
        }
        let dt = t_end.seconds_since(&fs.nav.t);
        if dt > TIME_TOLERANCE {
            fs = predict(&fs, sample, dt, cfg).map_err(err(epoch))?;
        }
        fs.nav.t = t_end;
        apply_due(&mut fs, &mut next, &mut out, epoch)?;
        out.states.push(fs.nav);
        out.covariances.push(fs.cov);
    }
    out.unused += meas.len() - next;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::enu_to_ecef_state;
    use crate::frames::{enu_frame_at, GeodeticPosition};
    use crate::inertial::{synthesize_imu, trajectories, ImuNoiseModel};
    use crate::observables::Axis;
    use crate::observables::{doppler_rate as alpha_of, geometry as geometry_of, gps_pseudorange, ofdm_diff_range};
    use crate::propagate::test_support::{circular_record, epoch};
    use alloc::vec;
    use core::f64::consts::FRAC_PI_2;

    fn frame() -> EnuFrame {
        enu_frame_at(&GeodeticPosition::from_degrees(43.0848638, -77.6786127, 170.0).unwrap())
    }

    fn static_truth() -> Vec<NavState> {
        trajectories::stationary(epoch(), Vec3::zeros(), Vec3::new(0.0, 0.0, FRAC_PI_2), 20.0, 10.0)
    }

    fn state(nav: NavState, mode: FusionMode) -> FilterState {
        FilterState::new(nav, initial_covariance(5.0, 0.5, 1f64.to_radians()), frame(), mode)
    }

    /// LEO satellites high above the site, to exercise range-type updates.
    fn leo_sats(t: &UtcInstant) -> Vec<SatStateEcef> {
        let f = frame();
        (0..6)
            .map(|k| {
                let rec = circular_record(100 + k, "STARLINK-T", 550_000.0, 53.0, 60.0 * k as f64, 30.0 * k as f64, epoch());
                let mut s = propagate(&rec, t).unwrap();
                // place the satellite over the site, keep the orbital velocity
                let dir = Vec3::new((k as f64).cos() * 0.3, (k as f64).sin() * 0.3, 1.0).normalize();
                s.r = f.origin_ecef + f.rotation * dir * 900_000.0;
                s
            })
            .collect()
    }

    #[test]
    fn split_models_agree_with_observables() {
        let t = epoch();
        let f = frame();
        let sats = leo_sats(&t);
        let cfg = FilterConfig::default();
        let nav = NavState::new(t, Vec3::new(12.0, -7.0, 3.0), Vec3::new(1.0, 2.0, -0.5), Vec3::zeros());
        let x = nav.to_vector();
        let (r_u, v_u) = enu_to_ecef_state(&f, &nav.p_enu, &nav.v_enu);
        let one = MeasurementGeometry { sat: Some(&sats[0]), sat_ref: None };
        let two = MeasurementGeometry { sat: Some(&sats[1]), sat_ref: Some(&sats[0]) };
        let pr = measurement_model(MeasurementKind::GpsPseudorange, &x, &f, one, &cfg.carrier).unwrap();
        assert!((pr - gps_pseudorange(&sats[0], &r_u, 0.0)).abs() < 1e-6);
        let a = measurement_model(MeasurementKind::LeoDopplerRate, &x, &f, one, &cfg.carrier).unwrap();
        let expected = alpha_of(&geometry_of(&sats[0], &r_u, &v_u).unwrap(), &cfg.carrier);
        assert!((a - expected).abs() < 1e-6 * expected.abs());
        let d = measurement_model(MeasurementKind::OfdmDiffRange, &x, &f, two, &cfg.carrier).unwrap();
        assert!((d - ofdm_diff_range(&sats[1], &sats[0], &r_u)).abs() < 1e-6);
    }

    #[test]
    fn mode_labels_round_trip() {
        for m in FusionMode::ALL {
            assert_eq!(m.label().parse::<FusionMode>(), Ok(m));
        }
        assert_eq!("GPS+LEO(α)+IMU".parse::<FusionMode>(), Ok(FusionMode::GpsLeoAlphaImu));
        assert!("gps".parse::<FusionMode>().is_err());
    }

    #[test]
    fn static_predict_without_noise_keeps_nav() {
        let truth = static_truth();
        let imu = synthesize_imu(&truth, &ImuNoiseModel::NOISELESS, 10.0, 1).unwrap();
        let cfg = FilterConfig { accel_psd: 0.0, gyro_psd: 0.0, ..Default::default() };
        let fs = state(truth[0], FusionMode::GpsImu);
        let next = predict(&fs, &imu[0], 0.1, &cfg).unwrap();
        assert!(next.nav.difference(&truth[1]).norm() < 1e-9);
        // F has the identity structure plus dt coupling from velocity to position
        let f = transition_jacobian(&truth[0], &imu[0], 0.1).unwrap();
        assert!((f[(0, 3)] - 0.1).abs() < 1e-9 && (f[(0, 0)] - 1.0).abs() < 1e-9);
        assert!((next.cov - f * fs.cov * f.transpose()).norm() < 1e-9);
    }

    #[test]
    fn trace_grows_under_repeated_predicts() {
        let truth = static_truth();
        let imu = synthesize_imu(&truth, &ImuNoiseModel::NOISELESS, 10.0, 1).unwrap();
        let cfg = FilterConfig::default();
        let mut fs = state(truth[0], FusionMode::GpsImu);
        for s in &imu {
            let next = predict(&fs, s, 0.1, &cfg).unwrap();
            assert!(next.cov.trace() > fs.cov.trace());
            fs = next;
        }
        let tight = FilterConfig { trace_cap: 1.0, ..cfg };
        assert!(matches!(predict(&fs, &imu[0], 0.1, &tight), Err(FusionError::CovarianceBlowup { .. })));
    }

    #[test]
    fn jacobian_agrees_with_independent_step() {
        let truth = trajectories::circle(epoch(), Vec3::zeros(), 50.0, 0.2, 2.0, 10.0);
        let imu = synthesize_imu(&truth, &ImuNoiseModel::NOISELESS, 10.0, 1).unwrap();
        let f = transition_jacobian(&truth[5], &imu[5], 0.1).unwrap();
        let coarse = numeric_jacobian(
            |x: &StateVector| mechanize(&NavState::from_vector(truth[5].t, x), &imu[5], 0.1).map(|n| n.to_vector()),
            &truth[5].to_vector(),
            &(steps() * 10.0),
            &ANGLE_INDICES,
        )
        .unwrap();
        for (a, b) in f.iter().zip(coarse.iter()) {
            assert!((a - b).abs() <= 1e-4 * a.abs().max(1e-3), "{a} vs {b}");
        }
    }

    #[test]
    fn zero_innovation_leaves_state_and_shrinks_covariance() {
        let t = epoch();
        let nav = NavState::new(t, Vec3::new(1.0, 2.0, 3.0), Vec3::zeros(), Vec3::new(0.0, 0.0, FRAC_PI_2));
        let fs = state(nav, FusionMode::GpsLeoAlphaImu);
        let cfg = FilterConfig::default();
        let sats = leo_sats(&t);
        let geom = MeasurementGeometry { sat: Some(&sats[0]), sat_ref: None };
        let z = measurement_model(MeasurementKind::LeoDopplerRate, &nav.to_vector(), &fs.frame, geom, &cfg.carrier).unwrap();
        let m = Measurement { kind: MeasurementKind::LeoDopplerRate, t, sat_id: 100, value: z, sigma: 1.5, ref_sat_id: None };
        let res = update(&fs, &m, geom, &cfg).unwrap();
        assert!(res.applied);
        assert!(res.state.nav.difference(&nav).norm() < 1e-12);
        assert!(res.state.cov.trace() <= fs.cov.trace());
        // Doppler rate informs velocity
        let vel = |p: &Covariance| p.fixed_view::<3, 3>(3, 3).trace();
        assert!(vel(&res.state.cov) < vel(&fs.cov));
    }

    #[test]
    fn pseudorange_update_matches_scalar_kalman() {
        let t = epoch();
        let nav = NavState::new(t, Vec3::zeros(), Vec3::zeros(), Vec3::new(0.0, 0.0, FRAC_PI_2));
        let fs = state(nav, FusionMode::GpsImu);
        let cfg = FilterConfig::default();
        let mut gps = leo_sats(&t)[1];
        gps.r = fs.frame.origin_ecef + fs.frame.rotation * Vec3::new(5e6, 8e6, 1.8e7);
        let geom = MeasurementGeometry { sat: Some(&gps), sat_ref: None };
        let x = nav.to_vector();
        let z = measurement_model(MeasurementKind::GpsPseudorange, &x, &fs.frame, geom, &cfg.carrier).unwrap() + 4.0;
        let m = Measurement { kind: MeasurementKind::GpsPseudorange, t, sat_id: 1, value: z, sigma: 3.0, ref_sat_id: None };
        let res = update(&fs, &m, geom, &cfg).unwrap();
        // closed form on the line-of-sight direction
        let u_enu = -fs.frame.rotation.transpose() * (gps.r - fs.frame.origin_ecef).normalize();
        let mut h = MeasurementRow::zeros();
        h.fixed_columns_mut::<3>(0).copy_from(&u_enu.transpose());
        let s = (h * fs.cov * h.transpose())[0] + 9.0;
        let k = fs.cov * h.transpose() / s;
        let x_expected = x + k * 4.0;
        let p_expected = fs.cov - k * h * fs.cov;
        assert!(
            (res.state.nav.to_vector() - x_expected).norm() <= 1e-6 * x_expected.norm().max(1.0),
            "{} {}",
            res.state.nav.to_vector().transpose(),
            x_expected.transpose()
        );
        assert!((res.state.cov - p_expected).norm() <= 1e-6 * p_expected.norm());
    }

    #[test]
    fn mode_mismatch_gating_and_time_checks() {
        let t = epoch();
        let nav = static_truth()[0];
        let fs = state(nav, FusionMode::LeoAlphaImu);
        let cfg = FilterConfig::default();
        let fix = Measurement { kind: MeasurementKind::GpsPositionFix(Axis::East), t, sat_id: 0, value: 0.0, sigma: 1.0, ref_sat_id: None };
        let none = MeasurementGeometry { sat: None, sat_ref: None };
        assert!(matches!(update(&fs, &fix, none, &cfg), Err(FusionError::KindModeMismatch { .. })));
        let gps = state(nav, FusionMode::GpsImu);
        let outlier = Measurement { value: 100.0, ..fix };
        let res = update(&gps, &outlier, none, &cfg).unwrap();
        assert!(!res.applied);
        assert_eq!(res.state, gps);
        let late = Measurement { t: t.add_seconds(1.0), ..fix };
        assert!(matches!(update(&gps, &late, none, &cfg), Err(FusionError::TimeMismatch { .. })));
    }

    #[test]
    fn no_measurements_is_dead_reckoning() {
        let truth = trajectories::circle(epoch(), Vec3::zeros(), 30.0, 0.1, 5.0, 10.0);
        let imu = synthesize_imu(&truth, &ImuNoiseModel::tactical(10.0), 10.0, 3).unwrap();
        let out = run_filter(&imu, &[], &EphemerisTable::new(), state(truth[0], FusionMode::GpsImu), &FilterConfig::default()).unwrap();
        let mut nav = truth[0];
        assert_eq!(out.states.len(), truth.len());
        for (k, s) in imu.iter().enumerate() {
            nav = mechanize(&nav, s, 0.1).unwrap();
            assert!(out.states[k + 1].difference(&nav).norm() < 1e-9, "{} {}", k, out.states[k + 1].difference(&nav));
        }
    }

    fn noiseless_run(order_reversed: bool) -> FilterOutput {
        let truth = static_truth();
        let imu = synthesize_imu(&truth, &ImuNoiseModel::NOISELESS, 10.0, 1).unwrap();
        let mut table = EphemerisTable::new();
        let mut meas = vec![];
        let f = frame();
        let cfg = FilterConfig::default();
        for nav in truth.iter().step_by(10) {
            let sats = leo_sats(&nav.t);
            table.extend(sats.iter().copied());
            let mut epoch_meas = vec![];
            for s in &sats {
                let geom = MeasurementGeometry { sat: Some(s), sat_ref: None };
                let z = measurement_model(MeasurementKind::LeoDopplerRate, &nav.to_vector(), &f, geom, &cfg.carrier).unwrap();
                epoch_meas.push(Measurement {
                    kind: MeasurementKind::LeoDopplerRate,
                    t: nav.t,
                    sat_id: s.norad_id,
                    value: z,
                    sigma: 1.5,
                    ref_sat_id: None,
                });
            }
            if order_reversed {
                epoch_meas.reverse();
            }
            meas.extend(epoch_meas);
        }
        run_filter(&imu, &meas, &table, state(truth[0], FusionMode::LeoAlphaImu), &cfg).unwrap()
    }

    #[test]
    fn noiseless_run_tracks_truth_and_is_order_invariant() {
        let a = noiseless_run(false);
        let b = noiseless_run(true);
        let truth = static_truth();
        assert_eq!(a.applied, 6 * 21);
        for ((x, y), t) in a.states.iter().zip(&b.states).zip(&truth) {
            assert!(x.difference(t).norm() < 1e-6);
            assert!(x.difference(y).norm() < 1e-9);
        }
        for p in &a.covariances {
            assert!((p - p.transpose()).norm() <= 1e-9 * p.norm());
            assert!(p.symmetric_eigenvalues().min() >= -1e-9 * p.trace());
        }
    }

    #[test]
    fn measurements_between_imu_epochs_split_the_interval() {
        let truth = static_truth();
        let imu = synthesize_imu(&truth, &ImuNoiseModel::NOISELESS, 10.0, 1).unwrap();
        let t = truth[3].t.add_seconds(0.05);
        let meas =
            vec![Measurement { kind: MeasurementKind::GpsPositionFix(Axis::Up), t, sat_id: 0, value: 0.0, sigma: 1.0, ref_sat_id: None }];
        let out = run_filter(&imu, &meas, &EphemerisTable::new(), state(truth[0], FusionMode::GpsImu), &FilterConfig::default()).unwrap();
        assert_eq!(out.applied, 1);
        assert!(out.covariances[4][(2, 2)] < out.covariances[3][(2, 2)]);
        assert!((out.states[4].t.seconds_since(&truth[4].t)).abs() < 1e-9);
    }
}
