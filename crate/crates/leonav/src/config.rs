//! Scenario configuration: a versioned JSON document.

use std::path::Path;

use leonav_core::fusion::{FilterConfig, FusionMode};
use leonav_core::observables::{BeaconCarrier, MeasurementRates, NoiseSigmas, KU_BAND};
use leonav_core::{GeodeticPosition, ImuNoiseModel, UtcInstant, Vec3};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Site {
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub alt_m: f64,
}

impl Site {
    /// Rochester, NY.
    pub fn rochester() -> Self {
        Site { lat_deg: 43.0848638, lon_deg: -77.6786127, alt_m: 170.0 }
    }

    pub fn geodetic(&self) -> Result<GeodeticPosition> {
        GeodeticPosition::from_degrees(self.lat_deg, self.lon_deg, self.alt_m).map_err(|e| HarnessError::Config(format!("site: {e}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sigmas {
    pub gps_pseudorange_m: f64,
    pub doppler_rate_hz_s: f64,
    pub ofdm_m: f64,
    /// Per-axis std of GPS position fixes (replay).
    pub gps_fix_m: f64,
}

impl Default for Sigmas {
    fn default() -> Self {
        let n = NoiseSigmas::default();
        Sigmas { gps_pseudorange_m: n.gps_pseudorange, doppler_rate_hz_s: n.doppler_rate, ofdm_m: n.ofdm, gps_fix_m: 2.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Rates {
    pub imu_hz: f64,
    pub gps_hz: f64,
    pub doppler_rate_hz: f64,
    pub ofdm_hz: f64,
}

impl Default for Rates {
    fn default() -> Self {
        let r = MeasurementRates::default();
        Rates { imu_hz: 10.0, gps_hz: r.gps, doppler_rate_hz: r.doppler_rate, ofdm_hz: r.ofdm }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImuGrade {
    pub gyro_deg_s_rthz: f64,
    pub accel_ug_rthz: f64,
}

impl Default for ImuGrade {
    fn default() -> Self {
        ImuGrade { gyro_deg_s_rthz: 0.005, accel_ug_rthz: 50.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitErrors {
    pub sigma_pos_m: f64,
    pub sigma_vel_mps: f64,
    pub sigma_att_deg: f64,
}

impl Default for InitErrors {
    fn default() -> Self {
        InitErrors { sigma_pos_m: 5.0, sigma_vel_mps: 0.5, sigma_att_deg: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReplaySettings {
    /// Subtracted from ridge frequencies before rate estimation (Hz).
    pub f_ref_hz: f64,
    /// Accelerometer-leveling window at the start of the log (s).
    pub alignment_s: f64,
    /// Velocity std after the static alignment (m/s).
    pub aligned_sigma_vel_mps: f64,
    /// Roll/pitch std after leveling (rad).
    pub aligned_sigma_tilt_rad: f64,
    /// Surveyed antenna position used as truth, when known.
    pub survey: Option<Site>,
}

impl Default for ReplaySettings {
    fn default() -> Self {
        ReplaySettings { f_ref_hz: 0.0, alignment_s: 1.0, aligned_sigma_vel_mps: 0.05, aligned_sigma_tilt_rad: 1e-3, survey: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub user: Site,
    /// roll, pitch, yaw (rad)
    pub attitude0_rad: [f64; 3],
    /// ISO-8601 UTC start of the window.
    pub start: String,
    pub duration_s: f64,
    /// TLE file; the built-in synthetic catalog when absent.
    pub tle_path: Option<String>,
    pub mask_gps_deg: f64,
    pub mask_leo_deg: f64,
    pub n_leo: Vec<usize>,
    pub modes: Vec<String>,
    pub sigmas: Sigmas,
    pub rates: Rates,
    pub imu: ImuGrade,
    pub init: InitErrors,
    pub carrier_hz: f64,
    /// Innovation gate (sigmas); `null` disables gating.
    pub gate_sigmas: Option<f64>,
    pub n_runs: usize,
    pub seed: u64,
    /// Zero IMU and measurement noise and a perfect initial state (the
    /// covariance still follows `init`). For consistency checks.
    pub noise_free: bool,
    pub replay: ReplaySettings,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            schema_version: SCHEMA_VERSION,
            user: Site::rochester(),
            attitude0_rad: [0.0, 0.0, std::f64::consts::FRAC_PI_2],
            start: "2026-01-30T15:00:00Z".into(),
            duration_s: 20.0,
            tle_path: None,
            mask_gps_deg: 10.0,
            mask_leo_deg: 28.0,
            n_leo: vec![5, 15, 25, 35, 45],
            modes: FusionMode::ALL.iter().map(|m| m.label().to_string()).collect(),
            sigmas: Sigmas::default(),
            rates: Rates::default(),
            imu: ImuGrade::default(),
            init: InitErrors::default(),
            carrier_hz: leonav_core::observables::DEFAULT_CARRIER_HZ,
            gate_sigmas: Some(5.0),
            n_runs: 50,
            seed: 20_260_130,
            noise_free: false,
            replay: ReplaySettings::default(),
        }
    }
}

fn is_multiple(a: f64, b: f64) -> bool {
    let r = a / b;
    (r - r.round()).abs() < 1e-9 && r.round() >= 1.0
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            HarnessError::Config(m) => HarnessError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("schema_version {} unsupported (expected {SCHEMA_VERSION})", self.schema_version));
        }
        self.user.geodetic()?;
        self.start_instant()?;
        if !(self.duration_s > 0.0) {
            return bad("duration_s must be positive".into());
        }
        if self.n_runs == 0 {
            return bad("n_runs must be at least 1".into());
        }
        for (name, m) in [("mask_gps_deg", self.mask_gps_deg), ("mask_leo_deg", self.mask_leo_deg)] {
            if !(0.0..90.0).contains(&m) {
                return bad(format!("{name} must lie in [0, 90)"));
            }
        }
        if self.n_leo.is_empty() || self.n_leo.contains(&0) {
            return bad("n_leo must list positive satellite counts".into());
        }
        self.fusion_modes()?;
        let r = &self.rates;
        if !(r.imu_hz > 0.0) || !is_multiple(self.duration_s * r.imu_hz, 1.0) || 1.0 / r.imu_hz > leonav_core::inertial::MAX_STEP {
            return bad("imu_hz must be positive, at least 2 Hz and give a whole number of samples".into());
        }
        for (name, rate) in [("gps_hz", r.gps_hz), ("doppler_rate_hz", r.doppler_rate_hz), ("ofdm_hz", r.ofdm_hz)] {
            if rate < 0.0 || (rate > 0.0 && !is_multiple(r.imu_hz, rate)) {
                return bad(format!("{name} must divide imu_hz"));
            }
        }
        let s = &self.sigmas;
        if [s.gps_pseudorange_m, s.doppler_rate_hz_s, s.ofdm_m, s.gps_fix_m].iter().any(|v| !(*v > 0.0)) {
            return bad("noise sigmas must be positive".into());
        }
        if self.imu.gyro_deg_s_rthz < 0.0 || self.imu.accel_ug_rthz < 0.0 {
            return bad("IMU densities must be non-negative".into());
        }
        let i = &self.init;
        if [i.sigma_pos_m, i.sigma_vel_mps, i.sigma_att_deg].iter().any(|v| !(*v > 0.0)) {
            return bad("initial sigmas must be positive".into());
        }
        if !(KU_BAND.0..=KU_BAND.1).contains(&self.carrier_hz) {
            return bad(format!("carrier_hz {} outside the Ku band", self.carrier_hz));
        }
        if let Some(g) = self.gate_sigmas {
            if !(g > 0.0) {
                return bad("gate_sigmas must be positive".into());
            }
        }
        if !(self.replay.alignment_s >= 0.0) || !(self.replay.aligned_sigma_vel_mps > 0.0) || !(self.replay.aligned_sigma_tilt_rad > 0.0) {
            return bad("replay alignment settings must be positive".into());
        }
        if let Some(site) = &self.replay.survey {
            site.geodetic()?;
        }
        Ok(())
    }

    pub fn start_instant(&self) -> Result<UtcInstant> {
        UtcInstant::parse_iso8601(&self.start).map_err(|e| HarnessError::Config(format!("start: {e}")))
    }

    pub fn fusion_modes(&self) -> Result<Vec<FusionMode>> {
        if self.modes.is_empty() {
            return Err(HarnessError::Config("modes must not be empty".into()));
        }
        self.modes.iter().map(|m| m.parse().map_err(|_| HarnessError::Config(format!("unknown mode `{m}`")))).collect()
    }

    pub fn attitude0(&self) -> Vec3 {
        Vec3::from(self.attitude0_rad)
    }

    pub fn carrier(&self) -> BeaconCarrier {
        BeaconCarrier::new(self.carrier_hz)
    }

    pub fn noise_sigmas(&self) -> NoiseSigmas {
        NoiseSigmas {
            gps_pseudorange: self.sigmas.gps_pseudorange_m,
            doppler_rate: self.sigmas.doppler_rate_hz_s,
            ofdm: self.sigmas.ofdm_m,
        }
    }

    pub fn measurement_rates(&self) -> MeasurementRates {
        MeasurementRates { gps: self.rates.gps_hz, doppler_rate: self.rates.doppler_rate_hz, ofdm: self.rates.ofdm_hz }
    }

    pub fn imu_noise(&self) -> ImuNoiseModel {
        if self.noise_free {
            return ImuNoiseModel::NOISELESS;
        }
        ImuNoiseModel::from_densities(self.imu.gyro_deg_s_rthz, self.imu.accel_ug_rthz, self.rates.imu_hz)
    }

    /// Filter tuning matched to the simulated IMU.
    pub fn filter_config(&self) -> FilterConfig {
        FilterConfig {
            carrier: self.carrier(),
            gate_sigmas: self.gate_sigmas,
            ..FilterConfig::from_imu_densities(self.imu.gyro_deg_s_rthz, self.imu.accel_ug_rthz)
        }
    }
}
