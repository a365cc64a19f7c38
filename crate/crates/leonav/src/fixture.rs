//! Synthetic stand-in for a hardware capture: a static receiver logging IMU
//! samples and GPS fixes, plus a handful of beacon captures reduced to
//! ridge traces by the spectral pipeline.

use std::path::{Path, PathBuf};

use leonav_core::frames::{ecef_to_geodetic, enu_frame_at, enu_to_ecef_state, geodetic_to_ecef};
use leonav_core::inertial::synthesize_imu;
use leonav_core::noise::{derive_seed, keyed_normal};
use leonav_core::observables::{doppler_rate, doppler_shift, geometry};
use leonav_core::propagate::propagate;
use leonav_core::spectral::{extract_ridge, RidgeTrace};
use leonav_core::tle::{parse_tle_file, ParseMode};
use leonav_core::{BeaconCarrier, GeodeticPosition, TleRecord, UtcInstant, Vec3};

use crate::beacon;
use crate::catalog;
use crate::config::ScenarioConfig;
use crate::error::{HarnessError, Result};
use crate::io::{self, GpsFixRow, RidgeRow};
use crate::scenario::{PreparedScenario, MIN_VISIBLE};

const GPS_KEY: u64 = 10;
const RIDGE_KEY: u64 = 11;

#[derive(Clone, Debug, PartialEq)]
pub struct FixtureParams {
    /// Capture centres (s after the window start), one satellite each.
    pub ridge_centres: Vec<f64>,
    pub ridge_duration: f64,
    pub sample_rate: f64,
    pub snr_db: f64,
    /// Receiver local-oscillator error added to every ridge (Hz).
    pub lo_offset_hz: f64,
}

impl Default for FixtureParams {
    fn default() -> Self {
        FixtureParams {
            ridge_centres: vec![2.0, 6.0, 10.0, 14.0, 18.0],
            ridge_duration: 2.0,
            sample_rate: 16_384.0,
            snr_db: 10.0,
            lo_offset_hz: 137.0,
        }
    }
}

/// What a fixture was generated from, for checking replays against it.
#[derive(Clone, Debug, PartialEq)]
pub struct FixtureManifest {
    pub dir: PathBuf,
    pub config_path: PathBuf,
    pub gps_path: PathBuf,
    pub imu_path: PathBuf,
    pub tle_path: PathBuf,
    pub ridge_paths: Vec<PathBuf>,
    /// Satellite behind each ridge.
    pub ridge_sats: Vec<u32>,
    /// True Doppler rate at each ridge midpoint (Hz/s).
    pub ridge_alpha: Vec<f64>,
}

/// Ridge trace of one beacon capture centred `centre` seconds after `start`,
/// returned with the true Doppler rate at the centre.
///
/// The tone is a linear chirp at the satellite's mean Doppler rate over the
/// capture, received with the tuner at the nearest kHz of the predicted
/// Doppler plus the local-oscillator error. Ridge times are seconds after
/// `start`; frequencies are relative to the nominal carrier.
pub fn synthetic_ridge(
    rec: &TleRecord,
    site: &GeodeticPosition,
    start: &UtcInstant,
    carrier: &BeaconCarrier,
    centre: f64,
    p: &FixtureParams,
    seed: u64,
) -> Result<(RidgeTrace, f64)> {
    let origin = geodetic_to_ecef(site);
    let t0 = centre - 0.5 * p.ridge_duration;
    let at = |dt: f64| -> Result<(f64, f64)> {
        let s = propagate(rec, &start.add_seconds(dt)).map_err(|e| HarnessError::Data(e.to_string()))?;
        let g = geometry(&s, &origin, &Vec3::zeros()).map_err(|e| HarnessError::Data(e.to_string()))?;
        Ok((doppler_shift(&g, carrier), doppler_rate(&g, carrier)))
    };
    let (f_start, _) = at(t0)?;
    let (f_mid, alpha_mid) = at(centre)?;
    let (f_end, _) = at(t0 + p.ridge_duration)?;
    // mean rate over the capture, so the baseband chirp spans the same band
    let alpha = (f_end - f_start) / p.ridge_duration;
    let tuning = (f_mid / 1000.0).round() * 1000.0;
    let f0 = f_start - tuning + p.lo_offset_hz;
    let spec = beacon::synthesize_beacon(alpha, f0, p.ridge_duration, p.sample_rate, p.snr_db, seed)
        .map_err(|e| HarnessError::Data(e.to_string()))?;
    let base = extract_ridge(&spec, 0.0).map_err(|e| HarnessError::Data(e.to_string()))?;
    let points = base.points.iter().map(|&(t, f)| (t + t0, f + tuning)).collect();
    let trace = RidgeTrace::new(points, 0.0).map_err(|e| HarnessError::Data(e.to_string()))?;
    Ok((trace, alpha_mid))
}

/// Writes a replay fixture for the scenario in `cfg` into `dir`.
///
/// The receiver sits at `cfg.user`, which is also recorded as the survey
/// point. Ridge `k` comes from the `k`-th highest Starlink at mid-window.
pub fn generate(cfg: &ScenarioConfig, params: &FixtureParams, dir: &Path) -> Result<FixtureManifest> {
    let start = cfg.start_instant()?;
    let cat_text = catalog::synthetic_catalog_text(start);
    let tle_path = dir.join("catalog.tle");
    io::write_text(&tle_path, &cat_text)?;
    let mut cfg = cfg.clone();
    cfg.tle_path = Some(tle_path.to_string_lossy().into_owned());
    cfg.n_leo = vec![params.ridge_centres.len().max(MIN_VISIBLE)];
    cfg.replay.survey = Some(cfg.user.clone());
    let cat = parse_tle_file(&cat_text, ParseMode::Strict)?.catalog;
    let prep = PreparedScenario::with_catalog(&cfg, &cat)?;
    let seed = derive_seed(cfg.seed, &[u64::MAX]);

    let imu = synthesize_imu(&prep.truth, &cfg.imu_noise(), cfg.rates.imu_hz, derive_seed(seed, &[1]))
        .map_err(|e| HarnessError::Data(e.to_string()))?;
    let imu_path = dir.join("imu.csv");
    io::write_rows(&imu_path, &io::imu_rows(&imu, &start))?;

    let site = cfg.user.geodetic()?;
    let frame = enu_frame_at(&site);
    let mut fixes = Vec::new();
    for (k, nav) in prep.truth.iter().enumerate() {
        let elapsed = nav.t.seconds_since(&start);
        let period = 1.0 / cfg.rates.gps_hz;
        if cfg.rates.gps_hz <= 0.0 || ((elapsed / period) - (elapsed / period).round()).abs() > 1e-6 {
            continue;
        }
        let noise = Vec3::from_fn(|i, _| cfg.sigmas.gps_fix_m * keyed_normal(seed, &[GPS_KEY, k as u64, i as u64]));
        let (r, _) = enu_to_ecef_state(&frame, &(nav.p_enu + noise), &Vec3::zeros());
        let g = ecef_to_geodetic(&r).map_err(|e| HarnessError::Data(e.to_string()))?;
        fixes.push(GpsFixRow { t_s: elapsed, lat_deg: g.lat.to_degrees(), lon_deg: g.lon.to_degrees(), alt_m: g.alt });
    }
    let gps_path = dir.join("gps.csv");
    io::write_rows(&gps_path, &fixes)?;

    let mut ridge_paths = Vec::new();
    let mut ridge_sats = Vec::new();
    let mut ridge_alpha = Vec::new();
    for (k, &centre) in params.ridge_centres.iter().enumerate() {
        let sat = prep.leo_ranked[k].0;
        let rec = cat.get(sat).expect("ranked satellites come from the catalog");
        let (trace, alpha) =
            synthetic_ridge(rec, &site, &start, &cfg.carrier(), centre, params, derive_seed(seed, &[RIDGE_KEY, k as u64]))?;
        let path = dir.join(format!("ridge_{}.csv", k + 1));
        let rows: Vec<RidgeRow> = trace.points.iter().map(|&(t_s, f_hz)| RidgeRow { t_s, f_hz }).collect();
        io::write_rows(&path, &rows)?;
        ridge_paths.push(path);
        ridge_sats.push(sat);
        ridge_alpha.push(alpha);
    }

    let config_path = dir.join("config.json");
    io::write_text(&config_path, &cfg.to_json())?;
    Ok(FixtureManifest { dir: dir.to_path_buf(), config_path, gps_path, imu_path, tle_path, ridge_paths, ridge_sats, ridge_alpha })
}
