//! Replay of logged IMU, GPS and beacon-ridge data through the filter.
//!
//! Log times are seconds after the configured start. The ENU frame sits at
//! the configured site. Each ridge is associated with a Starlink satellite
//! and becomes one Doppler-rate update at its midpoint; rejected ridges are
//! logged and dropped.

use std::path::{Path, PathBuf};

use leonav_core::frames::{enu_frame_at, geodetic_to_ecef};
use leonav_core::fusion::{initial_covariance, run_filter, FilterOutput, FilterState, FusionMode, TleProvider};
use leonav_core::metrics::{compute_rmse, SquaredError};
use leonav_core::observables::Axis;
use leonav_core::propagate::visible_satellites;
use leonav_core::spectral::{associate, predict_signature, AssociationParams, AssociationResult, RidgeTrace};
use leonav_core::{EnuFrame, GeodeticPosition, ImuSample, Measurement, MeasurementKind, NavState, TleCatalog, UtcInstant, Vec3};
use serde::Serialize;

use crate::config::ScenarioConfig;
use crate::error::{HarnessError, Result};
use crate::io::{self, AssociationRow, GpsLog};
use crate::scenario::load_catalog;

/// Time step of the predicted signatures used for association (s).
pub const SIGNATURE_STEP: f64 = 0.1;

#[derive(Clone, Debug)]
pub struct ReplayInputs {
    pub imu: Vec<ImuSample>,
    pub gps: GpsLog,
    /// Ridge traces with the name they are reported under.
    pub ridges: Vec<(String, RidgeTrace)>,
}

impl ReplayInputs {
    pub fn load(gps: &Path, imu: &Path, ridges: &[PathBuf], cfg: &ScenarioConfig) -> Result<Self> {
        let start = cfg.start_instant()?;
        let ridges = ridges
            .iter()
            .map(|p| {
                let name = p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned());
                Ok((name, io::read_ridge(p, cfg.replay.f_ref_hz)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ReplayInputs { imu: io::read_imu(imu, &start)?, gps: io::read_gps(gps)?, ridges })
    }
}

/// Which trajectory the replay errors are measured against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reference {
    Survey,
    GpsImu,
}

#[derive(Clone, Debug)]
pub struct ModeReplay {
    pub mode: FusionMode,
    pub output: FilterOutput,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplaySummaryRow {
    pub mode: String,
    pub reference: Reference,
    pub pos_rmse_m: f64,
    pub vel_rmse_mps: f64,
    pub att_rmse_rad: f64,
    pub max_pos_err_m: f64,
    pub max_vel_err_mps: f64,
    pub alpha_updates: usize,
    pub applied: usize,
    pub gated: usize,
}

#[derive(Clone, Debug)]
pub struct ReplayResult {
    pub start: UtcInstant,
    pub frame: EnuFrame,
    pub associations: Vec<(String, AssociationResult)>,
    pub alpha_measurements: Vec<Measurement>,
    pub modes: Vec<ModeReplay>,
    pub reference: Reference,
    pub reference_states: Vec<NavState>,
    pub summary: Vec<ReplaySummaryRow>,
}

impl ReplayResult {
    pub fn mode(&self, mode: FusionMode) -> Option<&FilterOutput> {
        self.modes.iter().find(|m| m.mode == mode).map(|m| &m.output)
    }
}

/// Associates a ridge against every Starlink above the mask at its midpoint.
pub fn associate_ridge(
    trace: &RidgeTrace,
    cat: &TleCatalog,
    user: &GeodeticPosition,
    start: &UtcInstant,
    duration: f64,
    cfg: &ScenarioConfig,
) -> Result<AssociationResult> {
    let mid = trace.mid_time().ok_or_else(|| HarnessError::Data("empty ridge".into()))?;
    let vis = visible_satellites(cat, user, &start.add_seconds(mid), cfg.mask_gps_deg.to_radians(), cfg.mask_leo_deg.to_radians())
        .map_err(|e| HarnessError::Data(e.to_string()))?;
    let carrier = cfg.carrier();
    let candidates: Vec<_> = vis
        .visible_starlink
        .iter()
        .filter_map(|v| cat.get(v.norad_id))
        .filter_map(|rec| predict_signature(rec, user, start, duration, &carrier, SIGNATURE_STEP).ok())
        .collect();
    associate(trace, &candidates, &AssociationParams::default()).map_err(|e| HarnessError::Data(format!("association: {e}")))
}

fn gps_measurements(log: &GpsLog, frame: &EnuFrame, start: &UtcInstant, cfg: &ScenarioConfig) -> Result<Vec<Measurement>> {
    let mut out = Vec::new();
    match log {
        GpsLog::Fixes(rows) => {
            for r in rows {
                let g = GeodeticPosition::from_degrees(r.lat_deg, r.lon_deg, r.alt_m).map_err(|e| HarnessError::Data(e.to_string()))?;
                let p = frame.ecef_to_enu(&geodetic_to_ecef(&g));
                let t = start.add_seconds(r.t_s);
                for axis in [Axis::East, Axis::North, Axis::Up] {
                    out.push(Measurement {
                        kind: MeasurementKind::GpsPositionFix(axis),
                        t,
                        sat_id: 0,
                        value: p[axis.index()],
                        sigma: cfg.sigmas.gps_fix_m,
                        ref_sat_id: None,
                    });
                }
            }
        }
        GpsLog::Pseudoranges(rows) => {
            for r in rows {
                out.push(Measurement {
                    kind: MeasurementKind::GpsPseudorange,
                    t: start.add_seconds(r.t_s),
                    sat_id: r.sat_id,
                    value: r.pseudorange_m,
                    sigma: cfg.sigmas.gps_pseudorange_m,
                    ref_sat_id: None,
                });
            }
        }
    }
    Ok(out)
}

/// Static alignment: position from the first GPS fix (the site otherwise),
/// zero velocity, roll and pitch levelled from the mean specific force over
/// the alignment window, yaw from the configured attitude.
pub fn align(inputs: &ReplayInputs, frame: &EnuFrame, cfg: &ScenarioConfig) -> Result<FilterState> {
    let first = inputs.imu.first().ok_or_else(|| HarnessError::Data("IMU log is empty".into()))?;
    let start = cfg.start_instant()?;
    let (p0, sigma_p) = match &inputs.gps {
        GpsLog::Fixes(rows) if !rows.is_empty() => {
            let t0 = first.t.seconds_since(&start);
            let r = rows.iter().min_by(|a, b| (a.t_s - t0).abs().total_cmp(&(b.t_s - t0).abs())).expect("non-empty");
            let g = GeodeticPosition::from_degrees(r.lat_deg, r.lon_deg, r.alt_m).map_err(|e| HarnessError::Data(e.to_string()))?;
            (frame.ecef_to_enu(&geodetic_to_ecef(&g)), cfg.sigmas.gps_fix_m)
        }
        _ => (Vec3::zeros(), cfg.init.sigma_pos_m),
    };
    let window: Vec<&ImuSample> = inputs.imu.iter().filter(|s| s.t.seconds_since(&first.t) <= cfg.replay.alignment_s + 1e-9).collect();
    let f = window.iter().fold(Vec3::zeros(), |acc, s| acc + s.accel) / window.len() as f64;
    let roll = f.y.atan2(f.z);
    let pitch = (-f.x).atan2((f.y * f.y + f.z * f.z).sqrt());
    let theta = Vec3::new(roll, pitch, cfg.attitude0_rad[2]);
    let nav = NavState::new(first.t, p0, Vec3::zeros(), theta);
    let r = &cfg.replay;
    let mut cov = initial_covariance(sigma_p, r.aligned_sigma_vel_mps, r.aligned_sigma_tilt_rad);
    cov[(8, 8)] = cfg.init.sigma_att_deg.to_radians().powi(2);
    Ok(FilterState::new(nav, cov, *frame, FusionMode::GpsImu))
}

fn max_errors(est: &[NavState], reference: &[NavState]) -> (f64, f64) {
    est.iter().zip(reference).fold((0.0f64, 0.0f64), |(p, v), (e, r)| {
        let se = SquaredError::between(e, r);
        (p.max(se.pos.sqrt()), v.max(se.vel.sqrt()))
    })
}

/// Replays the logs through every configured mode.
pub fn replay(inputs: &ReplayInputs, cat: &TleCatalog, cfg: &ScenarioConfig) -> Result<ReplayResult> {
    let start = cfg.start_instant()?;
    let user = cfg.user.geodetic()?;
    let frame = enu_frame_at(&user);
    let modes = cfg.fusion_modes()?;

    let mut associations = Vec::new();
    let mut alpha_measurements = Vec::new();
    for (name, trace) in &inputs.ridges {
        let res = associate_ridge(trace, cat, &user, &start, cfg.duration_s, cfg)?;
        if res.accepted {
            let t_mid = trace.mid_time().expect("associated ridges are non-empty");
            alpha_measurements.push(Measurement {
                kind: MeasurementKind::LeoDopplerRate,
                t: start.add_seconds(t_mid),
                sat_id: res.sat_id,
                value: res.alpha_hat,
                sigma: cfg.sigmas.doppler_rate_hz_s,
                ref_sat_id: None,
            });
        } else {
            eprintln!("ridge {name}: best match {} rejected (|dalpha| = {:.2} Hz/s)", res.sat_id, res.residual_alpha);
        }
        associations.push((name.clone(), res));
    }

    let mut meas = gps_measurements(&inputs.gps, &frame, &start, cfg)?;
    meas.extend(alpha_measurements.iter().copied());
    leonav_core::observables::sort_measurements(&mut meas);

    let init = align(inputs, &frame, cfg)?;
    let sats = TleProvider::new(cat.records.iter());
    let filter_cfg = cfg.filter_config();
    let run = |mode: FusionMode| -> Result<FilterOutput> {
        let fs = FilterState { mode, ..init.clone() };
        Ok(run_filter(&inputs.imu, &mode.select(&meas), &sats, fs, &filter_cfg)?)
    };
    let mut outputs = Vec::new();
    for &mode in &modes {
        outputs.push(ModeReplay { mode, output: run(mode)? });
    }

    let times: Vec<UtcInstant> = outputs.first().map(|o| o.output.states.iter().map(|s| s.t).collect()).unwrap_or_default();
    let (reference, reference_states) = match &cfg.replay.survey {
        Some(site) => {
            let p = frame.ecef_to_enu(&geodetic_to_ecef(&site.geodetic()?));
            let truth = times.iter().map(|&t| NavState::new(t, p, Vec3::zeros(), cfg.attitude0())).collect();
            (Reference::Survey, truth)
        }
        None => {
            let states = match outputs.iter().find(|m| m.mode == FusionMode::GpsImu) {
                Some(m) => m.output.states.clone(),
                None => run(FusionMode::GpsImu)?.states,
            };
            (Reference::GpsImu, states)
        }
    };

    let mut summary = Vec::new();
    for m in &outputs {
        let rmse = compute_rmse(&m.output.states, &reference_states).map_err(|e| HarnessError::Data(e.to_string()))?;
        let (max_pos, max_vel) = max_errors(&m.output.states, &reference_states);
        summary.push(ReplaySummaryRow {
            mode: m.mode.label().to_string(),
            reference,
            pos_rmse_m: rmse.aggregate.pos,
            vel_rmse_mps: rmse.aggregate.vel,
            att_rmse_rad: rmse.aggregate.att,
            max_pos_err_m: max_pos,
            max_vel_err_mps: max_vel,
            alpha_updates: if m.mode.uses_alpha() { alpha_measurements.len() } else { 0 },
            applied: m.output.applied,
            gated: m.output.gated,
        });
    }
    Ok(ReplayResult { start, frame, associations, alpha_measurements, modes: outputs, reference, reference_states, summary })
}

/// RMS position difference between two trajectories on the same epochs.
pub fn position_rms_difference(a: &[NavState], b: &[NavState]) -> Result<f64> {
    Ok(compute_rmse(a, b).map_err(|e| HarnessError::Data(e.to_string()))?.aggregate.pos)
}

/// Loads logs and catalog, replays, and writes trajectories, the
/// association table and `replay_summary.csv` into `out`.
pub fn replay_files(gps: &Path, imu: &Path, ridges: &[PathBuf], cfg: &ScenarioConfig, out: &Path) -> Result<ReplayResult> {
    let inputs = ReplayInputs::load(gps, imu, ridges, cfg)?;
    let cat = load_catalog(cfg)?;
    let res = replay(&inputs, &cat, cfg)?;
    write_replay(&res, out)?;
    Ok(res)
}

pub fn write_replay(res: &ReplayResult, out: &Path) -> Result<()> {
    for m in &res.modes {
        let name = format!("trajectory_{}.csv", m.mode.label().replace('+', "_"));
        io::write_text(&out.join(name), &io::trajectory_csv(&m.output.states, &m.output.covariances, &res.start))?;
    }
    let zero = vec![leonav_core::fusion::Covariance::zeros(); res.reference_states.len()];
    io::write_text(&out.join("reference.csv"), &io::trajectory_csv(&res.reference_states, &zero, &res.start))?;
    let rows: Vec<AssociationRow> = res.associations.iter().map(|(n, r)| AssociationRow::new(n, r)).collect();
    io::write_rows(&out.join("associations.csv"), &rows)?;
    io::write_rows(&out.join("replay_summary.csv"), &res.summary)?;
    let reference = match res.reference {
        Reference::Survey => "surveyed static point from the configuration",
        Reference::GpsImu => "GPS+IMU solution (no surveyed point configured)",
    };
    io::write_text(&out.join("replay_meta.txt"), &format!("reference: {reference}\nalpha_updates: {}\n", res.alpha_measurements.len()))?;
    io::write_text(&out.join("plot_trajectories.py"), crate::plot::TRAJECTORY_SCRIPT)
}
