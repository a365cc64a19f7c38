//! CSV file formats. Times are seconds since the scenario or capture start.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use leonav_core::bound::BoundPoint;
use leonav_core::fusion::{Covariance, FusionMode};
use leonav_core::inertial::StateVector;
use leonav_core::observables::Axis;
use leonav_core::propagate::VisibilityReport;
use leonav_core::spectral::{AssociationResult, RidgeTrace};
use leonav_core::{ImuSample, Measurement, MeasurementKind, NavState, UtcInstant, Vec3};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RidgeRow {
    pub t_s: f64,
    pub f_hz: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImuRow {
    pub t_s: f64,
    pub ax: f64,
    pub ay: f64,
    pub az: f64,
    pub gx: f64,
    pub gy: f64,
    pub gz: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpsFixRow {
    pub t_s: f64,
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub alt_m: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PseudorangeRow {
    pub t_s: f64,
    pub sat_id: u32,
    pub pseudorange_m: f64,
}

/// Either flavour of GPS log.
#[derive(Clone, Debug, PartialEq)]
pub enum GpsLog {
    Fixes(Vec<GpsFixRow>),
    Pseudoranges(Vec<PseudorangeRow>),
}

impl GpsLog {
    pub fn len(&self) -> usize {
        match self {
            GpsLog::Fixes(r) => r.len(),
            GpsLog::Pseudoranges(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub t_s: f64,
    pub pos_bound_m: f64,
    pub vel_bound_mps: f64,
    pub att_bound_rad: f64,
    pub mode: String,
    pub n_sats: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisibilityRow {
    pub t: f64,
    pub constellation: String,
    pub norad_id: u32,
    pub elevation_deg: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRow {
    pub t_s: f64,
    pub kind: String,
    pub sat_id: u32,
    pub ref_sat_id: Option<u32>,
    pub value: f64,
    pub sigma: f64,
}

pub fn kind_label(kind: MeasurementKind) -> &'static str {
    match kind {
        MeasurementKind::GpsPseudorange => "gps_pseudorange_m",
        MeasurementKind::LeoDopplerRate => "doppler_rate_hz_s",
        MeasurementKind::OfdmDiffRange => "ofdm_diff_range_m",
        MeasurementKind::GpsPositionFix(Axis::East) => "gps_fix_e_m",
        MeasurementKind::GpsPositionFix(Axis::North) => "gps_fix_n_m",
        MeasurementKind::GpsPositionFix(Axis::Up) => "gps_fix_u_m",
    }
}

pub fn measurement_rows(ms: &[Measurement], start: &UtcInstant) -> Vec<MeasurementRow> {
    ms.iter()
        .map(|m| MeasurementRow {
            t_s: m.t.seconds_since(start),
            kind: kind_label(m.kind).to_string(),
            sat_id: m.sat_id,
            ref_sat_id: m.ref_sat_id,
            value: m.value,
            sigma: m.sigma,
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssociationRow {
    pub ridge: String,
    pub sat_id: u32,
    pub alpha_hat_hz_s: f64,
    pub alpha_pred_hz_s: f64,
    pub residual_alpha_hz_s: f64,
    pub residual_doppler_hz: f64,
    pub accepted: bool,
}

impl AssociationRow {
    pub fn new(ridge: &str, r: &AssociationResult) -> Self {
        AssociationRow {
            ridge: ridge.to_string(),
            sat_id: r.sat_id,
            alpha_hat_hz_s: r.alpha_hat,
            alpha_pred_hz_s: r.alpha_pred,
            residual_alpha_hz_s: r.residual_alpha,
            residual_doppler_hz: r.residual_doppler,
            accepted: r.accepted,
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    let mut s = String::new();
    fs::File::open(path).and_then(|mut f| f.read_to_string(&mut s)).map_err(|e| HarnessError::io(path, e))?;
    Ok(s)
}

/// Deserializes CSV text with a header row.
pub fn parse_rows<T: for<'de> Deserialize<'de>>(text: &str, origin: &Path) -> Result<Vec<T>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    rdr.deserialize().map(|r| r.map_err(|e| HarnessError::csv(origin, e))).collect()
}

pub fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    parse_rows(&read_text(path)?, path)
}

/// Serializes rows to CSV text with a header.
pub fn rows_to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| HarnessError::csv("<memory>", e))?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Data(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        }
    }
    fs::File::create(path).and_then(|mut f| f.write_all(text.as_bytes())).map_err(|e| HarnessError::io(path, e))
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    write_text(path, &rows_to_csv(rows)?)
}

fn check_increasing(ts: impl Iterator<Item = f64>, path: &Path) -> Result<()> {
    let mut prev = f64::NEG_INFINITY;
    for t in ts {
        if !(t > prev) {
            return Err(HarnessError::Data(format!("{}: timestamps must be strictly increasing", path.display())));
        }
        prev = t;
    }
    Ok(())
}

pub fn read_ridge(path: &Path, f_ref: f64) -> Result<RidgeTrace> {
    let rows: Vec<RidgeRow> = read_rows(path)?;
    check_increasing(rows.iter().map(|r| r.t_s), path)?;
    RidgeTrace::new(rows.iter().map(|r| (r.t_s, r.f_hz)).collect(), f_ref).map_err(|e| HarnessError::Data(e.to_string()))
}

pub fn read_imu(path: &Path, start: &UtcInstant) -> Result<Vec<ImuSample>> {
    let rows: Vec<ImuRow> = read_rows(path)?;
    check_increasing(rows.iter().map(|r| r.t_s), path)?;
    Ok(rows.iter().map(|r| imu_from_row(r, start)).collect())
}

pub fn imu_from_row(r: &ImuRow, start: &UtcInstant) -> ImuSample {
    ImuSample { t: start.add_seconds(r.t_s), accel: Vec3::new(r.ax, r.ay, r.az), gyro: Vec3::new(r.gx, r.gy, r.gz) }
}

pub fn imu_rows(samples: &[ImuSample], start: &UtcInstant) -> Vec<ImuRow> {
    samples
        .iter()
        .map(|s| ImuRow {
            t_s: s.t.seconds_since(start),
            ax: s.accel.x,
            ay: s.accel.y,
            az: s.accel.z,
            gx: s.gyro.x,
            gy: s.gyro.y,
            gz: s.gyro.z,
        })
        .collect()
}

/// Reads a GPS log, telling the two layouts apart by their header.
pub fn parse_gps(text: &str, origin: &Path) -> Result<GpsLog> {
    let header = text.lines().next().unwrap_or("").to_ascii_lowercase();
    let log = if header.contains("pseudorange_m") {
        GpsLog::Pseudoranges(parse_rows(text, origin)?)
    } else if header.contains("lat_deg") {
        GpsLog::Fixes(parse_rows(text, origin)?)
    } else {
        return Err(HarnessError::Data(format!("{}: unrecognized GPS header `{header}`", origin.display())));
    };
    Ok(log)
}

pub fn read_gps(path: &Path) -> Result<GpsLog> {
    parse_gps(&read_text(path)?, path)
}

/// Trajectory CSV: state plus covariance diagonal per epoch.
pub fn trajectory_csv(states: &[NavState], covs: &[Covariance], start: &UtcInstant) -> String {
    let mut out = String::from("t_s,e_m,n_m,u_m,ve,vn,vu,roll,pitch,yaw");
    for i in 1..=9 {
        out.push_str(&format!(",p{i}{i}"));
    }
    out.push('\n');
    for (k, s) in states.iter().enumerate() {
        let x = s.to_vector();
        out.push_str(&format!("{}", s.t.seconds_since(start)));
        for v in x.iter() {
            out.push_str(&format!(",{v}"));
        }
        let diag = covs.get(k).map(|p| p.diagonal()).unwrap_or_else(|| StateVector::repeat(f64::NAN));
        for v in diag.iter() {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

pub fn bound_rows(points: &[BoundPoint], start: &UtcInstant, mode: FusionMode, n_sats: usize) -> Vec<BoundRow> {
    points
        .iter()
        .map(|b| BoundRow {
            t_s: b.t.seconds_since(start),
            pos_bound_m: b.pos,
            vel_bound_mps: b.vel,
            att_bound_rad: b.att,
            mode: mode.label().to_string(),
            n_sats,
        })
        .collect()
}

pub fn visibility_rows(reports: &[VisibilityReport], start: &UtcInstant) -> Vec<VisibilityRow> {
    let mut rows = Vec::new();
    for rep in reports {
        let t = rep.t.seconds_since(start);
        for (name, list) in [("starlink", &rep.visible_starlink), ("navstar", &rep.visible_navstar)] {
            for v in list {
                rows.push(VisibilityRow {
                    t,
                    constellation: name.to_string(),
                    norad_id: v.norad_id,
                    elevation_deg: v.elevation.to_degrees(),
                });
            }
        }
    }
    rows
}
