//! Beacon ridge processing: peak tracking on a spectrogram, Doppler-rate
//! estimation, TLE-predicted Doppler signatures and satellite association.

use alloc::vec::Vec;

use crate::frames::{enu_frame_at, GeodeticPosition};
use crate::observables::{doppler_rate, doppler_shift, geometry, BeaconCarrier};
use crate::propagate::{elevation, propagate, PropagationError};
use crate::time::UtcInstant;
use crate::tle::TleRecord;
use crate::Vec3;

/// Minimum peak prominence over the slice median (dB). Periodogram bins of
/// white noise are exponential, so the largest of 1024 sits about 10 dB over
/// the median; 15 dB keeps the per-slice false-alarm rate near 1e-7.
pub const RIDGE_MIN_PROMINENCE_DB: f64 = 15.0;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum SpectralError {
    #[error("spectrogram axes must be non-empty and strictly increasing")]
    BadAxes,
    #[error("spectrogram power has {found} cells, expected {expected}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("no slice has a peak {RIDGE_MIN_PROMINENCE_DB} dB above its median")]
    NoRidge,
    #[error("rate estimation needs at least two points, got {0}")]
    TooFewPoints(usize),
    #[error("all ridge timestamps are equal")]
    DegenerateTimes,
    #[error("ridge timestamps must be strictly increasing")]
    UnorderedTimes,
    #[error("satellite {0} is never above the horizon in the window")]
    NeverVisible(u32),
    #[error("no association candidates")]
    NoCandidates,
    #[error(transparent)]
    Propagation(#[from] PropagationError),
}

/// Time-frequency power map in dB, stored row-major (one row per time slice).
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrogram {
    t_axis: Vec<f64>,
    f_axis: Vec<f64>,
    power_db: Vec<f64>,
}

fn strictly_increasing(xs: &[f64]) -> bool {
    !xs.is_empty() && xs.windows(2).all(|w| w[1] > w[0])
}

impl Spectrogram {
    pub fn new(t_axis: Vec<f64>, f_axis: Vec<f64>, power_db: Vec<f64>) -> Result<Self, SpectralError> {
        if !strictly_increasing(&t_axis) || !strictly_increasing(&f_axis) {
            return Err(SpectralError::BadAxes);
        }
        let expected = t_axis.len() * f_axis.len();
        if power_db.len() != expected {
            return Err(SpectralError::ShapeMismatch { expected, found: power_db.len() });
        }
        Ok(Spectrogram { t_axis, f_axis, power_db })
    }

    pub fn t_axis(&self) -> &[f64] {
        &self.t_axis
    }

    pub fn f_axis(&self) -> &[f64] {
        &self.f_axis
    }

    /// Power of one time slice.
    pub fn slice(&self, i: usize) -> &[f64] {
        let n = self.f_axis.len();
        &self.power_db[i * n..(i + 1) * n]
    }

    pub fn bin_width(&self) -> f64 {
        if self.f_axis.len() < 2 {
            0.0
        } else {
            (self.f_axis[self.f_axis.len() - 1] - self.f_axis[0]) / (self.f_axis.len() - 1) as f64
        }
    }
}

/// Sequence of `(t_i, f_i)` ridge points and the reference frequency that
/// turns `f_i` into a Doppler estimate `f_i - f_ref`.
#[derive(Clone, Debug, PartialEq)]
pub struct RidgeTrace {
    pub points: Vec<(f64, f64)>,
    pub f_ref: f64,
}

impl RidgeTrace {
    pub fn new(points: Vec<(f64, f64)>, f_ref: f64) -> Result<Self, SpectralError> {
        if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(SpectralError::UnorderedTimes);
        }
        Ok(RidgeTrace { points, f_ref })
    }

    /// Doppler estimates `(t_i, f_i - f_ref)`.
    pub fn doppler(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points.iter().map(move |&(t, f)| (t, f - self.f_ref))
    }

    pub fn mid_time(&self) -> Option<f64> {
        Some(0.5 * (self.points.first()?.0 + self.points.last()?.0))
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Tracks the strongest bin of each slice, refined by a three-point
/// parabola on the dB values. Slices whose peak does not stand
/// [`RIDGE_MIN_PROMINENCE_DB`] above their median are dropped.
pub fn extract_ridge(spec: &Spectrogram, f_ref: f64) -> Result<RidgeTrace, SpectralError> {
    let df = spec.bin_width();
    let mut points = Vec::new();
    for (i, &t) in spec.t_axis.iter().enumerate() {
        let row = spec.slice(i);
        let (k, &peak) = row.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).ok_or(SpectralError::NoRidge)?;
        if peak - median(row) < RIDGE_MIN_PROMINENCE_DB {
            continue;
        }
        let mut f = spec.f_axis[k];
        if k > 0 && k + 1 < row.len() {
            let (a, b, c) = (row[k - 1], row[k], row[k + 1]);
            let denom = a - 2.0 * b + c;
            if denom < 0.0 {
                let offset = 0.5 * (a - c) / denom;
                f += offset.clamp(-0.5, 0.5) * df;
            }
        }
        points.push((t, f));
    }
    if points.is_empty() {
        return Err(SpectralError::NoRidge);
    }
    Ok(RidgeTrace { points, f_ref })
}

/// Doppler-rate estimate and its standard error (Hz/s).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateEstimate {
    pub alpha: f64,
    pub sigma: f64,
}

/// Least-squares slope of `f_i - f_ref` against `t_i`.
///
/// With exactly two points this is the first difference
/// `(f_D(t_1) - f_D(t_0)) / (t_1 - t_0)`, evaluated literally so the result
/// is bit-identical, and the standard error is zero.
pub fn estimate_doppler_rate(trace: &RidgeTrace) -> Result<RateEstimate, SpectralError> {
    let n = trace.points.len();
    if n < 2 {
        return Err(SpectralError::TooFewPoints(n));
    }
    if n == 2 {
        let (t0, f0) = trace.points[0];
        let (t1, f1) = trace.points[1];
        if t1 == t0 {
            return Err(SpectralError::DegenerateTimes);
        }
        let d0 = f0 - trace.f_ref;
        let d1 = f1 - trace.f_ref;
        return Ok(RateEstimate { alpha: (d1 - d0) / (t1 - t0), sigma: 0.0 });
    }
    let nf = n as f64;
    let t_mean = trace.points.iter().map(|p| p.0).sum::<f64>() / nf;
    let f_mean = trace.points.iter().map(|p| p.1).sum::<f64>() / nf;
    let (mut stt, mut stf) = (0.0, 0.0);
    for &(t, f) in &trace.points {
        stt += (t - t_mean) * (t - t_mean);
        stf += (t - t_mean) * (f - f_mean);
    }
    if !(stt > 0.0) {
        return Err(SpectralError::DegenerateTimes);
    }
    let alpha = stf / stt;
    let sse: f64 = trace
        .points
        .iter()
        .map(|&(t, f)| {
            let r = (f - f_mean) - alpha * (t - t_mean);
            r * r
        })
        .sum();
    Ok(RateEstimate { alpha, sigma: (sse / (nf - 2.0) / stt).sqrt() })
}

/// Predicted Doppler and Doppler rate at one instant of a pass.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SignaturePoint {
    /// Seconds since the window start.
    pub t: f64,
    pub f_doppler: f64,
    pub alpha: f64,
    pub elevation: f64,
}

/// TLE-predicted Doppler curve of one satellite for a static user.
#[derive(Clone, Debug, PartialEq)]
pub struct Signature {
    pub sat_id: u32,
    pub points: Vec<SignaturePoint>,
}

impl Signature {
    fn interpolate(&self, t: f64, field: impl Fn(&SignaturePoint) -> f64) -> Option<f64> {
        let pts = &self.points;
        if pts.is_empty() || t < pts[0].t - 1e-9 || t > pts[pts.len() - 1].t + 1e-9 {
            return None;
        }
        let j = pts.partition_point(|p| p.t <= t).clamp(1, pts.len().max(2) - 1);
        if pts.len() == 1 {
            return Some(field(&pts[0]));
        }
        let (a, b) = (&pts[j - 1], &pts[j]);
        let w = (t - a.t) / (b.t - a.t);
        Some(field(a) + w * (field(b) - field(a)))
    }

    pub fn doppler_at(&self, t: f64) -> Option<f64> {
        self.interpolate(t, |p| p.f_doppler)
    }

    pub fn alpha_at(&self, t: f64) -> Option<f64> {
        self.interpolate(t, |p| p.alpha)
    }
}

/// Samples the predicted Doppler and Doppler rate of `rec` over
/// `[start, start + duration]` every `step` seconds.
pub fn predict_signature(
    rec: &TleRecord,
    user: &GeodeticPosition,
    start: &UtcInstant,
    duration: f64,
    carrier: &BeaconCarrier,
    step: f64,
) -> Result<Signature, SpectralError> {
    let frame = enu_frame_at(user);
    let n = (duration / step).round().max(0.0) as usize;
    let mut points = Vec::with_capacity(n + 1);
    let mut visible = false;
    for k in 0..=n {
        let dt = k as f64 * step;
        let t = start.add_seconds(dt);
        let s = propagate(rec, &t)?;
        let el = elevation(&s, &frame.origin_ecef, &frame);
        visible |= el >= 0.0;
        let g = geometry(&s, &frame.origin_ecef, &Vec3::zeros()).map_err(|_| SpectralError::NeverVisible(rec.norad_id))?;
        points.push(SignaturePoint { t: dt, f_doppler: doppler_shift(&g, carrier), alpha: doppler_rate(&g, carrier), elevation: el });
    }
    if !visible {
        return Err(SpectralError::NeverVisible(rec.norad_id));
    }
    Ok(Signature { sat_id: rec.norad_id, points })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AssociationParams {
    /// Weight on the offset-removed Doppler RMS (1/Hz).
    pub weight_doppler: f64,
    /// Weight on the Doppler-rate mismatch (s/Hz).
    pub weight_alpha: f64,
    /// Largest accepted |alpha_hat - alpha_pred| (Hz/s).
    pub alpha_threshold: f64,
}

impl Default for AssociationParams {
    fn default() -> Self {
        AssociationParams { weight_doppler: 1.0 / 100.0, weight_alpha: 1.0, alpha_threshold: 3.5 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AssociationResult {
    pub sat_id: u32,
    /// |alpha_hat - alpha_pred(t_mid)| (Hz/s).
    pub residual_alpha: f64,
    /// RMS Doppler residual after removing the best constant offset (Hz).
    pub residual_doppler: f64,
    pub cost: f64,
    pub alpha_hat: f64,
    pub alpha_pred: f64,
    pub accepted: bool,
}

/// Picks the candidate signature that best explains a ridge trace.
///
/// Trace times must be in the candidates' time base (seconds since the
/// signature window start). Candidates that do not cover the trace are
/// skipped; exact cost ties go to the lower satellite id.
pub fn associate(trace: &RidgeTrace, candidates: &[Signature], params: &AssociationParams) -> Result<AssociationResult, SpectralError> {
    if candidates.is_empty() {
        return Err(SpectralError::NoCandidates);
    }
    let rate = estimate_doppler_rate(trace)?;
    let t_mid = trace.mid_time().ok_or(SpectralError::TooFewPoints(0))?;
    let mut best: Option<AssociationResult> = None;
    for cand in candidates {
        let Some(alpha_pred) = cand.alpha_at(t_mid) else { continue };
        let mut residuals = Vec::with_capacity(trace.points.len());
        for (t, fd) in trace.doppler() {
            match cand.doppler_at(t) {
                Some(pred) => residuals.push(fd - pred),
                None => break,
            }
        }
        if residuals.len() != trace.points.len() {
            continue;
        }
        let offset = residuals.iter().sum::<f64>() / residuals.len() as f64;
        let rms = (residuals.iter().map(|r| (r - offset) * (r - offset)).sum::<f64>() / residuals.len() as f64).sqrt();
        let d_alpha = (rate.alpha - alpha_pred).abs();
        let cost = params.weight_doppler * rms + params.weight_alpha * d_alpha;
        let better = match &best {
            None => true,
            Some(b) => cost < b.cost || (cost == b.cost && cand.sat_id < b.sat_id),
        };
        if better {
            best = Some(AssociationResult {
                sat_id: cand.sat_id,
                residual_alpha: d_alpha,
                residual_doppler: rms,
                cost,
                alpha_hat: rate.alpha,
                alpha_pred,
                accepted: d_alpha <= params.alpha_threshold,
            });
        }
    }
    best.ok_or(SpectralError::NoCandidates)
}
