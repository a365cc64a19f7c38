//! Error metrics: per-epoch and aggregate RMSE, ensemble accumulation, NEES
//! and rank correlation.

use alloc::vec::Vec;

use crate::fusion::Covariance;
use crate::inertial::NavState;
use crate::time::UtcInstant;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("trajectories differ at epoch {index}")]
    TimestampMismatch { index: usize },
    #[error("trajectory lengths differ ({estimate} vs {truth})")]
    LengthMismatch { estimate: usize, truth: usize },
    #[error("covariance at epoch {0} is not invertible")]
    SingularCovariance(usize),
}

/// Squared error norms of one epoch.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SquaredError {
    pub pos: f64,
    pub vel: f64,
    pub att: f64,
}

impl SquaredError {
    pub fn between(est: &NavState, truth: &NavState) -> Self {
        let d = est.difference(truth);
        SquaredError {
            pos: d.fixed_rows::<3>(0).norm_squared(),
            vel: d.fixed_rows::<3>(3).norm_squared(),
            att: d.fixed_rows::<3>(6).norm_squared(),
        }
    }

    fn add(&mut self, o: &SquaredError) {
        self.pos += o.pos;
        self.vel += o.vel;
        self.att += o.att;
    }

    fn rms(&self, n: usize) -> Rmse {
        let n = n.max(1) as f64;
        Rmse { pos: (self.pos / n).sqrt(), vel: (self.vel / n).sqrt(), att: (self.att / n).sqrt() }
    }
}

/// Root-mean-square position (m), velocity (m/s) and attitude (rad) error.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Rmse {
    pub pos: f64,
    pub vel: f64,
    pub att: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RmseReport {
    pub per_epoch: Vec<(UtcInstant, Rmse)>,
    pub aggregate: Rmse,
}

fn check_alignment(est: &[NavState], truth: &[NavState]) -> Result<(), MetricsError> {
    if est.len() != truth.len() {
        return Err(MetricsError::LengthMismatch { estimate: est.len(), truth: truth.len() });
    }
    for (index, (e, t)) in est.iter().zip(truth).enumerate() {
        if e.t.seconds_since(&t.t).abs() > 1e-6 {
            return Err(MetricsError::TimestampMismatch { index });
        }
    }
    Ok(())
}

/// Error of a single run: per-epoch error norms and the RMSE over the window.
pub fn compute_rmse(est: &[NavState], truth: &[NavState]) -> Result<RmseReport, MetricsError> {
    let mut acc = EnsembleAccumulator::default();
    acc.add_run(est, truth)?;
    Ok(acc.report())
}

/// Accumulates squared errors over Monte Carlo runs that share epochs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EnsembleAccumulator {
    times: Vec<UtcInstant>,
    sums: Vec<SquaredError>,
    runs: usize,
}

impl EnsembleAccumulator {
    pub fn add_run(&mut self, est: &[NavState], truth: &[NavState]) -> Result<(), MetricsError> {
        check_alignment(est, truth)?;
        if self.runs == 0 {
            self.times = truth.iter().map(|s| s.t).collect();
            self.sums = alloc::vec![SquaredError::default(); truth.len()];
        } else if self.times.len() != truth.len() {
            return Err(MetricsError::LengthMismatch { estimate: truth.len(), truth: self.times.len() });
        } else if let Some(index) = self.times.iter().zip(truth).position(|(a, b)| a.seconds_since(&b.t).abs() > 1e-6) {
            return Err(MetricsError::TimestampMismatch { index });
        }
        for (sum, (e, t)) in self.sums.iter_mut().zip(est.iter().zip(truth)) {
            sum.add(&SquaredError::between(e, t));
        }
        self.runs += 1;
        Ok(())
    }

    /// Merges another accumulator over the same epochs.
    pub fn merge(&mut self, other: &EnsembleAccumulator) -> Result<(), MetricsError> {
        if other.runs == 0 {
            return Ok(());
        }
        if self.runs == 0 {
            *self = other.clone();
            return Ok(());
        }
        if self.times.len() != other.times.len() {
            return Err(MetricsError::LengthMismatch { estimate: other.times.len(), truth: self.times.len() });
        }
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            a.add(b);
        }
        self.runs += other.runs;
        Ok(())
    }

    pub fn runs(&self) -> usize {
        self.runs
    }

    pub fn report(&self) -> RmseReport {
        let per_epoch = self.times.iter().zip(&self.sums).map(|(t, s)| (*t, s.rms(self.runs))).collect();
        let mut total = SquaredError::default();
        for s in &self.sums {
            total.add(s);
        }
        RmseReport { per_epoch, aggregate: total.rms(self.runs * self.sums.len()) }
    }

    /// RMSE at the last epoch.
    pub fn final_epoch(&self) -> Option<Rmse> {
        self.sums.last().map(|s| s.rms(self.runs))
    }
}

/// Normalized estimation error squared `eᵀ P⁻¹ e`.
pub fn nees(est: &NavState, truth: &NavState, cov: &Covariance) -> Option<f64> {
    let e = est.difference(truth);
    let chol = nalgebra::Cholesky::new(*cov)?;
    Some(e.dot(&chol.solve(&e)))
}

/// Per-epoch NEES averaged over runs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NeesAccumulator {
    sums: Vec<f64>,
    runs: usize,
}

impl NeesAccumulator {
    pub fn add_run(&mut self, est: &[NavState], truth: &[NavState], covs: &[Covariance]) -> Result<(), MetricsError> {
        check_alignment(est, truth)?;
        if covs.len() != est.len() {
            return Err(MetricsError::LengthMismatch { estimate: covs.len(), truth: est.len() });
        }
        if self.runs == 0 {
            self.sums = alloc::vec![0.0; est.len()];
        } else if self.sums.len() != est.len() {
            return Err(MetricsError::LengthMismatch { estimate: est.len(), truth: self.sums.len() });
        }
        for (k, ((e, t), p)) in est.iter().zip(truth).zip(covs).enumerate() {
            self.sums[k] += nees(e, t, p).ok_or(MetricsError::SingularCovariance(k))?;
        }
        self.runs += 1;
        Ok(())
    }

    pub fn runs(&self) -> usize {
        self.runs
    }

    /// Folds in another accumulator over the same epochs.
    pub fn merge(&mut self, other: &NeesAccumulator) -> Result<(), MetricsError> {
        if other.runs == 0 {
            return Ok(());
        }
        if self.runs == 0 {
            *self = other.clone();
            return Ok(());
        }
        if self.sums.len() != other.sums.len() {
            return Err(MetricsError::LengthMismatch { estimate: other.sums.len(), truth: self.sums.len() });
        }
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            *a += b;
        }
        self.runs += other.runs;
        Ok(())
    }

    pub fn average(&self) -> Vec<f64> {
        let n = self.runs.max(1) as f64;
        self.sums.iter().map(|s| s / n).collect()
    }
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = alloc::vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation (average ranks for ties). `None` for fewer than
/// two points or a constant input.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = xs.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}
