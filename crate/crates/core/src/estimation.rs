//! Generic extended Kalman filter and posterior Cramér-Rao bound recursion on
//! fixed-size states, with central-difference Jacobians.

use alloc::vec::Vec;

use nalgebra::{Cholesky, RowSVector, SMatrix, SVector};

use crate::frames::wrap_pi;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum EstimationError {
    #[error("innovation variance is not positive ({0})")]
    SingularInnovation(f64),
    #[error("information matrix is singular")]
    SingularInformation,
    #[error("non-finite value in filter state")]
    NonFinite,
}

/// Outcome of a scalar measurement update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpdateOutcome {
    pub innovation: f64,
    /// Innovation variance `H P Hᵀ + R`.
    pub variance: f64,
    /// False when the innovation failed the gate and the state was left alone.
    pub applied: bool,
}

/// Central-difference gradient of a scalar function.
pub fn numeric_gradient<const N: usize, E>(
    h: impl Fn(&SVector<f64, N>) -> Result<f64, E>,
    x: &SVector<f64, N>,
    steps: &SVector<f64, N>,
) -> Result<RowSVector<f64, N>, E> {
    let mut row = RowSVector::<f64, N>::zeros();
    for j in 0..N {
        let mut xp = *x;
        let mut xm = *x;
        xp[j] += steps[j];
        xm[j] -= steps[j];
        row[j] = (h(&xp)? - h(&xm)?) / (2.0 * steps[j]);
    }
    Ok(row)
}

/// Central-difference Jacobian of a vector function. Output components listed
/// in `angle_indices` are differenced with wrapping.
pub fn numeric_jacobian<const N: usize, E>(
    f: impl Fn(&SVector<f64, N>) -> Result<SVector<f64, N>, E>,
    x: &SVector<f64, N>,
    steps: &SVector<f64, N>,
    angle_indices: &[usize],
) -> Result<SMatrix<f64, N, N>, E> {
    let mut jac = SMatrix::<f64, N, N>::zeros();
    for j in 0..N {
        let mut xp = *x;
        let mut xm = *x;
        xp[j] += steps[j];
        xm[j] -= steps[j];
        let mut d = f(&xp)? - f(&xm)?;
        for &i in angle_indices {
            d[i] = wrap_pi(d[i]);
        }
        jac.set_column(j, &(d / (2.0 * steps[j])));
    }
    Ok(jac)
}

pub fn symmetrize<const N: usize>(m: &mut SMatrix<f64, N, N>) {
    *m = (*m + m.transpose()) * 0.5;
}

/// Inverse of a symmetric positive semidefinite matrix. Falls back to adding
/// `1e-12 · trace` to the diagonal when the Cholesky factorization fails.
pub fn spd_inverse<const N: usize>(m: &SMatrix<f64, N, N>) -> Option<SMatrix<f64, N, N>> {
    if let Some(c) = Cholesky::new(*m) {
        return Some(c.inverse());
    }
    let jitter = 1e-12 * m.trace();
    if !(jitter > 0.0) {
        return None;
    }
    Cholesky::new(m + SMatrix::<f64, N, N>::identity() * jitter).map(|c| c.inverse())
}

/// Full-state EKF with a dense covariance.
#[derive(Clone, Debug, PartialEq)]
pub struct Ekf<const N: usize> {
    pub x: SVector<f64, N>,
    pub p: SMatrix<f64, N, N>,
    angle_indices: Vec<usize>,
}

impl<const N: usize> Ekf<N> {
    pub fn new(x: SVector<f64, N>, p: SMatrix<f64, N, N>, angle_indices: &[usize]) -> Self {
        Ekf { x, p, angle_indices: angle_indices.to_vec() }
    }

    pub fn angle_indices(&self) -> &[usize] {
        &self.angle_indices
    }

    fn wrap_state(&mut self) {
        for &i in &self.angle_indices {
            self.x[i] = wrap_pi(self.x[i]);
        }
    }

    /// `x ← F x`, `P ← F P Fᵀ + Q`.
    pub fn predict_linear(&mut self, f: &SMatrix<f64, N, N>, q: &SMatrix<f64, N, N>) {
        self.x = f * self.x;
        self.wrap_state();
        self.p = f * self.p * f.transpose() + q;
        symmetrize(&mut self.p);
    }

    /// `x ← f(x)`, `P ← F P Fᵀ + Q` with `F` the numeric Jacobian of `f`.
    /// Returns the Jacobian that was used.
    pub fn predict_nonlinear<E>(
        &mut self,
        f: impl Fn(&SVector<f64, N>) -> Result<SVector<f64, N>, E>,
        steps: &SVector<f64, N>,
        q: &SMatrix<f64, N, N>,
    ) -> Result<SMatrix<f64, N, N>, E> {
        let jac = numeric_jacobian(&f, &self.x, steps, &self.angle_indices)?;
        self.x = f(&self.x)?;
        self.wrap_state();
        self.p = jac * self.p * jac.transpose() + q;
        symmetrize(&mut self.p);
        Ok(jac)
    }

    /// Scalar update with a known measurement row (Joseph form). `gate` is the
    /// largest accepted |innovation| in innovation standard deviations.
    pub fn update_linear(
        &mut self,
        innovation: f64,
        h: &RowSVector<f64, N>,
        r: f64,
        gate: Option<f64>,
    ) -> Result<UpdateOutcome, EstimationError> {
        let ph = self.p * h.transpose();
        let s = (h * ph)[0] + r;
        if !(s > 0.0) || !s.is_finite() {
            return Err(EstimationError::SingularInnovation(s));
        }
        if !innovation.is_finite() {
            return Err(EstimationError::NonFinite);
        }
        if let Some(g) = gate {
            if innovation.abs() > g * s.sqrt() {
                return Ok(UpdateOutcome { innovation, variance: s, applied: false });
            }
        }
        let k = ph / s;
        self.x += k * innovation;
        self.wrap_state();
        let ikh = SMatrix::<f64, N, N>::identity() - k * h;
        self.p = ikh * self.p * ikh.transpose() + k * k.transpose() * r;
        symmetrize(&mut self.p);
        Ok(UpdateOutcome { innovation, variance: s, applied: true })
    }

    /// Scalar update against a nonlinear model `h`; the measurement row is the
    /// central-difference gradient of `h` at the current estimate.
    pub fn update_nonlinear<E: From<EstimationError>>(
        &mut self,
        z: f64,
        h: impl Fn(&SVector<f64, N>) -> Result<f64, E>,
        steps: &SVector<f64, N>,
        r: f64,
        gate: Option<f64>,
    ) -> Result<UpdateOutcome, E> {
        let row = numeric_gradient(&h, &self.x, steps)?;
        let innovation = z - h(&self.x)?;
        Ok(self.update_linear(innovation, &row, r, gate)?)
    }
}

/// One step of the additive-Gaussian PCRB recursion
/// `J ← (Q + F J⁻¹ Fᵀ)⁻¹ + Σ Hᵀ R⁻¹ H`.
pub fn pcrb_step<const N: usize>(
    j: &SMatrix<f64, N, N>,
    f: &SMatrix<f64, N, N>,
    q: &SMatrix<f64, N, N>,
    measurements: &[(RowSVector<f64, N>, f64)],
) -> Result<SMatrix<f64, N, N>, EstimationError> {
    let prior = match spd_inverse(j) {
        Some(cov) => {
            let mut pred = q + f * cov * f.transpose();
            symmetrize(&mut pred);
            spd_inverse(&pred)
        }
        None => None,
    };
    let mut next = match prior {
        Some(p) => p,
        None if measurements.is_empty() => return Err(EstimationError::SingularInformation),
        None => SMatrix::<f64, N, N>::zeros(),
    };
    next += measurement_information(measurements);
    symmetrize(&mut next);
    if next.iter().any(|v| !v.is_finite()) {
        return Err(EstimationError::NonFinite);
    }
    Ok(next)
}

/// `Σ Hᵀ R⁻¹ H` over scalar measurements.
pub fn measurement_information<const N: usize>(measurements: &[(RowSVector<f64, N>, f64)]) -> SMatrix<f64, N, N> {
    let mut info = SMatrix::<f64, N, N>::zeros();
    for (h, r) in measurements {
        info += h.transpose() * h / *r;
    }
    info
}
