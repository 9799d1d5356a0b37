use nalgebra::{SMatrix, SVector};

use crate::error::{Error, Result};

/// Ridge added to every covariance before inversion or log-determinant.
pub const RIDGE: f64 = 1e-8;

const SYMMETRY_TOL: f64 = 1e-10;

/// Multivariate normal `N(mean, cov)` of fixed dimension `N`.
///
/// The dimension is part of the type, so mixing distributions of different
/// dimension is rejected at compile time.
#[derive(Clone, Debug, PartialEq)]
pub struct Gaussian<const N: usize> {
    pub mean: SVector<f64, N>,
    pub cov: SMatrix<f64, N, N>,
}

impl<const N: usize> Gaussian<N> {
    /// Builds a Gaussian, checking finiteness and symmetry of `cov`.
    pub fn new(mean: SVector<f64, N>, cov: SMatrix<f64, N, N>) -> Result<Self> {
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::numerical("non-finite Gaussian parameters"));
        }
        let scale = cov.amax().max(f64::MIN_POSITIVE);
        let asym = (cov - cov.transpose()).amax();
        if asym > SYMMETRY_TOL * scale {
            return Err(Error::numerical(format!(
                "covariance is not symmetric (max asymmetry {asym:e})"
            )));
        }
        Ok(Self { mean, cov })
    }

    pub fn standard() -> Self {
        Self {
            mean: SVector::zeros(),
            cov: SMatrix::identity(),
        }
    }

    /// `cov + RIDGE * I`.
    pub fn regularized_cov(&self) -> SMatrix<f64, N, N> {
        self.cov + SMatrix::<f64, N, N>::identity() * RIDGE
    }

    /// Natural-log density at `x`.
    pub fn log_density(&self, x: &SVector<f64, N>) -> Result<f64> {
        let prec = Precision::of(self, "density covariance")?;
        let d = x - self.mean;
        let maha = d.dot(&(prec.inv * d));
        Ok(-0.5 * (maha + prec.log_det + N as f64 * std::f64::consts::TAU.ln()))
    }
}

/// Cached inverse and log-determinant of a regularized covariance.
#[derive(Clone, Debug)]
pub struct Precision<const N: usize> {
    pub inv: SMatrix<f64, N, N>,
    pub log_det: f64,
}

impl<const N: usize> Precision<N> {
    /// Factorizes `g.cov + RIDGE * I`; `which` names the matrix in errors.
    pub fn of(g: &Gaussian<N>, which: &str) -> Result<Self> {
        let reg = g.regularized_cov();
        let chol = reg.cholesky().ok_or_else(|| {
            Error::numerical(format!("{which} is not positive definite after regularization"))
        })?;
        let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        if !log_det.is_finite() {
            return Err(Error::numerical(format!("{which} has a non-finite log-determinant")));
        }
        Ok(Self {
            inv: chol.inverse(),
            log_det,
        })
    }
}

/// Closed-form `KL[p || q]` in nats.
pub fn gaussian_kl<const N: usize>(p: &Gaussian<N>, q: &Gaussian<N>) -> Result<f64> {
    let pp = Precision::of(p, "covariance of p")?;
    let pq = Precision::of(q, "covariance of q")?;
    Ok(kl_prepared(p, pp.log_det, q, &pq))
}

/// KL divergence with both factorizations already available.
///
/// `log_det_p` must be the regularized log-determinant of `p.cov`.
pub fn kl_prepared<const N: usize>(
    p: &Gaussian<N>,
    log_det_p: f64,
    q: &Gaussian<N>,
    q_prec: &Precision<N>,
) -> f64 {
    let delta = q.mean - p.mean;
    let trace = (q_prec.inv * p.regularized_cov()).trace();
    let maha = delta.dot(&(q_prec.inv * delta));
    (0.5 * (trace + maha - N as f64 + q_prec.log_det - log_det_p)).max(0.0)
}

/// Partial derivatives of `KL[p || q]` with respect to both distributions' parameters.
#[derive(Clone, Debug)]
pub struct KlGrad<const N: usize> {
    pub mean_p: SVector<f64, N>,
    pub cov_p: SMatrix<f64, N, N>,
    pub mean_q: SVector<f64, N>,
    pub cov_q: SMatrix<f64, N, N>,
}

/// KL divergence together with its gradient.
pub fn gaussian_kl_with_grad<const N: usize>(
    p: &Gaussian<N>,
    q: &Gaussian<N>,
) -> Result<(f64, KlGrad<N>)> {
    let pp = Precision::of(p, "covariance of p")?;
    let pq = Precision::of(q, "covariance of q")?;
    let delta = q.mean - p.mean;
    let cov_p = p.regularized_cov();
    let kl = 0.5
        * ((pq.inv * cov_p).trace() + delta.dot(&(pq.inv * delta)) - N as f64 + pq.log_det
            - pp.log_det);
    let qd = pq.inv * delta;
    let grad = KlGrad {
        mean_p: -qd,
        mean_q: qd,
        cov_p: (pq.inv - pp.inv) * 0.5,
        cov_q: (pq.inv - pq.inv * cov_p * pq.inv - qd * qd.transpose()) * 0.5,
    };
    Ok((kl.max(0.0), grad))
}

/// Differential entropy `0.5 * ln((2*pi*e)^N det cov)` in nats.
pub fn gaussian_entropy<const N: usize>(p: &Gaussian<N>) -> Result<f64> {
    let prec = Precision::of(p, "covariance")?;
    let n = N as f64;
    Ok(0.5 * (n * (std::f64::consts::TAU * std::f64::consts::E).ln() + prec.log_det))
}
