use nalgebra::{SMatrix, SVector};

use crate::error::{Error, Result};

/// Below this norm the reflection direction is undefined.
pub const MIN_DIRECTION_NORM: f64 = 1e-8;

/// Parameters of `Σ = H diag(d) Hᵀ` with `H = I - 2 v vᵀ / |v|²`.
#[derive(Clone, Debug, PartialEq)]
pub struct HouseholderCovParams<const N: usize> {
    /// Eigenvalues of the resulting covariance; all strictly positive.
    pub d: SVector<f64, N>,
    /// Reflection direction.
    pub v: SVector<f64, N>,
}

impl<const N: usize> HouseholderCovParams<N> {
    pub fn validate(&self) -> Result<()> {
        if let Some(bad) = self.d.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
            return Err(Error::contract(format!("eigenvalue scale {bad} is not positive")));
        }
        let norm = self.v.norm();
        if !(norm >= MIN_DIRECTION_NORM) {
            return Err(Error::DegenerateDirection {
                norm,
                min: MIN_DIRECTION_NORM,
            });
        }
        Ok(())
    }
}

/// The reflection `I - 2 v vᵀ / |v|²`.
pub fn householder_matrix<const N: usize>(v: &SVector<f64, N>) -> Result<SMatrix<f64, N, N>> {
    let n2 = v.norm_squared();
    if !(n2.sqrt() >= MIN_DIRECTION_NORM) {
        return Err(Error::DegenerateDirection {
            norm: n2.sqrt(),
            min: MIN_DIRECTION_NORM,
        });
    }
    Ok(SMatrix::identity() - v * v.transpose() * (2.0 / n2))
}

/// Builds the covariance `H D Hᵀ`; its eigenvalues are exactly the entries of `d`.
pub fn householder_cov<const N: usize>(
    params: &HouseholderCovParams<N>,
) -> Result<SMatrix<f64, N, N>> {
    params.validate()?;
    let h = householder_matrix(&params.v)?;
    let cov = h * SMatrix::from_diagonal(&params.d) * h.transpose();
    Ok((cov + cov.transpose()) * 0.5)
}

/// Pulls a gradient with respect to the covariance back onto `(d, v)`.
pub fn householder_cov_backward<const N: usize>(
    params: &HouseholderCovParams<N>,
    grad_cov: &SMatrix<f64, N, N>,
) -> Result<(SVector<f64, N>, SVector<f64, N>)> {
    let h = householder_matrix(&params.v)?;
    let v = &params.v;
    let n2 = v.norm_squared();
    // H is symmetric, so Σ = H D H and dL/dd_i = (H G H)_ii.
    let hgh = h * grad_cov * h;
    let grad_d = hgh.diagonal();
    let k = (grad_cov + grad_cov.transpose()) * h * SMatrix::from_diagonal(&params.d);
    let grad_v = (k + k.transpose()) * v * (-2.0 / n2) + v * (4.0 * v.dot(&(k * v)) / (n2 * n2));
    Ok((grad_d, grad_v))
}
