//! Exact Gaussian algebra, Householder covariances and discrete
//! information-theoretic diagnostics. Everything here is a pure function.

mod discrete;
mod gaussian;
mod householder;

pub use discrete::{discrete_hetero_decomposition, DiscreteJoint, HeteroTerms};
pub use gaussian::{
    gaussian_entropy, gaussian_kl, gaussian_kl_with_grad, kl_prepared, Gaussian, KlGrad,
    Precision, RIDGE,
};
pub use householder::{
    householder_cov, householder_cov_backward, householder_matrix, HouseholderCovParams,
    MIN_DIRECTION_NORM,
};

pub type Vec2 = nalgebra::SVector<f64, 2>;
pub type Vec4 = nalgebra::SVector<f64, 4>;
pub type Mat4 = nalgebra::SMatrix<f64, 4, 4>;
pub type Mat4x2 = nalgebra::SMatrix<f64, 4, 2>;
