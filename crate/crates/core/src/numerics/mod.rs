//! Dense linear algebra, quadrature, Gaussian densities and summary statistics.
//!
//! Everything here is a pure function of immutable inputs.

mod gaussian;
mod linalg;
mod quadrature;
mod stats;

pub use gaussian::{gaussian_logpdf, standard_normal_logpdf, GaussianDensity, LN_2PI};
pub use linalg::{
    generalized_eigendecomposition, quadratic_form_moments, random_orthonormal, CholeskyFactor, EigenPair,
    SymmetricMatrix,
};
pub use quadrature::{gauss_legendre, unit_rule, UnitRule};
pub use stats::{cross_covariance, mean_and_standard_error, sample_covariance, sample_mean, skewness_kurtosis};
