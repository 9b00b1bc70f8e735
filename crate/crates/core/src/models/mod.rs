//! Priors, forward models, likelihoods and joint samplers.
//!
//! A [`Model`] advertises what it can do: every model can draw joint
//! `(x, y)` pairs, while exact likelihoods, prior densities and forward
//! Jacobians are optional capabilities reported through
//! [`Error::Unsupported`](crate::Error::Unsupported). The estimators use
//! these capabilities to decide which densities must be learned from samples.

mod focused;
mod linear;
mod moessbauer;
mod samples;
mod spec;

use std::fmt::Debug;

use nalgebra::{DMatrix, DVector};
use rand::RngCore;

use crate::error::{Error, Result};
use crate::numerics::SymmetricMatrix;

pub use focused::FocusedModel;
pub use linear::{
    closed_form_eig, equispaced, make_linear_gaussian, projected_gaussian_eig, squared_exp_covariance,
    LinearGaussianModel, PRIOR_NUGGET_REL,
};
pub use moessbauer::MoessbauerModel;
pub use samples::{sample_joint, JointSampleSet};
pub use spec::{Focus, ModelSpec};

/// A joint distribution `π(x, y) = π(x) π(y | x)` with optional exact densities.
pub trait Model: Send + Sync + Debug {
    fn name(&self) -> String;

    /// Parameter dimension.
    fn n_x(&self) -> usize;

    /// Observation dimension.
    fn n_y(&self) -> usize;

    /// One draw `x ~ π_X`, `y ~ π_{Y|X}(· | x)`.
    fn sample_pair(&self, rng: &mut dyn RngCore) -> (DVector<f64>, DVector<f64>);

    /// One prior draw. Required by nested Monte Carlo.
    fn sample_prior(&self, _rng: &mut dyn RngCore) -> Result<DVector<f64>> {
        Err(Error::Unsupported("prior sampling"))
    }

    /// `log π_{Y|X}(y | x)`.
    fn log_likelihood(&self, _y: &[f64], _x: &[f64]) -> Result<f64> {
        Err(Error::Unsupported("likelihood evaluation"))
    }

    /// `log π_X(x)`.
    fn prior_logpdf(&self, _x: &[f64]) -> Result<f64> {
        Err(Error::Unsupported("prior density evaluation"))
    }

    /// Jacobian of the forward map, `n_y × n_x`.
    fn forward_jacobian(&self, _x: &[f64]) -> Result<DMatrix<f64>> {
        Err(Error::Unsupported("forward-model gradients"))
    }

    /// Mean and covariance of the prior when it is Gaussian.
    fn gaussian_prior(&self) -> Option<(DVector<f64>, SymmetricMatrix)> {
        None
    }

    /// Covariance of additive Gaussian noise, when the model has it.
    fn noise_covariance(&self) -> Option<SymmetricMatrix> {
        None
    }

    /// True when the forward Jacobian does not depend on `x`.
    fn has_constant_jacobian(&self) -> bool {
        false
    }

    /// Exact EIG, when available in closed form.
    fn exact_eig(&self) -> Option<f64> {
        None
    }

    /// `(Σ_X, Σ_Y, Σ_XY)` when `(X, Y)` is jointly Gaussian.
    fn joint_covariance(&self) -> Option<JointCovariance> {
        None
    }
}

/// Covariance blocks of a jointly Gaussian pair.
#[derive(Clone, Debug, PartialEq)]
pub struct JointCovariance {
    pub sigma_x: SymmetricMatrix,
    pub sigma_y: SymmetricMatrix,
    /// `Cov(X, Y)`, `n_x × n_y`.
    pub sigma_xy: DMatrix<f64>,
}

pub(crate) fn check_len(what: &str, got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(Error::arg(format!("{what} has length {got}, expected {expected}")));
    }
    Ok(())
}

impl<T: Model + ?Sized> Model for Box<T> {
    fn name(&self) -> String {
        (**self).name()
    }
    fn n_x(&self) -> usize {
        (**self).n_x()
    }
    fn n_y(&self) -> usize {
        (**self).n_y()
    }
    fn sample_pair(&self, rng: &mut dyn RngCore) -> (DVector<f64>, DVector<f64>) {
        (**self).sample_pair(rng)
    }
    fn sample_prior(&self, rng: &mut dyn RngCore) -> Result<DVector<f64>> {
        (**self).sample_prior(rng)
    }
    fn log_likelihood(&self, y: &[f64], x: &[f64]) -> Result<f64> {
        (**self).log_likelihood(y, x)
    }
    fn prior_logpdf(&self, x: &[f64]) -> Result<f64> {
        (**self).prior_logpdf(x)
    }
    fn forward_jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        (**self).forward_jacobian(x)
    }
    fn gaussian_prior(&self) -> Option<(DVector<f64>, SymmetricMatrix)> {
        (**self).gaussian_prior()
    }
    fn noise_covariance(&self) -> Option<SymmetricMatrix> {
        (**self).noise_covariance()
    }
    fn has_constant_jacobian(&self) -> bool {
        (**self).has_constant_jacobian()
    }
    fn exact_eig(&self) -> Option<f64> {
        (**self).exact_eig()
    }
    fn joint_covariance(&self) -> Option<JointCovariance> {
        (**self).joint_covariance()
    }
}
