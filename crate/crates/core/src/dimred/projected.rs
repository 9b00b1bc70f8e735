use nalgebra::{DMatrix, DVector};
use rand::RngCore;

use super::ProjectionBasis;
use crate::error::{Error, Result};
use crate::estimators::{transport_eig, EigEstimate, EstimatorKind, TransportOptions};
use crate::models::{projected_gaussian_eig, JointCovariance, Model};
use crate::numerics::{GaussianDensity, SymmetricMatrix};

/// The pair `(U_rᵀ X, V_sᵀ Y)` seen as a model of its own.
///
/// Samples are projections of the inner model's samples drawn from the same
/// generator, so a projected estimate and an unprojected one with the same
/// seed see the same underlying draws. The projected prior is the exact
/// Gaussian `N(U_rᵀ μ, U_rᵀ Σ_X U_r)`. There is no projected likelihood.
#[derive(Debug)]
pub struct ProjectedModel<'a, M: Model + ?Sized> {
    inner: &'a M,
    u_r: DMatrix<f64>,
    v_s: DMatrix<f64>,
    prior: Option<GaussianDensity>,
}

impl<'a, M: Model + ?Sized> ProjectedModel<'a, M> {
    pub fn new(inner: &'a M, basis: &ProjectionBasis, r: usize, s: usize) -> Result<Self> {
        if basis.n_x() != inner.n_x() || basis.n_y() != inner.n_y() {
            return Err(Error::arg("basis dimensions do not match the model"));
        }
        let (u_r, v_s) = basis.truncate(r, s)?;
        let prior = match inner.gaussian_prior() {
            Some((mean, cov)) => Some(GaussianDensity::new(u_r.transpose() * mean, &cov.congruence(&u_r))?),
            None => None,
        };
        Ok(Self { inner, u_r, v_s, prior })
    }

    pub fn u_r(&self) -> &DMatrix<f64> {
        &self.u_r
    }

    pub fn v_s(&self) -> &DMatrix<f64> {
        &self.v_s
    }
}

impl<M: Model + ?Sized> Model for ProjectedModel<'_, M> {
    fn name(&self) -> String {
        format!(
            "{} projected to ({}, {})",
            self.inner.name(),
            self.u_r.ncols(),
            self.v_s.ncols()
        )
    }

    fn n_x(&self) -> usize {
        self.u_r.ncols()
    }

    fn n_y(&self) -> usize {
        self.v_s.ncols()
    }

    fn sample_pair(&self, rng: &mut dyn RngCore) -> (DVector<f64>, DVector<f64>) {
        let (x, y) = self.inner.sample_pair(rng);
        (self.u_r.tr_mul(&x), self.v_s.tr_mul(&y))
    }

    fn sample_prior(&self, rng: &mut dyn RngCore) -> Result<DVector<f64>> {
        Ok(self.u_r.tr_mul(&self.inner.sample_prior(rng)?))
    }

    fn prior_logpdf(&self, x: &[f64]) -> Result<f64> {
        self.prior
            .as_ref()
            .ok_or(Error::Unsupported("a projected prior density"))?
            .logpdf(x)
    }

    fn gaussian_prior(&self) -> Option<(DVector<f64>, SymmetricMatrix)> {
        let (mean, cov) = self.inner.gaussian_prior()?;
        Some((self.u_r.tr_mul(&mean), cov.congruence(&self.u_r)))
    }

    fn exact_eig(&self) -> Option<f64> {
        let c = self.inner.joint_covariance()?;
        projected_gaussian_eig(&c.sigma_x, &c.sigma_y, &c.sigma_xy, Some(&self.u_r), Some(&self.v_s)).ok()
    }

    fn joint_covariance(&self) -> Option<JointCovariance> {
        let c = self.inner.joint_covariance()?;
        Some(JointCovariance {
            sigma_x: c.sigma_x.congruence(&self.u_r),
            sigma_y: c.sigma_y.congruence(&self.v_s),
            sigma_xy: self.u_r.transpose() * c.sigma_xy * &self.v_s,
        })
    }
}

/// Projected posterior estimator: draw `L` samples, project them onto
/// `(U_r, V_s)`, train the conditional map of `X_r` given `Y_s` on `N` of
/// them and divide by the exact projected prior on the other `M`.
#[allow(clippy::too_many_arguments)]
pub fn projected_eig_pos<M: Model + ?Sized>(
    model: &M,
    basis: &ProjectionBasis,
    r: usize,
    s: usize,
    budget: usize,
    p: f64,
    seed: u64,
    opts: &TransportOptions,
) -> Result<EigEstimate> {
    let projected = ProjectedModel::new(model, basis, r, s)?;
    transport_eig(&projected, EstimatorKind::Pos, budget, p, seed, opts)
}
