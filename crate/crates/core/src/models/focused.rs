use nalgebra::{DMatrix, DVector};
use rand::RngCore;

use super::Model;
use crate::error::{Error, Result};
use crate::numerics::{GaussianDensity, SymmetricMatrix};

/// The pair `(X_I, Y)` for a subset `I` of the parameters of another model.
///
/// The remaining parameters are marginalized by simulation, so the likelihood
/// `π_{Y|X_I}` is not available in closed form. When the underlying prior is
/// Gaussian its marginal on `I` is exact.
#[derive(Debug)]
pub struct FocusedModel<M> {
    inner: M,
    indices: Vec<usize>,
    prior: Option<(DVector<f64>, SymmetricMatrix, GaussianDensity)>,
}

impl<M: Model> FocusedModel<M> {
    pub fn new(inner: M, indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::arg("focused model needs at least one parameter index"));
        }
        let mut seen = vec![false; inner.n_x()];
        for &i in &indices {
            if i >= inner.n_x() || seen[i] {
                return Err(Error::arg(format!(
                    "invalid or repeated focus index {i} for a model with {} parameters",
                    inner.n_x()
                )));
            }
            seen[i] = true;
        }
        let prior = match inner.gaussian_prior() {
            Some((mean, cov)) => {
                let k = indices.len();
                let m = DVector::from_fn(k, |a, _| mean[indices[a]]);
                let c = SymmetricMatrix::from_fn(k, |a, b| cov.as_matrix()[(indices[a], indices[b])]);
                let density = GaussianDensity::new(m.clone(), &c)?;
                Some((m, c, density))
            }
            None => None,
        };
        Ok(Self { inner, indices, prior })
    }

    pub fn inner(&self) -> &M {
        &self.inner
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }
}

impl<M: Model> Model for FocusedModel<M> {
    fn name(&self) -> String {
        format!("{} focused on {:?}", self.inner.name(), self.indices)
    }

    fn n_x(&self) -> usize {
        self.indices.len()
    }

    fn n_y(&self) -> usize {
        self.inner.n_y()
    }

    fn sample_pair(&self, rng: &mut dyn RngCore) -> (DVector<f64>, DVector<f64>) {
        let (x, y) = self.inner.sample_pair(rng);
        (DVector::from_fn(self.indices.len(), |a, _| x[self.indices[a]]), y)
    }

    fn sample_prior(&self, rng: &mut dyn RngCore) -> Result<DVector<f64>> {
        let x = self.inner.sample_prior(rng)?;
        Ok(DVector::from_fn(self.indices.len(), |a, _| x[self.indices[a]]))
    }

    fn prior_logpdf(&self, x: &[f64]) -> Result<f64> {
        match &self.prior {
            Some((_, _, density)) => density.logpdf(x),
            None => Err(Error::Unsupported("prior density evaluation")),
        }
    }

    fn forward_jacobian(&self, _x: &[f64]) -> Result<DMatrix<f64>> {
        Err(Error::Unsupported("forward-model gradients"))
    }

    fn gaussian_prior(&self) -> Option<(DVector<f64>, SymmetricMatrix)> {
        self.prior.as_ref().map(|(m, c, _)| (m.clone(), c.clone()))
    }
}
