use nalgebra::DVector;

use super::linalg::{CholeskyFactor, SymmetricMatrix};
use crate::error::{Error, Result};

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// `log N(z; 0, I)`.
#[inline]
pub fn standard_normal_logpdf(z: &[f64]) -> f64 {
    -0.5 * (z.len() as f64 * LN_2PI + z.iter().map(|v| v * v).sum::<f64>())
}

/// Multivariate normal with a cached Cholesky factor.
#[derive(Clone, Debug)]
pub struct GaussianDensity {
    mean: DVector<f64>,
    chol: CholeskyFactor,
    norm: f64,
}

impl GaussianDensity {
    pub fn new(mean: DVector<f64>, cov: &SymmetricMatrix) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::arg(format!(
                "mean has length {} but covariance is {}x{}",
                mean.len(),
                cov.dim(),
                cov.dim()
            )));
        }
        let chol = cov.cholesky()?;
        let norm = -0.5 * (mean.len() as f64 * LN_2PI + chol.log_det());
        Ok(Self { mean, chol, norm })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cholesky(&self) -> &CholeskyFactor {
        &self.chol
    }

    pub fn logpdf(&self, z: &[f64]) -> Result<f64> {
        if z.len() != self.dim() {
            return Err(Error::arg(format!(
                "point has length {} but density has dimension {}",
                z.len(),
                self.dim()
            )));
        }
        let r = DVector::from_iterator(z.len(), z.iter().zip(self.mean.iter()).map(|(a, b)| a - b));
        Ok(self.norm - 0.5 * self.chol.quad_form(&r))
    }

    /// Log-density with the mean replaced by `mean` (same covariance).
    pub fn logpdf_centered_at(&self, z: &[f64], mean: &[f64]) -> f64 {
        let r = DVector::from_iterator(z.len(), z.iter().zip(mean).map(|(a, b)| a - b));
        self.norm - 0.5 * self.chol.quad_form(&r)
    }
}

/// `log N(z; mean, cov)`.
pub fn gaussian_logpdf(z: &[f64], mean: &[f64], cov: &SymmetricMatrix) -> Result<f64> {
    GaussianDensity::new(DVector::from_column_slice(mean), cov)?.logpdf(z)
}
