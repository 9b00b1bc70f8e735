//! Linear dimension reduction for EIG estimation.
//!
//! The CMI basis keeps the leading eigendirections of gradient-based
//! diagnostic matrices, which minimize an upper bound on the information lost
//! by projecting. PCA and CCA bases are provided for comparison. Estimates on
//! the projected pair use the posterior-map estimator with the exact
//! projected Gaussian prior.

mod basis;
mod diagnostics;
mod grid;
mod projected;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::models::{projected_gaussian_eig, JointCovariance, JointSampleSet};
use crate::numerics::{cross_covariance, sample_covariance, SymmetricMatrix};

pub use basis::{
    cca_basis, cmi_basis, pca_basis, project, reduction_basis, truncation_bound, ProjectionBasis, ReductionMethod,
};
pub use diagnostics::{diagnostic_matrices, DiagnosticPair};
pub use grid::{dimred_grid, DimredConfig, DimredRow, DimredTable, DIMRED_CSV_HEADER};
pub use projected::{projected_eig_pos, ProjectedModel};

/// Empirical covariance blocks of paired samples.
pub fn empirical_covariance(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<JointCovariance> {
    Ok(JointCovariance {
        sigma_x: sample_covariance(x)?,
        sigma_y: sample_covariance(y)?,
        sigma_xy: cross_covariance(x, y)?,
    })
}

/// Mutual information of `(X, Y)` computed as if the pair were Gaussian:
/// `½ log [det Σ̂_X det Σ̂_Y / det Σ̂_{XY}]` from the sample covariances.
pub fn gaussian_eig(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<f64> {
    let need = x.ncols() + y.ncols() + 2;
    if x.nrows() < need {
        return Err(Error::InsufficientSamples {
            needed: need,
            got: x.nrows(),
        });
    }
    let mut joint = DMatrix::zeros(x.nrows(), x.ncols() + y.ncols());
    joint.columns_mut(0, x.ncols()).copy_from(x);
    joint.columns_mut(x.ncols(), y.ncols()).copy_from(y);
    let cov = sample_covariance(&joint)?;
    let m = cov.as_matrix();
    let (nx, ny) = (x.ncols(), y.ncols());
    let sx = SymmetricMatrix::from_matrix(m.view((0, 0), (nx, nx)).into_owned())?;
    let sy = SymmetricMatrix::from_matrix(m.view((nx, nx), (ny, ny)).into_owned())?;
    let ld = |s: &SymmetricMatrix| -> Result<f64> {
        let c = s.cholesky()?;
        if c.jitter() > 0.0 {
            log::warn!("sample covariance needed jitter {:.3e}", c.jitter());
        }
        Ok(c.log_det())
    };
    Ok(0.5 * (ld(&sx)? + ld(&sy)? - ld(&cov)?))
}

/// [`gaussian_eig`] of the projected samples `(X U_r, Y V_s)`, using every row.
pub fn gaussian_eig_projected(samples: &JointSampleSet, basis: &ProjectionBasis, r: usize, s: usize) -> Result<f64> {
    let (u, v) = basis.truncate(r, s)?;
    gaussian_eig(&(samples.x() * u), &(samples.y() * v))
}

/// Same log-determinant ratio from exact covariance blocks.
pub fn gaussian_eig_exact(
    cov: &JointCovariance,
    u_r: Option<&DMatrix<f64>>,
    v_s: Option<&DMatrix<f64>>,
) -> Result<f64> {
    projected_gaussian_eig(&cov.sigma_x, &cov.sigma_y, &cov.sigma_xy, u_r, v_s)
}

#[cfg(test)]
mod tests;
