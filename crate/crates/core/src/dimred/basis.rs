use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::DiagnosticPair;
use crate::error::{Error, Result};
use crate::models::{JointCovariance, JointSampleSet};
use crate::numerics::{generalized_eigendecomposition, SymmetricMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReductionMethod {
    Cmi,
    Pca,
    Cca,
}

impl ReductionMethod {
    pub const ALL: [ReductionMethod; 3] = [ReductionMethod::Cmi, ReductionMethod::Pca, ReductionMethod::Cca];

    pub fn as_str(self) -> &'static str {
        match self {
            ReductionMethod::Cmi => "cmi",
            ReductionMethod::Pca => "pca",
            ReductionMethod::Cca => "cca",
        }
    }
}

impl fmt::Display for ReductionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ReductionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ReductionMethod::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::arg(format!("unknown reduction method {s:?}")))
    }
}

/// Full parameter and data bases with their spectra, columns ordered by
/// decreasing eigenvalue. Reduced bases are the leading columns.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionBasis {
    pub method: ReductionMethod,
    /// `n_x × n_x`.
    pub u: DMatrix<f64>,
    /// `n_y × n_y`.
    pub v: DMatrix<f64>,
    pub lambda_x: DVector<f64>,
    pub lambda_y: DVector<f64>,
}

impl ProjectionBasis {
    pub fn n_x(&self) -> usize {
        self.u.nrows()
    }

    pub fn n_y(&self) -> usize {
        self.v.nrows()
    }

    fn check_ranks(&self, r: usize, s: usize) -> Result<()> {
        if r == 0 || s == 0 || r > self.n_x() || s > self.n_y() {
            return Err(Error::arg(format!(
                "ranks (r, s) = ({r}, {s}) must lie in 1..={} and 1..={}",
                self.n_x(),
                self.n_y()
            )));
        }
        Ok(())
    }

    /// `(U_r, V_s)`.
    pub fn truncate(&self, r: usize, s: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        self.check_ranks(r, s)?;
        Ok((self.u.columns(0, r).into_owned(), self.v.columns(0, s).into_owned()))
    }
}

/// Leading eigenvectors of the whitened diagnostic matrices mapped back to
/// the original coordinates: `U = Σ_X^{-1/2} Ũ` and `V = Σ_E^{-1/2} Ṽ`, so
/// that `Uᵀ Σ_X U = I` and `Vᵀ Σ_E V = I`.
pub fn cmi_basis(pair: &DiagnosticPair) -> Result<ProjectionBasis> {
    let ex = pair.h_x.eigen();
    let ey = pair.h_y.eigen();
    Ok(ProjectionBasis {
        method: ReductionMethod::Cmi,
        u: pair.sigma_x.inv_sqrt()? * ex.vectors,
        v: pair.sigma_e.inv_sqrt()? * ey.vectors,
        lambda_x: ex.values,
        lambda_y: ey.values,
    })
}

/// Principal directions of the prior and the data marginal.
pub fn pca_basis(sigma_x: &SymmetricMatrix, sigma_y: &SymmetricMatrix) -> ProjectionBasis {
    let ex = sigma_x.eigen();
    let ey = sigma_y.eigen();
    ProjectionBasis {
        method: ReductionMethod::Pca,
        u: ex.vectors,
        v: ey.vectors,
        lambda_x: ex.values,
        lambda_y: ey.values,
    }
}

/// Canonical directions from the pencils `Σ_XY Σ_Y⁻¹ Σ_YX u = ρ Σ_X u` and
/// `Σ_YX Σ_X⁻¹ Σ_XY v = ρ Σ_Y v`.
pub fn cca_basis(cov: &JointCovariance) -> Result<ProjectionBasis> {
    let cx = cov.sigma_x.cholesky()?;
    let cy = cov.sigma_y.cholesky()?;
    // Σ_XY Σ_Y⁻¹ Σ_YX = Bᵀ B with B = L_Y⁻¹ Σ_YX
    let by = cy.solve_lower_mat(&cov.sigma_xy.transpose());
    let bx = cx.solve_lower_mat(&cov.sigma_xy);
    let ax = SymmetricMatrix::from_matrix(by.transpose() * &by)?;
    let ay = SymmetricMatrix::from_matrix(bx.transpose() * &bx)?;
    let ex = generalized_eigendecomposition(&ax, &cov.sigma_x)?;
    let ey = generalized_eigendecomposition(&ay, &cov.sigma_y)?;
    Ok(ProjectionBasis {
        method: ReductionMethod::Cca,
        u: ex.vectors,
        v: ey.vectors,
        lambda_x: ex.values,
        lambda_y: ey.values,
    })
}

/// Basis for `method`. CMI needs the diagnostic pair; PCA and CCA use the
/// covariance blocks.
pub fn reduction_basis(
    method: ReductionMethod,
    pair: Option<&DiagnosticPair>,
    cov: &JointCovariance,
) -> Result<ProjectionBasis> {
    match method {
        ReductionMethod::Cmi => cmi_basis(pair.ok_or_else(|| Error::arg("CMI needs diagnostic matrices"))?),
        ReductionMethod::Pca => Ok(pca_basis(&cov.sigma_x, &cov.sigma_y)),
        ReductionMethod::Cca => cca_basis(cov),
    }
}

/// Samples projected onto `(U_r, V_s)`: rows become `(U_rᵀ x, V_sᵀ y)`. The
/// split and seed are kept.
pub fn project(samples: &JointSampleSet, basis: &ProjectionBasis, r: usize, s: usize) -> Result<JointSampleSet> {
    if samples.x().ncols() != basis.n_x() || samples.y().ncols() != basis.n_y() {
        return Err(Error::arg("sample dimensions do not match the basis"));
    }
    let (u, v) = basis.truncate(r, s)?;
    JointSampleSet::new(samples.x() * u, samples.y() * v, samples.seed())?.with_split(samples.n_train())
}

/// Trace of `h` on the orthogonal complement of the columns of `w`.
fn complement_trace(h: &SymmetricMatrix, w: &DMatrix<f64>) -> f64 {
    if w.ncols() == 0 {
        return h.trace();
    }
    let q = w.clone().qr().q();
    h.trace() - (q.transpose() * h.as_matrix() * &q).trace()
}

/// Information left out by keeping `(U_r, V_s)`: the trace of each whitened
/// diagnostic matrix on the complement of the retained directions. For the
/// CMI basis this is the sum of the trailing eigenvalues. It bounds the loss
/// only up to an unknown log-Sobolev constant, so it ranks truncations rather
/// than measuring them. `r = 0` or `s = 0` drops that side entirely.
pub fn truncation_bound(pair: &DiagnosticPair, basis: &ProjectionBasis, r: usize, s: usize) -> Result<f64> {
    if r > basis.n_x() || s > basis.n_y() {
        return Err(Error::arg(format!("ranks ({r}, {s}) exceed the basis dimensions")));
    }
    if basis.method == ReductionMethod::Cmi {
        let tail = |l: &DVector<f64>, k: usize| l.iter().skip(k).map(|v| v.max(0.0)).sum::<f64>();
        return Ok(tail(&basis.lambda_x, r) + tail(&basis.lambda_y, s));
    }
    let wx = pair.sigma_x.sqrt() * basis.u.columns(0, r);
    let wy = pair.sigma_e.sqrt() * basis.v.columns(0, s);
    Ok((complement_trace(&pair.h_x, &wx) + complement_trace(&pair.h_y, &wy)).max(0.0))
}
