use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::models::Model;
use crate::numerics::SymmetricMatrix;
use crate::rng::stream;

/// Gradient-based diagnostic matrices in whitened coordinates.
///
/// `h_x = Σ_X^{1/2} E[∇Gᵀ Σ_E⁻¹ ∇G] Σ_X^{1/2}` and
/// `h_y = Σ_E^{-1/2} E[∇G Σ_X ∇Gᵀ] Σ_E^{-1/2}`, with the expectation over the
/// prior. The covariances used for whitening are kept alongside.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticPair {
    pub h_x: SymmetricMatrix,
    pub h_y: SymmetricMatrix,
    /// Prior draws averaged over; 1 when the Jacobian is constant.
    pub n_mc: usize,
    pub sigma_x: SymmetricMatrix,
    pub sigma_e: SymmetricMatrix,
}

/// Estimate the diagnostic matrices with `n_mc` prior draws, or exactly from
/// a single Jacobian when the model's Jacobian is constant.
pub fn diagnostic_matrices<M: Model + ?Sized>(model: &M, n_mc: usize, seed: u64) -> Result<DiagnosticPair> {
    let (mean, sigma_x) = model.gaussian_prior().ok_or(Error::Unsupported("a Gaussian prior"))?;
    let sigma_e = model
        .noise_covariance()
        .ok_or(Error::Unsupported("additive Gaussian noise"))?;
    // probe before spending any samples
    model.forward_jacobian(mean.as_slice())?;

    let (n_x, n_y) = (model.n_x(), model.n_y());
    let noise_inv = sigma_e.cholesky()?.inverse();
    let sx = sigma_x.as_matrix();
    let se_inv = noise_inv.as_matrix();
    let terms = |j: &DMatrix<f64>| (j.transpose() * se_inv * j, j * sx * j.transpose());

    let (a, b, n) = if model.has_constant_jacobian() {
        let j = model.forward_jacobian(mean.as_slice())?;
        let (a, b) = terms(&j);
        (a, b, 1)
    } else {
        if n_mc == 0 {
            return Err(Error::arg("n_mc must be at least 1"));
        }
        // collected first and summed in order so the result does not depend
        // on the thread count
        let per_draw: Result<Vec<_>> = (0..n_mc)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream(seed, "diagnostics", i as u64);
                let x = model.sample_prior(&mut rng)?;
                Ok(terms(&model.forward_jacobian(x.as_slice())?))
            })
            .collect();
        let sums = per_draw?.into_iter().fold(
            (DMatrix::zeros(n_x, n_x), DMatrix::zeros(n_y, n_y)),
            |(sa, sb), (a, b)| (sa + a, sb + b),
        );
        let k = n_mc as f64;
        (sums.0 / k, sums.1 / k, n_mc)
    };
    let sx_half = sigma_x.sqrt();
    let se_inv_half = sigma_e.inv_sqrt()?;
    Ok(DiagnosticPair {
        h_x: SymmetricMatrix::from_matrix(&sx_half * a * &sx_half)?,
        h_y: SymmetricMatrix::from_matrix(&se_inv_half * b * &se_inv_half)?,
        n_mc: n,
        sigma_x,
        sigma_e,
    })
}
