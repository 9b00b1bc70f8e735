use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use super::{check_len, JointCovariance, Model};
use crate::error::{Error, Result};
use crate::numerics::{random_orthonormal, CholeskyFactor, GaussianDensity, SymmetricMatrix};
use crate::rng::stream;

/// Nugget added to the generated prior covariance, relative to the kernel
/// amplitude. Squared-exponential kernels on dense grids are numerically
/// singular without it.
pub const PRIOR_NUGGET_REL: f64 = 1e-8;

/// `Y = G X + E` with `X ~ N(0, Σ_X)` and `E ~ N(0, Σ_E)` independent.
#[derive(Clone, Debug)]
pub struct LinearGaussianModel {
    g: DMatrix<f64>,
    sigma_x: SymmetricMatrix,
    sigma_e: SymmetricMatrix,
    chol_x: CholeskyFactor,
    chol_e: CholeskyFactor,
    prior: GaussianDensity,
    noise: GaussianDensity,
}

impl LinearGaussianModel {
    pub fn new(g: DMatrix<f64>, sigma_x: SymmetricMatrix, sigma_e: SymmetricMatrix) -> Result<Self> {
        if g.ncols() != sigma_x.dim() || g.nrows() != sigma_e.dim() {
            return Err(Error::arg(format!(
                "G is {}x{} but Σ_X is {}x{} and Σ_E is {}x{}",
                g.nrows(),
                g.ncols(),
                sigma_x.dim(),
                sigma_x.dim(),
                sigma_e.dim(),
                sigma_e.dim()
            )));
        }
        let chol_x = sigma_x.cholesky()?;
        let chol_e = sigma_e.cholesky()?;
        let prior = GaussianDensity::new(DVector::zeros(sigma_x.dim()), &sigma_x)?;
        let noise = GaussianDensity::new(DVector::zeros(sigma_e.dim()), &sigma_e)?;
        Ok(Self {
            g,
            sigma_x,
            sigma_e,
            chol_x,
            chol_e,
            prior,
            noise,
        })
    }

    /// Scalar model `Y = g X + E`, `X ~ N(0, prior_var)`, `E ~ N(0, noise_var)`.
    pub fn scalar(g: f64, prior_var: f64, noise_var: f64) -> Result<Self> {
        Self::new(
            DMatrix::from_element(1, 1, g),
            SymmetricMatrix::from_diagonal(&[prior_var]),
            SymmetricMatrix::from_diagonal(&[noise_var]),
        )
    }

    pub fn g(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn sigma_x(&self) -> &SymmetricMatrix {
        &self.sigma_x
    }

    pub fn sigma_e(&self) -> &SymmetricMatrix {
        &self.sigma_e
    }

    /// `Σ_Y = G Σ_X Gᵀ + Σ_E`.
    pub fn sigma_y(&self) -> SymmetricMatrix {
        let m = &self.g * self.sigma_x.as_matrix() * self.g.transpose() + self.sigma_e.as_matrix();
        SymmetricMatrix::from_matrix(m).unwrap()
    }

    /// `Σ_XY = Σ_X Gᵀ`.
    pub fn sigma_xy(&self) -> DMatrix<f64> {
        self.sigma_x.as_matrix() * self.g.transpose()
    }

    /// Same model with the noise covariance multiplied by `c`.
    pub fn with_noise_scale(&self, c: f64) -> Result<Self> {
        Self::new(self.g.clone(), self.sigma_x.clone(), self.sigma_e.scaled(c))
    }

    fn draw(&self, rng: &mut dyn RngCore) -> (DVector<f64>, DVector<f64>) {
        let zx = DVector::from_fn(self.sigma_x.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        let ze = DVector::from_fn(self.sigma_e.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        let x = self.chol_x.l() * zx;
        let y = &self.g * &x + self.chol_e.l() * ze;
        (x, y)
    }
}

impl Model for LinearGaussianModel {
    fn name(&self) -> String {
        format!("linear-gaussian({}x{})", self.g.nrows(), self.g.ncols())
    }

    fn n_x(&self) -> usize {
        self.g.ncols()
    }

    fn n_y(&self) -> usize {
        self.g.nrows()
    }

    fn sample_pair(&self, rng: &mut dyn RngCore) -> (DVector<f64>, DVector<f64>) {
        self.draw(rng)
    }

    fn sample_prior(&self, rng: &mut dyn RngCore) -> Result<DVector<f64>> {
        let z = DVector::from_fn(self.sigma_x.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        Ok(self.chol_x.l() * z)
    }

    fn log_likelihood(&self, y: &[f64], x: &[f64]) -> Result<f64> {
        check_len("x", x.len(), self.n_x())?;
        check_len("y", y.len(), self.n_y())?;
        let mean = &self.g * DVector::from_column_slice(x);
        Ok(self.noise.logpdf_centered_at(y, mean.as_slice()))
    }

    fn prior_logpdf(&self, x: &[f64]) -> Result<f64> {
        self.prior.logpdf(x)
    }

    fn forward_jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        check_len("x", x.len(), self.n_x())?;
        Ok(self.g.clone())
    }

    fn gaussian_prior(&self) -> Option<(DVector<f64>, SymmetricMatrix)> {
        Some((DVector::zeros(self.n_x()), self.sigma_x.clone()))
    }

    fn noise_covariance(&self) -> Option<SymmetricMatrix> {
        Some(self.sigma_e.clone())
    }

    fn has_constant_jacobian(&self) -> bool {
        true
    }

    fn exact_eig(&self) -> Option<f64> {
        closed_form_eig(self, None, None).ok()
    }

    fn joint_covariance(&self) -> Option<JointCovariance> {
        Some(JointCovariance {
            sigma_x: self.sigma_x.clone(),
            sigma_y: self.sigma_y(),
            sigma_xy: self.sigma_xy(),
        })
    }
}

/// `K_ij = σ exp(−‖z_i − z_j‖² / l²)` on scalar locations.
pub fn squared_exp_covariance(points: &[f64], sigma: f64, length: f64) -> Result<SymmetricMatrix> {
    if !(sigma > 0.0) || !(length > 0.0) {
        return Err(Error::arg(format!(
            "kernel amplitude and length scale must be positive (σ = {sigma}, l = {length})"
        )));
    }
    Ok(SymmetricMatrix::from_fn(points.len(), |i, j| {
        let d = points[i] - points[j];
        sigma * (-(d * d) / (length * length)).exp()
    }))
}

/// `n` equispaced points on `[0, 1]`.
pub fn equispaced(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}

/// Random linear-Gaussian benchmark.
///
/// `G = A diag(λ) Bᵀ` with `λ₁ = 1`, `λᵢ = decay·λᵢ₋₁`, and `A`, `B` random
/// orthonormal factors drawn from `seed`. The prior covariance is a
/// squared-exponential kernel (σ = 0.1, l = 0.1) on `n_x` equispaced points of
/// `[0, 1]` plus a small nugget; the noise covariance is `0.01 I`.
pub fn make_linear_gaussian(n_x: usize, n_y: usize, decay: f64, seed: u64) -> Result<LinearGaussianModel> {
    if n_y > n_x {
        return Err(Error::arg(format!("n_y = {n_y} must not exceed n_x = {n_x}")));
    }
    if n_y == 0 {
        return Err(Error::arg("dimensions must be positive"));
    }
    if !(decay > 0.0 && decay <= 1.0) {
        return Err(Error::arg(format!("decay must lie in (0, 1], got {decay}")));
    }
    let left = random_orthonormal(n_y, n_y, &mut stream(seed, "linear-gaussian/left", 0));
    let right = random_orthonormal(n_x, n_y, &mut stream(seed, "linear-gaussian/right", 0));
    let spectrum = DVector::from_fn(n_y, |i, _| decay.powi(i as i32));
    let g = left * DMatrix::from_diagonal(&spectrum) * right.transpose();
    let sigma = 0.1;
    let kernel = squared_exp_covariance(&equispaced(n_x), sigma, 0.1)?;
    let sigma_x = kernel.add_diagonal(PRIOR_NUGGET_REL * sigma);
    let sigma_e = SymmetricMatrix::identity(n_y).scaled(0.01);
    LinearGaussianModel::new(g, sigma_x, sigma_e)
}

/// Mutual information between `U_rᵀ X` and `V_sᵀ Y` for jointly Gaussian
/// `(X, Y)` with the given covariance blocks.
///
/// Computed as `½ [log det Σ_s − log det (Σ_s − Cᵀ Σ_r⁻¹ C)]`, where `Σ_r`,
/// `Σ_s` are the projected marginal covariances and `C` the projected
/// cross-covariance.
pub fn projected_gaussian_eig(
    sigma_x: &SymmetricMatrix,
    sigma_y: &SymmetricMatrix,
    sigma_xy: &DMatrix<f64>,
    u_r: Option<&DMatrix<f64>>,
    v_s: Option<&DMatrix<f64>>,
) -> Result<f64> {
    let sx = match u_r {
        Some(u) => sigma_x.congruence(u),
        None => sigma_x.clone(),
    };
    let sy = match v_s {
        Some(v) => sigma_y.congruence(v),
        None => sigma_y.clone(),
    };
    let mut c = sigma_xy.clone();
    if let Some(u) = u_r {
        c = u.transpose() * c;
    }
    if let Some(v) = v_s {
        c *= v;
    }
    let chol_r = sx.cholesky()?;
    let b = chol_r.solve_lower_mat(&c);
    let cond = SymmetricMatrix::from_matrix(sy.as_matrix() - b.transpose() * &b)?;
    let ld_s = sy.cholesky()?.log_det();
    let ld_cond = cond.cholesky()?.log_det();
    Ok(0.5 * (ld_s - ld_cond))
}

/// Exact EIG of a linear-Gaussian model, optionally for the projected pair
/// `(U_rᵀ X, V_sᵀ Y)`.
pub fn closed_form_eig(
    model: &LinearGaussianModel,
    u_r: Option<&DMatrix<f64>>,
    v_s: Option<&DMatrix<f64>>,
) -> Result<f64> {
    if let Some(u) = u_r {
        if u.nrows() != model.n_x() || u.ncols() == 0 {
            return Err(Error::arg(format!(
                "U_r must have {} rows and at least one column",
                model.n_x()
            )));
        }
    }
    if let Some(v) = v_s {
        if v.nrows() != model.n_y() || v.ncols() == 0 {
            return Err(Error::arg(format!(
                "V_s must have {} rows and at least one column",
                model.n_y()
            )));
        }
    }
    if u_r.is_none() && v_s.is_none() {
        let ld_y = model.sigma_y().cholesky()?.log_det();
        let ld_e = model.sigma_e.cholesky()?.log_det();
        return Ok(0.5 * (ld_y - ld_e));
    }
    projected_gaussian_eig(&model.sigma_x, &model.sigma_y(), &model.sigma_xy(), u_r, v_s)
}
