use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{check_len, Model};
use crate::error::{Error, Result};
use crate::numerics::{SymmetricMatrix, LN_2PI};

/// Lorentzian absorption-peak model.
///
/// Parameters are `x = (center, log width, log height, log offset)` with
/// independent Gaussian priors, and each observation is
/// `y_i = offset − height·width² / (width² + (center − d_i)²) + ε_i` with
/// `ε_i ~ N(0, noise_sd²)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoessbauerModel {
    #[serde(default = "default_velocities")]
    pub velocities: Vec<f64>,
    #[serde(default = "default_noise_sd")]
    pub noise_sd: f64,
    #[serde(default = "default_prior_mean")]
    pub prior_mean: [f64; 4],
    #[serde(default = "default_prior_sd")]
    pub prior_sd: [f64; 4],
}

fn default_velocities() -> Vec<f64> {
    vec![-1.3, 0.0, 1.3]
}

fn default_noise_sd() -> f64 {
    0.1
}

fn default_prior_mean() -> [f64; 4] {
    [0.0, 0.0, 0.0, 1.0]
}

fn default_prior_sd() -> [f64; 4] {
    [1.0, 0.3, 0.3, 0.2]
}

impl Default for MoessbauerModel {
    fn default() -> Self {
        Self {
            velocities: default_velocities(),
            noise_sd: default_noise_sd(),
            prior_mean: default_prior_mean(),
            prior_sd: default_prior_sd(),
        }
    }
}

impl MoessbauerModel {
    pub fn new(velocities: Vec<f64>, noise_sd: f64) -> Result<Self> {
        let m = Self {
            velocities,
            noise_sd,
            ..Self::default()
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.velocities.is_empty() {
            return Err(Error::arg("at least one velocity is required"));
        }
        if !(self.noise_sd > 0.0) {
            return Err(Error::arg(format!("noise sd must be positive, got {}", self.noise_sd)));
        }
        if self.prior_sd.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::arg("prior standard deviations must be positive"));
        }
        Ok(())
    }

    /// Noise-free observations at parameters `x`.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let (c, w, h, o) = (x[0], x[1].exp(), x[2].exp(), x[3].exp());
        let w2 = w * w;
        self.velocities
            .iter()
            .map(|d| o - h * w2 / (w2 + (c - d).powi(2)))
            .collect()
    }
}

impl Model for MoessbauerModel {
    fn name(&self) -> String {
        format!("moessbauer({} velocities)", self.velocities.len())
    }

    fn n_x(&self) -> usize {
        4
    }

    fn n_y(&self) -> usize {
        self.velocities.len()
    }

    fn sample_pair(&self, rng: &mut dyn RngCore) -> (DVector<f64>, DVector<f64>) {
        let x = self.sample_prior(rng).unwrap();
        let y = self
            .forward(x.as_slice())
            .into_iter()
            .map(|g| g + self.noise_sd * rng.sample::<f64, _>(StandardNormal))
            .collect::<Vec<_>>();
        (x, DVector::from_vec(y))
    }

    fn sample_prior(&self, rng: &mut dyn RngCore) -> Result<DVector<f64>> {
        Ok(DVector::from_fn(4, |i, _| {
            self.prior_mean[i] + self.prior_sd[i] * rng.sample::<f64, _>(StandardNormal)
        }))
    }

    fn log_likelihood(&self, y: &[f64], x: &[f64]) -> Result<f64> {
        check_len("x", x.len(), 4)?;
        check_len("y", y.len(), self.n_y())?;
        let s2 = self.noise_sd * self.noise_sd;
        let ss: f64 = self.forward(x).iter().zip(y).map(|(g, y)| (y - g).powi(2)).sum();
        let n = y.len() as f64;
        Ok(-0.5 * (ss / s2 + n * (LN_2PI + s2.ln())))
    }

    fn prior_logpdf(&self, x: &[f64]) -> Result<f64> {
        check_len("x", x.len(), 4)?;
        Ok((0..4)
            .map(|i| {
                let z = (x[i] - self.prior_mean[i]) / self.prior_sd[i];
                -0.5 * (z * z + LN_2PI) - self.prior_sd[i].ln()
            })
            .sum())
    }

    fn forward_jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        check_len("x", x.len(), 4)?;
        let (c, w, h, o) = (x[0], x[1].exp(), x[2].exp(), x[3].exp());
        let w2 = w * w;
        let mut j = DMatrix::zeros(self.n_y(), 4);
        for (i, d) in self.velocities.iter().enumerate() {
            let r = c - d;
            let den = w2 + r * r;
            let den2 = den * den;
            j[(i, 0)] = 2.0 * h * w2 * r / den2;
            j[(i, 1)] = -2.0 * h * w2 * r * r / den2;
            j[(i, 2)] = -h * w2 / den;
            j[(i, 3)] = o;
        }
        Ok(j)
    }

    fn gaussian_prior(&self) -> Option<(DVector<f64>, SymmetricMatrix)> {
        let var: Vec<f64> = self.prior_sd.iter().map(|s| s * s).collect();
        Some((
            DVector::from_column_slice(&self.prior_mean),
            SymmetricMatrix::from_diagonal(&var),
        ))
    }

    fn noise_covariance(&self) -> Option<SymmetricMatrix> {
        Some(SymmetricMatrix::identity(self.n_y()).scaled(self.noise_sd * self.noise_sd))
    }
}
