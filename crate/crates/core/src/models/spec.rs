use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{make_linear_gaussian, FocusedModel, LinearGaussianModel, Model, MoessbauerModel};
use crate::error::{Error, Result};
use crate::numerics::SymmetricMatrix;

/// Which parameters of the model the EIG targets.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Focus {
    #[default]
    Full,
    Indices(Vec<usize>),
}

/// Serializable model description, as it appears in configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    /// Random benchmark from [`make_linear_gaussian`].
    LinearGaussian {
        n_x: usize,
        n_y: usize,
        #[serde(default = "default_decay")]
        decay: f64,
        #[serde(default)]
        seed: u64,
    },
    /// `Y = g X + E` in one dimension.
    Scalar {
        #[serde(default = "one")]
        g: f64,
        #[serde(default = "one")]
        prior_var: f64,
        #[serde(default = "one")]
        noise_var: f64,
    },
    /// Explicit matrices, given row by row.
    Linear {
        g: Vec<Vec<f64>>,
        sigma_x: Vec<Vec<f64>>,
        sigma_e: Vec<Vec<f64>>,
    },
    Moessbauer {
        #[serde(default = "default_velocities")]
        velocities: Vec<f64>,
        #[serde(default = "default_noise_sd")]
        noise_sd: f64,
        #[serde(default)]
        focus: Focus,
    },
}

fn default_decay() -> f64 {
    0.8
}

fn one() -> f64 {
    1.0
}

fn default_velocities() -> Vec<f64> {
    MoessbauerModel::default().velocities
}

fn default_noise_sd() -> f64 {
    MoessbauerModel::default().noise_sd
}

fn rows_to_matrix(name: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if n == 0 || m == 0 || rows.iter().any(|r| r.len() != m) {
        return Err(Error::arg(format!("{name} must be a non-empty rectangular matrix")));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

impl ModelSpec {
    /// The linear-Gaussian model, when the spec describes one.
    pub fn linear(&self) -> Result<Option<LinearGaussianModel>> {
        Ok(match self {
            ModelSpec::LinearGaussian { n_x, n_y, decay, seed } => {
                Some(make_linear_gaussian(*n_x, *n_y, *decay, *seed)?)
            }
            ModelSpec::Scalar {
                g,
                prior_var,
                noise_var,
            } => Some(LinearGaussianModel::scalar(*g, *prior_var, *noise_var)?),
            ModelSpec::Linear { g, sigma_x, sigma_e } => Some(LinearGaussianModel::new(
                rows_to_matrix("g", g)?,
                SymmetricMatrix::from_matrix(rows_to_matrix("sigma_x", sigma_x)?)?,
                SymmetricMatrix::from_matrix(rows_to_matrix("sigma_e", sigma_e)?)?,
            )?),
            ModelSpec::Moessbauer { .. } => None,
        })
    }

    pub fn build(&self) -> Result<Box<dyn Model>> {
        if let Some(m) = self.linear()? {
            return Ok(Box::new(m));
        }
        match self {
            ModelSpec::Moessbauer {
                velocities,
                noise_sd,
                focus,
            } => {
                let m = MoessbauerModel::new(velocities.clone(), *noise_sd)?;
                Ok(match focus {
                    Focus::Full => Box::new(m),
                    Focus::Indices(ix) => Box::new(FocusedModel::new(m, ix.clone())?),
                })
            }
            _ => unreachable!("linear specs handled above"),
        }
    }
}
