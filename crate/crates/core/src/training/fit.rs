use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::objective::Design;
use super::optim::{minimize_lbfgs, norm, LbfgsOptions};
use crate::error::{Error, Result};
use crate::numerics::SymmetricMatrix;
use crate::transport::{
    MonotoneComponent, MultiIndexSet, Rectifier, Standardization, TriangularMap, DEFAULT_QUADRATURE_ORDER,
};

/// Optimizer settings for component fits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitOptions {
    /// Gradient 2-norm tolerance of the quasi-Newton phase.
    pub gtol: f64,
    pub max_iter: usize,
    pub memory: usize,
    /// Maximum Newton steps taken after the quasi-Newton phase.
    pub newton_steps: usize,
    pub quadrature_order: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            gtol: 1e-8,
            max_iter: 500,
            memory: 10,
            newton_steps: 8,
            quadrature_order: DEFAULT_QUADRATURE_ORDER,
        }
    }
}

/// Outcome of one component fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub objective: f64,
    pub initial_objective: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub newton_steps: usize,
    /// False when the iteration cap was hit before the gradient tolerance.
    pub converged: bool,
    pub n_samples: usize,
    pub n_coefficients: usize,
}

/// Held-out scores of one candidate degree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeScore {
    pub degree: u32,
    pub fold_scores: Vec<f64>,
    pub mean: f64,
}

/// Reports for all components of a map, plus cross-validation results when
/// the degree was selected.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MapFitReport {
    pub components: Vec<FitReport>,
    pub cv_scores: Vec<DegreeScore>,
    pub chosen_degree: Option<u32>,
}

impl MapFitReport {
    pub fn all_converged(&self) -> bool {
        self.components.iter().all(|c| c.converged)
    }

    pub fn max_gradient_norm(&self) -> f64 {
        self.components.iter().map(|c| c.gradient_norm).fold(0.0, f64::max)
    }
}

/// Fit one component to `samples` (already standardized) by minimizing the
/// empirical objective from zero coefficients.
///
/// The quasi-Newton phase runs to the gradient tolerance; Newton steps on the
/// analytic Hessian then drive the gradient to rounding level, so that
/// estimators built from different maps of the same family agree at their
/// common optimum.
pub fn fit_component(
    index_set: &MultiIndexSet,
    samples: &DMatrix<f64>,
    opts: &FitOptions,
) -> Result<(MonotoneComponent, FitReport)> {
    let n = samples.nrows();
    let nc = index_set.len();
    if n <= nc {
        return Err(Error::Underdetermined {
            samples: n,
            coefficients: nc,
        });
    }
    let comp = MonotoneComponent::new(
        index_set.clone(),
        vec![0.0; nc],
        Rectifier::Softplus,
        opts.quadrature_order,
    )?;
    let design = Design::new(&comp, samples)?;
    let initial = design.value(comp.coefficients());
    let lbfgs = LbfgsOptions {
        gtol: opts.gtol,
        max_iter: opts.max_iter,
        memory: opts.memory,
    };
    let res = minimize_lbfgs(|c, g| design.value_grad(c, g), vec![0.0; nc], &lbfgs);
    if !res.f.is_finite() {
        return Err(Error::Numerical(format!("objective is {} after optimization", res.f)));
    }
    let (c, f, g, steps) = newton_polish(&design, res.x, res.f, res.grad, opts.newton_steps);
    let gn = norm(&g);
    let converged = res.converged || gn < opts.gtol;
    if !converged {
        log::warn!(
            "component fit stopped at the iteration cap with gradient norm {gn:e} ({} samples, {nc} coefficients)",
            n
        );
    }
    let report = FitReport {
        objective: f,
        initial_objective: initial,
        gradient_norm: gn,
        iterations: res.iterations,
        newton_steps: steps,
        converged,
        n_samples: n,
        n_coefficients: nc,
    };
    Ok((comp.with_coefficients(c)?, report))
}

fn newton_polish(
    design: &Design,
    mut c: Vec<f64>,
    mut f: f64,
    mut g: Vec<f64>,
    max_steps: usize,
) -> (Vec<f64>, f64, Vec<f64>, usize) {
    let mut taken = 0;
    let mut trial_g = vec![0.0; c.len()];
    for _ in 0..max_steps {
        let gn = norm(&g);
        if gn == 0.0 {
            break;
        }
        let Ok(h) = SymmetricMatrix::from_matrix(design.hessian(&c)) else {
            break;
        };
        let Ok(chol) = h.cholesky() else {
            break;
        };
        if chol.jitter() > 0.0 {
            break;
        }
        let step = chol.solve(&nalgebra::DVector::from_column_slice(&g));
        let mut accepted = false;
        let mut t = 1.0;
        for _ in 0..4 {
            let trial: Vec<f64> = c.iter().zip(step.iter()).map(|(c, s)| c - t * s).collect();
            let ft = design.value_grad(&trial, &mut trial_g);
            if ft.is_finite() && ft <= f + 1e-13 * f.abs().max(1.0) && norm(&trial_g) < gn {
                let small = t * norm(step.as_slice()) <= 1e-14 * norm(&c).max(1.0);
                c = trial;
                f = ft;
                g.copy_from_slice(&trial_g);
                accepted = true;
                taken += 1;
                if small {
                    return (c, f, g, taken);
                }
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (c, f, g, taken)
}

/// Fit a total-degree triangular map to the rows of `samples`.
///
/// The first `n_conditioning` columns are conditioned on; one component is
/// fitted for each remaining column. Inputs are standardized with the sample
/// mean and standard deviation, which are stored in the map.
pub fn fit_triangular_map(
    samples: &DMatrix<f64>,
    n_conditioning: usize,
    degree: u32,
    opts: &FitOptions,
) -> Result<(TriangularMap, MapFitReport)> {
    let n = samples.ncols();
    if n_conditioning >= n {
        return Err(Error::arg(format!(
            "{n_conditioning} conditioning columns leave nothing to transport in {n} columns"
        )));
    }
    let sets: Vec<MultiIndexSet> = (n_conditioning + 1..=n)
        .map(|k| MultiIndexSet::total_degree(k, degree))
        .collect();
    fit_triangular_map_with(samples, n_conditioning, &sets, opts)
}

/// [`fit_triangular_map`] with an explicit index set per component.
pub fn fit_triangular_map_with(
    samples: &DMatrix<f64>,
    n_conditioning: usize,
    index_sets: &[MultiIndexSet],
    opts: &FitOptions,
) -> Result<(TriangularMap, MapFitReport)> {
    if n_conditioning + index_sets.len() != samples.ncols() {
        return Err(Error::arg(format!(
            "{} conditioning plus {} components do not match {} sample columns",
            n_conditioning,
            index_sets.len(),
            samples.ncols()
        )));
    }
    let st = Standardization::from_samples(samples);
    let zs = st.apply_matrix(samples);
    let fits: Vec<(MonotoneComponent, FitReport)> = index_sets
        .par_iter()
        .enumerate()
        .map(|(i, set)| {
            let k = n_conditioning + i + 1;
            if set.dim() != k {
                return Err(Error::arg(format!("index set has dimension {}, expected {k}", set.dim())).in_component(i));
            }
            let cols = zs.columns(0, k).into_owned();
            fit_component(set, &cols, opts).map_err(|e| e.in_component(i))
        })
        .collect::<Result<_>>()?;
    let (comps, reports): (Vec<_>, Vec<_>) = fits.into_iter().unzip();
    let map = TriangularMap::new(n_conditioning, st, comps)?;
    Ok((
        map,
        MapFitReport {
            components: reports,
            ..MapFitReport::default()
        },
    ))
}
