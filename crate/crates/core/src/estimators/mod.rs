//! EIG estimators built on trained transport maps, the nested Monte Carlo
//! baseline, and the convergence-sweep machinery.
//!
//! Every transport estimator is an average over `M` evaluation pairs of a
//! log density ratio:
//!
//! | kind  | numerator     | denominator |
//! |-------|---------------|-------------|
//! | `m`   | `π_{Y|X}`     | `π̂_Y`       |
//! | `pos` | `π̂_{X|Y}`     | `π_X`       |
//! | `lik` | `π̂_{Y|X}`     | `π̂_Y`       |
//! | `pr`  | `π̂_{X|Y}`     | `π̂_X`       |
//!
//! Hatted densities come from maps trained on the other `N = L − M` samples.

mod nmc;
mod sweep;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{DensityKind, DensitySet};
use crate::error::{Error, Result};
use crate::models::{sample_joint, JointSampleSet, Model};
use crate::training::FitOptions;
use crate::transport::total_degree_size;

pub use nmc::{nmc_eig, nmc_split};
pub use sweep::{
    convergence_sweep, fit_loglog_slope, GroupStats, SlopeFit, SweepConfig, SweepRow, SweepTable, SWEEP_CSV_HEADER,
};

/// Which estimator to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    M,
    Pos,
    Lik,
    Pr,
    Nmc,
    Gaussian,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 6] = [
        EstimatorKind::M,
        EstimatorKind::Pos,
        EstimatorKind::Lik,
        EstimatorKind::Pr,
        EstimatorKind::Nmc,
        EstimatorKind::Gaussian,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorKind::M => "m",
            EstimatorKind::Pos => "pos",
            EstimatorKind::Lik => "lik",
            EstimatorKind::Pr => "pr",
            EstimatorKind::Nmc => "nmc",
            EstimatorKind::Gaussian => "gaussian",
        }
    }

    /// True for the four map-based kinds, which split the budget by
    /// [`allocate`].
    pub fn is_transport(self) -> bool {
        matches!(
            self,
            EstimatorKind::M | EstimatorKind::Pos | EstimatorKind::Lik | EstimatorKind::Pr
        )
    }

    /// Densities that must be learned.
    pub fn required_densities(self) -> &'static [DensityKind] {
        match self {
            EstimatorKind::M => &[DensityKind::MarginalY],
            EstimatorKind::Pos => &[DensityKind::ConditionalXGivenY],
            EstimatorKind::Lik => &[DensityKind::MarginalY, DensityKind::ConditionalYGivenX],
            EstimatorKind::Pr => &[DensityKind::MarginalX, DensityKind::ConditionalXGivenY],
            EstimatorKind::Nmc | EstimatorKind::Gaussian => &[],
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EstimatorKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::arg(format!("unknown estimator kind {s:?}")))
    }
}

/// One estimate with the budget it was computed from.
///
/// For NMC, `m` is the outer and `n` the inner sample count. The Gaussian
/// approximation uses all `L` samples, so `m = L` and `n = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigEstimate {
    pub kind: EstimatorKind,
    pub value: f64,
    pub l: usize,
    pub m: usize,
    pub n: usize,
    pub seed: u64,
    pub exact: Option<f64>,
}

/// Split a budget of `l` samples into `(M, N)` evaluation and training sizes
/// with `M/N ≈ L^p`.
///
/// `M = round(L / (L^{-p} + 1))` with halves rounded up, then `N = L − M` is
/// raised to `min_train` if needed.
pub fn allocate(l: usize, p: f64, min_train: usize) -> Result<(usize, usize)> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::arg(format!("allocation exponent must lie in (0, 1), got {p}")));
    }
    if l < min_train + 1 {
        return Err(Error::arg(format!(
            "budget L = {l} cannot hold {min_train} training samples and one evaluation sample"
        )));
    }
    let lf = l as f64;
    let m = (lf / (lf.powf(-p) + 1.0) + 0.5).floor() as usize;
    let m = m.clamp(1, l - min_train);
    Ok((m, l - m))
}

/// Options for the map-based kinds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransportOptions {
    /// Total degree of every map component.
    pub degree: u32,
    pub fit: FitOptions,
}

impl Default for TransportOptions {
    fn default() -> Self {
        Self {
            degree: 1,
            fit: FitOptions::default(),
        }
    }
}

/// Smallest training size that keeps every component fit of `kind`
/// overdetermined.
pub fn min_train(kind: EstimatorKind, n_x: usize, n_y: usize, degree: u32) -> usize {
    kind.required_densities()
        .iter()
        .map(|d| {
            let dim = match d {
                DensityKind::MarginalY => n_y,
                DensityKind::MarginalX => n_x,
                _ => n_x + n_y,
            };
            total_degree_size(dim, degree) + 1
        })
        .max()
        .unwrap_or(1)
}

/// Fail early, before any training, when the model lacks what `kind` needs.
pub fn check_capability<M: Model + ?Sized>(kind: EstimatorKind, model: &M) -> Result<()> {
    let x = vec![0.0; model.n_x()];
    let y = vec![0.0; model.n_y()];
    let probe = match kind {
        EstimatorKind::M | EstimatorKind::Nmc => model.log_likelihood(&y, &x),
        EstimatorKind::Pos => model.prior_logpdf(&x),
        _ => Ok(0.0),
    };
    match probe {
        Err(e @ Error::Unsupported(_)) => Err(e),
        _ => Ok(()),
    }
}

fn row(m: &DMatrix<f64>, i: usize) -> Vec<f64> {
    m.row(i).iter().copied().collect()
}

fn exact_rows(n: usize, f: impl Fn(usize) -> Result<f64> + Sync + Send) -> Result<DVector<f64>> {
    let v: Result<Vec<f64>> = (0..n).into_par_iter().map(f).collect();
    Ok(DVector::from_vec(v?))
}

pub(crate) fn finite_mean(values: &DVector<f64>) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!(
            "non-finite log ratio at evaluation sample {i}"
        )));
    }
    Ok(values.sum() / values.len() as f64)
}

/// Per-sample log ratios of `kind` at the evaluation pairs `x` (`M × n_x`)
/// and `y` (`M × n_y`).
pub fn log_ratios<M: Model + ?Sized>(
    kind: EstimatorKind,
    densities: &DensitySet,
    model: &M,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    if x.nrows() != y.nrows() {
        return Err(Error::arg("evaluation X and Y have different row counts"));
    }
    let n = x.nrows();
    let ld = |k| densities.log_density(k, x, y);
    match kind {
        EstimatorKind::M => {
            let lik = exact_rows(n, |i| model.log_likelihood(&row(y, i), &row(x, i)))?;
            Ok(lik - ld(DensityKind::MarginalY)?)
        }
        EstimatorKind::Pos => {
            let prior = exact_rows(n, |i| model.prior_logpdf(&row(x, i)))?;
            Ok(ld(DensityKind::ConditionalXGivenY)? - prior)
        }
        EstimatorKind::Lik => Ok(ld(DensityKind::ConditionalYGivenX)? - ld(DensityKind::MarginalY)?),
        EstimatorKind::Pr => Ok(ld(DensityKind::ConditionalXGivenY)? - ld(DensityKind::MarginalX)?),
        EstimatorKind::Nmc | EstimatorKind::Gaussian => Err(Error::arg(format!("{kind} is not a transport estimator"))),
    }
}

/// Average log ratio of `kind` over the evaluation pairs, using trained
/// densities and whatever exact densities the kind calls for.
pub fn estimate_eig<M: Model + ?Sized>(
    kind: EstimatorKind,
    densities: &DensitySet,
    model: &M,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
) -> Result<f64> {
    check_capability(kind, model)?;
    finite_mean(&log_ratios(kind, densities, model, x, y)?)
}

/// Train the densities `kind` needs on the training rows of `samples` and
/// evaluate on the rest.
pub fn estimate_from_samples<M: Model + ?Sized>(
    kind: EstimatorKind,
    model: &M,
    samples: &JointSampleSet,
    opts: &TransportOptions,
) -> Result<f64> {
    if !kind.is_transport() {
        return Err(Error::arg(format!("{kind} is not a transport estimator")));
    }
    check_capability(kind, model)?;
    let (set, reports) = DensitySet::train(
        &samples.train_x(),
        &samples.train_y(),
        kind.required_densities(),
        opts.degree,
        &opts.fit,
    )?;
    for (d, r) in &reports {
        if !r.all_converged() {
            log::warn!(
                "{kind}: {d:?} fit hit the iteration cap (max gradient norm {:.3e})",
                r.max_gradient_norm()
            );
        }
    }
    estimate_eig(kind, &set, model, &samples.eval_x(), &samples.eval_y())
}

/// The full pipeline for a map-based kind: allocate the budget, draw `L`
/// joint samples, train on `N` of them and average over the other `M`.
pub fn transport_eig<M: Model + ?Sized>(
    model: &M,
    kind: EstimatorKind,
    budget: usize,
    p: f64,
    seed: u64,
    opts: &TransportOptions,
) -> Result<EigEstimate> {
    if !kind.is_transport() {
        return Err(Error::arg(format!("{kind} is not a transport estimator")));
    }
    check_capability(kind, model)?;
    let (m, n) = allocate(budget, p, min_train(kind, model.n_x(), model.n_y(), opts.degree))?;
    let samples = sample_joint(model, budget, seed)?.with_split(n)?;
    let value = estimate_from_samples(kind, model, &samples, opts)?;
    Ok(EigEstimate {
        kind,
        value,
        l: budget,
        m,
        n,
        seed,
        exact: model.exact_eig(),
    })
}

/// Gaussian log-determinant approximation from `L` joint samples.
pub fn gaussian_eig_estimate<M: Model + ?Sized>(model: &M, budget: usize, seed: u64) -> Result<EigEstimate> {
    let samples = sample_joint(model, budget, seed)?;
    let value = crate::dimred::gaussian_eig(samples.x(), samples.y())?;
    Ok(EigEstimate {
        kind: EstimatorKind::Gaussian,
        value,
        l: budget,
        m: budget,
        n: 0,
        seed,
        exact: model.exact_eig(),
    })
}

/// Run any estimator kind on a budget of `L` model evaluations. `p` only
/// matters for the map-based kinds.
pub fn run_estimator<M: Model + ?Sized>(
    model: &M,
    kind: EstimatorKind,
    budget: usize,
    p: f64,
    seed: u64,
    opts: &TransportOptions,
) -> Result<EigEstimate> {
    match kind {
        EstimatorKind::Nmc => nmc_eig(model, budget, seed),
        EstimatorKind::Gaussian => gaussian_eig_estimate(model, budget, seed),
        _ => transport_eig(model, kind, budget, p, seed, opts),
    }
}
