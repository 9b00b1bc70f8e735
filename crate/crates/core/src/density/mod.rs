//! Plug-in log-density evaluation from trained maps.
//!
//! A block map with ordering Y-then-X yields `π̂_Y` from its leading block and
//! `π̂_{X|Y}` from its trailing block; the X-then-Y ordering yields `π̂_X` and
//! `π̂_{Y|X}`. Conditionals come from slicing the trailing block at the given
//! leading values, never from refitting.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::standard_normal_logpdf;
use crate::training::{fit_triangular_map, FitOptions, MapFitReport};
use crate::transport::{BlockTriangularMap, Ordering, TransportMap, TriangularMap};

/// Which density a map provides.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityKind {
    MarginalY,
    ConditionalXGivenY,
    MarginalX,
    ConditionalYGivenX,
    Joint,
}

impl DensityKind {
    /// Block ordering that provides this density, if it is tied to one.
    pub fn ordering(self) -> Option<Ordering> {
        match self {
            DensityKind::MarginalY | DensityKind::ConditionalXGivenY => Some(Ordering::YThenX),
            DensityKind::MarginalX | DensityKind::ConditionalYGivenX => Some(Ordering::XThenY),
            DensityKind::Joint => None,
        }
    }
}

/// `log η(S(z)) + log det ∇S(z)` for a map pushing to a standard normal.
pub fn pullback_logpdf<T: TransportMap + ?Sized>(map: &T, z: &[f64]) -> Result<f64> {
    let (w, logdet) = map.forward(z)?;
    Ok(standard_normal_logpdf(&w) + logdet)
}

/// Log pullback of every row; for conditional maps the rows hold the
/// conditioning values first.
pub fn pullback_logpdf_batch(map: &TriangularMap, samples: &DMatrix<f64>) -> Result<DVector<f64>> {
    let (img, logdet) = map.forward_batch(samples)?;
    let out: Vec<f64> = (0..img.nrows())
        .into_par_iter()
        .map(|i| {
            let w: Vec<f64> = img.row(i).iter().copied().collect();
            standard_normal_logpdf(&w) + logdet[i]
        })
        .collect();
    Ok(DVector::from_vec(out))
}

/// Density of the leading variable, from the first block only.
pub fn marginal_logpdf(block: &BlockTriangularMap, leading: &[f64]) -> Result<f64> {
    pullback_logpdf(block.leading(), leading)
}

/// Density of the trailing variable given the leading one.
pub fn conditional_logpdf(block: &BlockTriangularMap, trailing: &[f64], leading: &[f64]) -> Result<f64> {
    if leading.len() != block.n_leading() || trailing.len() != block.n_trailing() {
        return Err(Error::arg(format!(
            "expected {} leading and {} trailing values, got {} and {}",
            block.n_leading(),
            block.n_trailing(),
            leading.len(),
            trailing.len()
        )));
    }
    let z: Vec<f64> = leading.iter().chain(trailing).copied().collect();
    pullback_logpdf(block.trailing(), &z)
}

/// One of the plug-in densities backed by a block map.
#[derive(Clone, Copy, Debug)]
pub struct DensityEstimate<'a> {
    kind: DensityKind,
    block: &'a BlockTriangularMap,
}

impl<'a> DensityEstimate<'a> {
    pub fn new(kind: DensityKind, block: &'a BlockTriangularMap) -> Result<Self> {
        if let Some(o) = kind.ordering() {
            if o != block.ordering() {
                return Err(Error::arg(format!(
                    "{kind:?} needs a {o:?} block map, got {:?}",
                    block.ordering()
                )));
            }
        }
        Ok(Self { kind, block })
    }

    pub fn kind(&self) -> DensityKind {
        self.kind
    }

    /// Log-density at `(x, y)`; arguments not involved in the density are
    /// ignored.
    pub fn logpdf(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let (lead, trail) = match self.block.ordering() {
            Ordering::YThenX => (y, x),
            Ordering::XThenY => (x, y),
        };
        match self.kind {
            DensityKind::MarginalY | DensityKind::MarginalX => marginal_logpdf(self.block, lead),
            DensityKind::ConditionalXGivenY | DensityKind::ConditionalYGivenX => {
                conditional_logpdf(self.block, trail, lead)
            }
            DensityKind::Joint => {
                let z: Vec<f64> = lead.iter().chain(trail).copied().collect();
                pullback_logpdf(self.block, &z)
            }
        }
    }
}

/// The trained maps behind the four plug-in densities. Only the ones an
/// estimator needs have to be present.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DensitySet {
    pub marginal_y: Option<TriangularMap>,
    pub conditional_x_given_y: Option<TriangularMap>,
    pub marginal_x: Option<TriangularMap>,
    pub conditional_y_given_x: Option<TriangularMap>,
}

fn hstack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

fn missing(kind: DensityKind) -> Error {
    Error::arg(format!("density {kind:?} was not trained"))
}

impl DensitySet {
    /// Fit the maps for `kinds` from paired training samples (`N × n_x` and
    /// `N × n_y`) with total-degree bases.
    pub fn train(
        x: &DMatrix<f64>,
        y: &DMatrix<f64>,
        kinds: &[DensityKind],
        degree: u32,
        opts: &FitOptions,
    ) -> Result<(Self, BTreeMap<DensityKind, MapFitReport>)> {
        if x.nrows() != y.nrows() {
            return Err(Error::arg("training X and Y have different row counts"));
        }
        let mut set = Self::default();
        let mut reports = BTreeMap::new();
        for &kind in kinds {
            let (map, rep) = match kind {
                DensityKind::MarginalY => fit_triangular_map(y, 0, degree, opts)?,
                DensityKind::MarginalX => fit_triangular_map(x, 0, degree, opts)?,
                DensityKind::ConditionalXGivenY => fit_triangular_map(&hstack(y, x), y.ncols(), degree, opts)?,
                DensityKind::ConditionalYGivenX => fit_triangular_map(&hstack(x, y), x.ncols(), degree, opts)?,
                DensityKind::Joint => return Err(Error::arg("joint densities come from block maps")),
            };
            *set.slot(kind) = Some(map);
            reports.insert(kind, rep);
        }
        Ok((set, reports))
    }

    /// Densities available from whole block maps.
    pub fn from_blocks(y_first: Option<&BlockTriangularMap>, x_first: Option<&BlockTriangularMap>) -> Result<Self> {
        let mut set = Self::default();
        if let Some(b) = y_first {
            if b.ordering() != Ordering::YThenX {
                return Err(Error::arg("first argument must be a Y-then-X block map"));
            }
            set.marginal_y = Some(b.leading().clone());
            set.conditional_x_given_y = Some(b.trailing().clone());
        }
        if let Some(b) = x_first {
            if b.ordering() != Ordering::XThenY {
                return Err(Error::arg("second argument must be an X-then-Y block map"));
            }
            set.marginal_x = Some(b.leading().clone());
            set.conditional_y_given_x = Some(b.trailing().clone());
        }
        Ok(set)
    }

    fn slot(&mut self, kind: DensityKind) -> &mut Option<TriangularMap> {
        match kind {
            DensityKind::MarginalY => &mut self.marginal_y,
            DensityKind::ConditionalXGivenY => &mut self.conditional_x_given_y,
            DensityKind::MarginalX => &mut self.marginal_x,
            DensityKind::ConditionalYGivenX => &mut self.conditional_y_given_x,
            DensityKind::Joint => unreachable!("no joint slot"),
        }
    }

    pub fn get(&self, kind: DensityKind) -> Option<&TriangularMap> {
        match kind {
            DensityKind::MarginalY => self.marginal_y.as_ref(),
            DensityKind::ConditionalXGivenY => self.conditional_x_given_y.as_ref(),
            DensityKind::MarginalX => self.marginal_x.as_ref(),
            DensityKind::ConditionalYGivenX => self.conditional_y_given_x.as_ref(),
            DensityKind::Joint => None,
        }
    }

    /// Row-wise log-density of `kind` at paired samples `x` (`M × n_x`) and
    /// `y` (`M × n_y`).
    pub fn log_density(&self, kind: DensityKind, x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<DVector<f64>> {
        let map = self.get(kind).ok_or_else(|| missing(kind))?;
        match kind {
            DensityKind::MarginalY => pullback_logpdf_batch(map, y),
            DensityKind::MarginalX => pullback_logpdf_batch(map, x),
            DensityKind::ConditionalXGivenY => pullback_logpdf_batch(map, &hstack(y, x)),
            DensityKind::ConditionalYGivenX => pullback_logpdf_batch(map, &hstack(x, y)),
            DensityKind::Joint => Err(missing(kind)),
        }
    }
}
