use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    diagnostic_matrices, empirical_covariance, projected_eig_pos, reduction_basis, truncation_bound, ProjectionBasis,
    ReductionMethod,
};
use crate::error::{Error, Result};
use crate::estimators::TransportOptions;
use crate::models::{sample_joint, Model};
use crate::rng::{derive_seed, mix};

pub const DIMRED_CSV_HEADER: &str = "method,r,s,replicate,seed,value,exact_projected,bound";

/// Grid of projected estimates over bases and ranks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimredConfig {
    pub methods: Vec<ReductionMethod>,
    pub ranks_x: Vec<usize>,
    pub ranks_y: Vec<usize>,
    pub replicates: usize,
    /// Budget `L` of every projected estimate.
    pub budget: usize,
    pub p: f64,
    pub base_seed: u64,
    /// Prior draws for the diagnostic matrices of non-linear models.
    pub n_mc: usize,
    /// Joint samples for the PCA and CCA covariances when the model has no
    /// exact joint covariance.
    pub n_covariance: usize,
    pub transport: TransportOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimredRow {
    pub method: ReductionMethod,
    pub r: usize,
    pub s: usize,
    pub replicate: usize,
    pub seed: u64,
    pub value: Option<f64>,
    pub exact_projected: Option<f64>,
    pub bound: f64,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DimredTable {
    pub rows: Vec<DimredRow>,
    pub bases: Vec<ProjectionBasis>,
}

impl DimredTable {
    pub fn n_failed(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }

    /// CSV with header [`DIMRED_CSV_HEADER`]. Failed cells have an empty
    /// value.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Serialization(e.to_string());
        out.write_record(DIMRED_CSV_HEADER.split(',')).map_err(io)?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            out.write_record([
                r.method.to_string(),
                r.r.to_string(),
                r.s.to_string(),
                r.replicate.to_string(),
                r.seed.to_string(),
                opt(r.value),
                opt(r.exact_projected),
                r.bound.to_string(),
            ])
            .map_err(io)?;
        }
        out.flush().map_err(|e| Error::Serialization(e.to_string()))
    }
}

/// Seed of one `(r, s, replicate)` cell. It does not depend on the method,
/// so all bases are compared on the same draws.
pub fn dimred_cell_seed(base: u64, r: usize, s: usize, replicate: usize) -> u64 {
    mix(&[base, 0x6469_6d72_6564, r as u64, s as u64, replicate as u64])
}

/// Build each basis once, then run every `(method, r, s, replicate)` cell in
/// parallel. Cell failures are recorded and the grid continues.
pub fn dimred_grid<M: Model + ?Sized>(model: &M, cfg: &DimredConfig) -> Result<DimredTable> {
    if cfg.methods.is_empty() || cfg.ranks_x.is_empty() || cfg.ranks_y.is_empty() || cfg.replicates == 0 {
        return Err(Error::arg(
            "dimred grid needs methods, ranks and at least one replicate",
        ));
    }
    let pair = diagnostic_matrices(model, cfg.n_mc, derive_seed(cfg.base_seed, "dimred/diagnostics", 0))?;
    let cov = match model.joint_covariance() {
        Some(c) => c,
        None => {
            let s = sample_joint(
                model,
                cfg.n_covariance,
                derive_seed(cfg.base_seed, "dimred/covariance", 0),
            )?;
            empirical_covariance(s.x(), s.y())?
        }
    };
    let bases = cfg
        .methods
        .iter()
        .map(|&m| reduction_basis(m, Some(&pair), &cov))
        .collect::<Result<Vec<_>>>()?;

    let mut cells = Vec::new();
    for (b, _) in cfg.methods.iter().enumerate() {
        for &r in &cfg.ranks_x {
            for &s in &cfg.ranks_y {
                for rep in 0..cfg.replicates {
                    cells.push((b, r, s, rep));
                }
            }
        }
    }
    let rows = cells
        .par_iter()
        .map(|&(b, r, s, replicate)| {
            let basis = &bases[b];
            let seed = dimred_cell_seed(cfg.base_seed, r, s, replicate);
            let bound = truncation_bound(&pair, basis, r, s).unwrap_or(f64::NAN);
            let mut row = DimredRow {
                method: basis.method,
                r,
                s,
                replicate,
                seed,
                value: None,
                exact_projected: None,
                bound,
                error: None,
            };
            match projected_eig_pos(model, basis, r, s, cfg.budget, cfg.p, seed, &cfg.transport) {
                Ok(e) => {
                    row.value = Some(e.value);
                    row.exact_projected = e.exact;
                }
                Err(e) => {
                    log::warn!("{} r={r} s={s} rep={replicate}: {e}", basis.method);
                    row.error = Some(e.to_string());
                }
            }
            row
        })
        .collect();
    Ok(DimredTable { rows, bases })
}
