use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{allocate, min_train, run_estimator, EstimatorKind, TransportOptions};
use crate::error::{Error, Result};
use crate::models::Model;
use crate::rng::cell_seed;

pub const SWEEP_CSV_HEADER: &str = "kind,p,L,M,N,replicate,seed,value,exact,error";

/// Grid of a convergence study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub kinds: Vec<EstimatorKind>,
    /// Allocation exponents; ignored by `nmc` and `gaussian`, which get one
    /// row per budget and replicate.
    pub exponents: Vec<f64>,
    pub budgets: Vec<usize>,
    pub replicates: usize,
    pub base_seed: u64,
    pub transport: TransportOptions,
}

/// One cell of the sweep. Failed cells keep their coordinates and carry the
/// error message instead of a value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub kind: EstimatorKind,
    pub p: Option<f64>,
    pub l: usize,
    pub m: usize,
    pub n: usize,
    pub replicate: usize,
    pub seed: u64,
    pub value: Option<f64>,
    pub exact: Option<f64>,
    pub error: Option<String>,
}

/// Replicate statistics of one `(kind, p, L)` group over its successful rows.
///
/// `variance` uses the `1/n` divisor so that `mse = bias² + variance`.
/// `se` is the usual standard error of the mean (`n − 1` divisor).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub kind: EstimatorKind,
    pub p: Option<f64>,
    #[serde(rename = "L")]
    pub l: usize,
    pub mean: f64,
    pub bias: Option<f64>,
    pub variance: f64,
    pub mse: Option<f64>,
    pub se: f64,
    pub n_ok: usize,
    pub n_failed: usize,
    /// Fewer than two successful replicates, so the variance is meaningless.
    pub degenerate: bool,
}

/// Ordinary least squares fit of `log MSE` on `log L`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope; zero for an exact fit or three points
    /// on a line.
    pub se: f64,
    pub n_points: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn group_key(kind: EstimatorKind, p: Option<f64>, l: usize) -> String {
    match p {
        Some(p) => format!("{kind},{p},{l}"),
        None => format!("{kind},,{l}"),
    }
}

impl SweepTable {
    pub fn n_failed(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }

    /// CSV with header [`SWEEP_CSV_HEADER`]; floats use the shortest
    /// representation that round-trips.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Serialization(e.to_string());
        out.write_record(SWEEP_CSV_HEADER.split(',')).map_err(io)?;
        for r in &self.rows {
            out.write_record([
                r.kind.to_string(),
                fmt_opt(r.p),
                r.l.to_string(),
                r.m.to_string(),
                r.n.to_string(),
                r.replicate.to_string(),
                r.seed.to_string(),
                fmt_opt(r.value),
                fmt_opt(r.exact),
                r.error.clone().unwrap_or_default(),
            ])
            .map_err(io)?;
        }
        out.flush().map_err(|e| Error::Serialization(e.to_string()))
    }

    /// Statistics for every `(kind, p, L)` group, keyed `"kind,p,L"` with an
    /// empty `p` for kinds that ignore it.
    pub fn aggregates(&self) -> BTreeMap<String, GroupStats> {
        let mut groups: BTreeMap<String, Vec<&SweepRow>> = BTreeMap::new();
        for r in &self.rows {
            groups.entry(group_key(r.kind, r.p, r.l)).or_default().push(r);
        }
        groups
            .into_iter()
            .map(|(key, rows)| {
                let first = rows[0];
                let ok: Vec<f64> = rows.iter().filter_map(|r| r.value).collect();
                let n_ok = ok.len();
                let nf = n_ok as f64;
                let mean = ok.iter().sum::<f64>() / nf;
                let variance = if n_ok > 1 {
                    ok.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / nf
                } else {
                    0.0
                };
                let se = if n_ok > 1 { (variance / (nf - 1.0)).sqrt() } else { 0.0 };
                let exact = first.exact;
                let bias = exact.map(|t| mean - t);
                let mse = exact.map(|t| ok.iter().map(|v| (v - t).powi(2)).sum::<f64>() / nf);
                let stats = GroupStats {
                    kind: first.kind,
                    p: first.p,
                    l: first.l,
                    mean,
                    bias,
                    variance,
                    mse,
                    se,
                    n_ok,
                    n_failed: rows.len() - n_ok,
                    degenerate: n_ok < 2,
                };
                (key, stats)
            })
            .collect()
    }

    /// Log-log MSE slope over the budgets of one `(kind, p)` series.
    pub fn slope(&self, kind: EstimatorKind, p: Option<f64>) -> Result<SlopeFit> {
        let points: Vec<(f64, f64)> = self
            .aggregates()
            .into_values()
            .filter(|g| g.kind == kind && g.p == p)
            .map(|g| (g.l as f64, g.mse.unwrap_or(f64::NAN)))
            .collect();
        fit_loglog_slope(&points)
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    let mut xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    if xs.len() < 3 {
        return Err(Error::arg(format!(
            "slope fit needs at least 3 distinct budgets, got {}",
            xs.len()
        )));
    }
    if let Some(bad) = points.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0 && y.is_finite())) {
        return Err(Error::arg(format!(
            "slope fit needs positive finite points, got {bad:?}"
        )));
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let se = if points.len() > 2 {
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(SlopeFit {
        slope,
        intercept,
        se,
        n_points: points.len(),
    })
}

struct Cell {
    kind: EstimatorKind,
    p: Option<f64>,
    l: usize,
    replicate: usize,
}

/// Run every `(kind, p, L, replicate)` cell in parallel. Each cell draws
/// fresh samples from its own seed `cell_seed(base, kind, p, L, replicate)`.
/// Failures are recorded in the row and the sweep continues.
pub fn convergence_sweep<M: Model + ?Sized>(model: &M, cfg: &SweepConfig) -> Result<SweepTable> {
    if cfg.kinds.is_empty() || cfg.budgets.is_empty() || cfg.replicates == 0 {
        return Err(Error::arg(
            "sweep needs at least one kind, one budget and one replicate",
        ));
    }
    if cfg.kinds.iter().any(|k| k.is_transport()) && cfg.exponents.is_empty() {
        return Err(Error::arg("transport kinds need at least one allocation exponent"));
    }
    let mut cells = Vec::new();
    for &kind in &cfg.kinds {
        let ps: Vec<Option<f64>> = if kind.is_transport() {
            cfg.exponents.iter().map(|&p| Some(p)).collect()
        } else {
            vec![None]
        };
        for p in ps {
            for &l in &cfg.budgets {
                for replicate in 0..cfg.replicates {
                    cells.push(Cell { kind, p, l, replicate });
                }
            }
        }
    }
    let exact = model.exact_eig();
    let rows = cells
        .par_iter()
        .map(|c| {
            let seed = cell_seed(cfg.base_seed, c.kind.as_str(), c.p.unwrap_or(0.0), c.l, c.replicate);
            let (m, n) = match c.p {
                Some(p) => {
                    let mt = min_train(c.kind, model.n_x(), model.n_y(), cfg.transport.degree);
                    allocate(c.l, p, mt).unwrap_or((0, 0))
                }
                None => (0, 0),
            };
            let mut row = SweepRow {
                kind: c.kind,
                p: c.p,
                l: c.l,
                m,
                n,
                replicate: c.replicate,
                seed,
                value: None,
                exact,
                error: None,
            };
            match run_estimator(model, c.kind, c.l, c.p.unwrap_or(0.5), seed, &cfg.transport) {
                Ok(e) => {
                    row.m = e.m;
                    row.n = e.n;
                    row.value = Some(e.value);
                }
                Err(e) => {
                    log::warn!("{} p={:?} L={} rep={}: {e}", c.kind, c.p, c.l, c.replicate);
                    row.error = Some(e.to_string());
                }
            }
            row
        })
        .collect();
    Ok(SweepTable { rows })
}
