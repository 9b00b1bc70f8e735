//! Command execution and artifact writing.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use tmeig::dimred::{dimred_grid, DimredTable};
use tmeig::estimators::{convergence_sweep, EstimatorKind, SweepTable};
use tmeig::models::Model;

use crate::config::{ConfigError, ExperimentConfig};

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Compute(String),
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<tmeig::Error> for RunError {
    fn from(e: tmeig::Error) -> Self {
        RunError::Compute(e.to_string())
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Compute(e.to_string())
    }
}

impl From<serde_json::Error> for RunError {
    fn from(e: serde_json::Error) -> Self {
        RunError::Compute(e.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verb {
    Estimate,
    Sweep,
    Dimred,
    Nmc,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub config_sha256: String,
    pub seed: u64,
    pub version: String,
    pub started_at: String,
    pub elapsed_s: f64,
    pub n_cells: usize,
    pub n_failed: usize,
}

/// Outcome of a finished run. Failed cells are already in the artifacts.
pub struct Summary {
    pub out: PathBuf,
    pub n_cells: usize,
    pub n_failed: usize,
    pub errors: Vec<String>,
}

/// Replicate statistics of one `(method, r, s)` group of a dimred grid.
#[derive(Debug, Serialize)]
struct DimredStats {
    method: String,
    r: usize,
    s: usize,
    mean: f64,
    se: f64,
    exact_projected: Option<f64>,
    bias: Option<f64>,
    bound: f64,
    n_ok: usize,
    n_failed: usize,
}

fn dimred_aggregates(table: &DimredTable) -> BTreeMap<String, DimredStats> {
    let mut groups: BTreeMap<String, Vec<_>> = BTreeMap::new();
    for row in &table.rows {
        groups
            .entry(format!("{},{},{}", row.method, row.r, row.s))
            .or_default()
            .push(row);
    }
    groups
        .into_iter()
        .map(|(key, rows)| {
            let ok: Vec<f64> = rows.iter().filter_map(|r| r.value).collect();
            let n = ok.len();
            let mean = if n > 0 {
                ok.iter().sum::<f64>() / n as f64
            } else {
                f64::NAN
            };
            let se = if n > 1 {
                (ok.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64 / n as f64).sqrt()
            } else {
                f64::NAN
            };
            let exact = rows.iter().find_map(|r| r.exact_projected);
            let stats = DimredStats {
                method: rows[0].method.to_string(),
                r: rows[0].r,
                s: rows[0].s,
                mean,
                se,
                exact_projected: exact,
                bias: exact.filter(|_| n > 0).map(|e| mean - e),
                bound: rows[0].bound,
                n_ok: n,
                n_failed: rows.len() - n,
            };
            (key, stats)
        })
        .collect()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), RunError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    use std::io::Write;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn sweep_errors(table: &SweepTable) -> Vec<String> {
    table
        .rows
        .iter()
        .filter_map(|r| {
            let p = r.p.map(|p| p.to_string()).unwrap_or_default();
            r.error.as_ref().map(|e| {
                format!(
                    "{} p={p} L={} replicate={} seed={}: {e}",
                    r.kind, r.l, r.replicate, r.seed
                )
            })
        })
        .collect()
}

fn write_sweep(out: &Path, name: &str, table: &SweepTable) -> Result<(), RunError> {
    table.write_csv(BufWriter::new(File::create(out.join(format!("{name}.csv")))?))?;
    write_json(&out.join("aggregates.json"), &table.aggregates())
}

/// Run one compute verb and write its artifacts plus `manifest.json` to `out`.
pub fn run(
    verb: Verb,
    cfg: &ExperimentConfig,
    model: &dyn Model,
    config_bytes: &[u8],
    seed: u64,
    out: &Path,
) -> Result<Summary, RunError> {
    let started_at = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
    let clock = Instant::now();
    fs::create_dir_all(out)?;

    let (n_cells, errors) = match verb {
        Verb::Sweep | Verb::Estimate | Verb::Nmc => {
            let mut sweep = cfg.sweep_config(seed)?;
            let name = match verb {
                Verb::Sweep => "sweep",
                Verb::Estimate => {
                    // one replicate at the first budget and exponent
                    sweep.budgets.truncate(1);
                    sweep.exponents.truncate(1);
                    sweep.replicates = 1;
                    "estimate"
                }
                _ => {
                    sweep.kinds = vec![EstimatorKind::Nmc];
                    "nmc"
                }
            };
            let table = convergence_sweep(model, &sweep)?;
            write_sweep(out, name, &table)?;
            if verb == Verb::Estimate {
                for row in &table.rows {
                    match (row.value, row.exact) {
                        (Some(v), Some(e)) => println!("{:<8} {v:.6}  (exact {e:.6})", row.kind.to_string()),
                        (Some(v), None) => println!("{:<8} {v:.6}", row.kind.to_string()),
                        _ => println!("{:<8} failed", row.kind.to_string()),
                    }
                }
            }
            (table.rows.len(), sweep_errors(&table))
        }
        Verb::Dimred => {
            let grid = cfg.dimred_config(seed)?;
            let table = dimred_grid(model, &grid)?;
            table.write_csv(BufWriter::new(File::create(out.join("dimred.csv"))?))?;
            write_json(&out.join("aggregates.json"), &dimred_aggregates(&table))?;
            let errors = table
                .rows
                .iter()
                .filter_map(|r| {
                    r.error.as_ref().map(|e| {
                        format!(
                            "{} r={} s={} replicate={} seed={}: {e}",
                            r.method, r.r, r.s, r.replicate, r.seed
                        )
                    })
                })
                .collect();
            (table.rows.len(), errors)
        }
    };

    let manifest = Manifest {
        config_sha256: hex::encode(Sha256::digest(config_bytes)),
        seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        started_at,
        elapsed_s: clock.elapsed().as_secs_f64(),
        n_cells,
        n_failed: errors.len(),
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(Summary {
        out: out.to_path_buf(),
        n_cells,
        n_failed: errors.len(),
        errors,
    })
}
