//! Experiment configuration files.
//!
//! Configs are TOML. Parsing rejects unknown keys, and [`ExperimentConfig::check`]
//! runs the semantic checks that serde cannot express. Both report the
//! offending field as a dotted path.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use tmeig::dimred::{DimredConfig, ReductionMethod};
use tmeig::estimators::{check_capability, EstimatorKind, SweepConfig, TransportOptions};
use tmeig::models::{Model, ModelSpec};
use tmeig::training::FitOptions;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    AllocationSweep,
    EstimatorCompare,
    Moessbauer,
    DimredGrid,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::AllocationSweep => "allocation-sweep",
            ExperimentKind::EstimatorCompare => "estimator-compare",
            ExperimentKind::Moessbauer => "moessbauer",
            ExperimentKind::DimredGrid => "dimred-grid",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub workers: Option<usize>,
    pub model: ModelSpec,
    #[serde(default)]
    pub estimators: Option<EstimatorSection>,
    #[serde(default)]
    pub dimred: Option<DimredSection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSection {
    pub kinds: Vec<EstimatorKind>,
    /// Allocation exponents. Required when any transport kind is listed.
    #[serde(default)]
    pub p: Vec<f64>,
    pub budgets: Vec<usize>,
    #[serde(default = "one")]
    pub replicates: usize,
    #[serde(default = "one_u32")]
    pub degree: u32,
    #[serde(default)]
    pub fit: FitOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimredSection {
    #[serde(default = "all_methods")]
    pub methods: Vec<ReductionMethod>,
    pub ranks_x: Vec<usize>,
    pub ranks_y: Vec<usize>,
    #[serde(default = "one")]
    pub replicates: usize,
    pub budget: usize,
    #[serde(default = "third")]
    pub p: f64,
    #[serde(default = "default_n_mc")]
    pub n_mc: usize,
    #[serde(default = "default_n_covariance")]
    pub n_covariance: usize,
    #[serde(default = "one_u32")]
    pub degree: u32,
    #[serde(default)]
    pub fit: FitOptions,
}

fn one() -> usize {
    1
}

fn one_u32() -> u32 {
    1
}

fn third() -> f64 {
    1.0 / 3.0
}

fn all_methods() -> Vec<ReductionMethod> {
    ReductionMethod::ALL.to_vec()
}

fn default_n_mc() -> usize {
    1000
}

fn default_n_covariance() -> usize {
    10_000
}

/// A schema or semantic error, located by a dotted field path.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() || self.path == "." {
            write!(f, "config: {}", self.message)
        } else {
            write!(f, "config field `{}`: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

/// Parse config text. Unknown keys and type errors carry the field path.
pub fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let value: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::new("", e.message()))?;
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        ConfigError::new(path, e.into_inner().to_string())
    })
}

pub fn load(path: &Path) -> Result<(ExperimentConfig, Vec<u8>), ConfigError> {
    let bytes =
        std::fs::read(path).map_err(|e| ConfigError::new("", format!("cannot read {}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes).map_err(|_| ConfigError::new("", "config is not UTF-8"))?;
    let cfg = parse(text)?;
    Ok((cfg, bytes))
}

fn check_p(path: &str, p: f64) -> Result<(), ConfigError> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(ConfigError::new(
            path,
            format!("allocation exponent {p} must lie in (0, 1)"),
        ))
    }
}

fn check_positive(path: &str, v: usize) -> Result<(), ConfigError> {
    if v == 0 {
        Err(ConfigError::new(path, "must be positive"))
    } else {
        Ok(())
    }
}

fn check_fit(path: &str, fit: &FitOptions) -> Result<(), ConfigError> {
    if fit.gtol.is_nan() || fit.gtol <= 0.0 {
        return Err(ConfigError::new(format!("{path}.gtol"), "must be positive"));
    }
    check_positive(&format!("{path}.max_iter"), fit.max_iter)?;
    check_positive(&format!("{path}.memory"), fit.memory)?;
    check_positive(&format!("{path}.quadrature_order"), fit.quadrature_order)
}

fn check_ranks(path: &str, ranks: &[usize], n: usize) -> Result<(), ConfigError> {
    if ranks.is_empty() {
        return Err(ConfigError::new(path, "needs at least one rank"));
    }
    for (i, &r) in ranks.iter().enumerate() {
        if r == 0 || r > n {
            return Err(ConfigError::new(
                format!("{path}[{i}]"),
                format!("rank {r} outside 1..={n}"),
            ));
        }
    }
    Ok(())
}

impl EstimatorSection {
    fn check(&self, model: &dyn Model) -> Result<(), ConfigError> {
        if self.kinds.is_empty() {
            return Err(ConfigError::new("estimators.kinds", "needs at least one estimator"));
        }
        for (i, &k) in self.kinds.iter().enumerate() {
            check_capability(k, model)
                .map_err(|e| ConfigError::new(format!("estimators.kinds[{i}]"), e.to_string()))?;
        }
        if self.kinds.iter().any(|k| k.is_transport()) && self.p.is_empty() {
            return Err(ConfigError::new(
                "estimators.p",
                "transport estimators need at least one exponent",
            ));
        }
        for (i, &p) in self.p.iter().enumerate() {
            check_p(&format!("estimators.p[{i}]"), p)?;
        }
        if self.budgets.is_empty() {
            return Err(ConfigError::new("estimators.budgets", "needs at least one budget"));
        }
        for (i, &l) in self.budgets.iter().enumerate() {
            check_positive(&format!("estimators.budgets[{i}]"), l)?;
        }
        check_positive("estimators.replicates", self.replicates)?;
        if self.degree == 0 {
            return Err(ConfigError::new("estimators.degree", "must be at least 1"));
        }
        check_fit("estimators.fit", &self.fit)
    }

    fn transport(&self) -> TransportOptions {
        TransportOptions {
            degree: self.degree,
            fit: self.fit.clone(),
        }
    }
}

impl DimredSection {
    fn check(&self, model: &dyn Model) -> Result<(), ConfigError> {
        if self.methods.is_empty() {
            return Err(ConfigError::new("dimred.methods", "needs at least one method"));
        }
        check_ranks("dimred.ranks_x", &self.ranks_x, model.n_x())?;
        check_ranks("dimred.ranks_y", &self.ranks_y, model.n_y())?;
        check_positive("dimred.replicates", self.replicates)?;
        check_positive("dimred.budget", self.budget)?;
        check_p("dimred.p", self.p)?;
        check_positive("dimred.n_mc", self.n_mc)?;
        if model.joint_covariance().is_none() && self.n_covariance < model.n_x() + model.n_y() + 2 {
            return Err(ConfigError::new(
                "dimred.n_covariance",
                "too few samples for the empirical joint covariance",
            ));
        }
        check_capability(EstimatorKind::Pos, model).map_err(|e| ConfigError::new("model", e.to_string()))?;
        if self.degree == 0 {
            return Err(ConfigError::new("dimred.degree", "must be at least 1"));
        }
        check_fit("dimred.fit", &self.fit)
    }
}

impl ExperimentConfig {
    /// Build the model and run every semantic check. No sampling happens here.
    pub fn check(&self) -> Result<Box<dyn Model>, ConfigError> {
        if self.workers == Some(0) {
            return Err(ConfigError::new("workers", "must be positive"));
        }
        let model = self
            .model
            .build()
            .map_err(|e| ConfigError::new("model", e.to_string()))?;
        if self.kind == ExperimentKind::Moessbauer && !matches!(self.model, ModelSpec::Moessbauer { .. }) {
            return Err(ConfigError::new(
                "model.type",
                "moessbauer experiments need a moessbauer model",
            ));
        }
        match (self.kind, &self.estimators, &self.dimred) {
            (ExperimentKind::DimredGrid, _, None) => {
                return Err(ConfigError::new(
                    "dimred",
                    "dimred-grid experiments need a [dimred] table",
                ))
            }
            (ExperimentKind::DimredGrid, _, _) => {}
            (_, None, _) => {
                return Err(ConfigError::new(
                    "estimators",
                    format!("{} experiments need an [estimators] table", self.kind.as_str()),
                ))
            }
            _ => {}
        }
        if let Some(e) = &self.estimators {
            e.check(model.as_ref())?;
        }
        if let Some(d) = &self.dimred {
            d.check(model.as_ref())?;
        }
        Ok(model)
    }

    pub fn estimators(&self) -> Result<&EstimatorSection, ConfigError> {
        self.estimators
            .as_ref()
            .ok_or_else(|| ConfigError::new("estimators", "this command needs an [estimators] table"))
    }

    pub fn sweep_config(&self, seed: u64) -> Result<SweepConfig, ConfigError> {
        let e = self.estimators()?;
        Ok(SweepConfig {
            kinds: e.kinds.clone(),
            exponents: e.p.clone(),
            budgets: e.budgets.clone(),
            replicates: e.replicates,
            base_seed: seed,
            transport: e.transport(),
        })
    }

    pub fn dimred_config(&self, seed: u64) -> Result<DimredConfig, ConfigError> {
        let d = self
            .dimred
            .as_ref()
            .ok_or_else(|| ConfigError::new("dimred", "this command needs a [dimred] table"))?;
        Ok(DimredConfig {
            methods: d.methods.clone(),
            ranks_x: d.ranks_x.clone(),
            ranks_y: d.ranks_y.clone(),
            replicates: d.replicates,
            budget: d.budget,
            p: d.p,
            base_seed: seed,
            n_mc: d.n_mc,
            n_covariance: d.n_covariance,
            transport: TransportOptions {
                degree: d.degree,
                fit: d.fit.clone(),
            },
        })
    }
}
