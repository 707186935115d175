//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::empirical::TailLevels;
use crate::error::{Error, Result};
use crate::extrapolation::ExtrapolationConfig;
use crate::loss::LossModel;
use crate::models::{ParetoModel, TCopulaParetoModel, TailIndexVector};
use crate::optimizer::OptimizerConfig;

use super::source::{EmpiricalModel, ModelSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    RmseGradient,
    RmseCvar,
    VarianceStudy,
    Portfolio,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::RmseGradient => "rmse_gradient",
            ExperimentKind::RmseCvar => "rmse_cvar",
            ExperimentKind::VarianceStudy => "variance_study",
            ExperimentKind::Portfolio => "portfolio",
        }
    }
}

/// Where observations come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", deny_unknown_fields)]
pub enum ModelSpec {
    /// Independent Pareto marginals. A single `alphas`/`scale` entry is
    /// broadcast to every dimension.
    Pareto {
        alphas: Vec<f64>,
        #[serde(default)]
        scale: Option<Vec<f64>>,
    },
    /// t-copula with Pareto marginals. Give either a full `correlation`
    /// matrix or an `equicorrelation` coefficient (default 0).
    TCopulaPareto {
        alphas: Vec<f64>,
        #[serde(default)]
        scale: Option<Vec<f64>>,
        #[serde(default = "default_dof")]
        dof: f64,
        #[serde(default)]
        correlation: Option<Vec<Vec<f64>>>,
        #[serde(default)]
        equicorrelation: Option<f64>,
    },
    /// Rows of a returns/loss table, resampled with replacement.
    Csv { path: PathBuf },
}

fn default_dof() -> f64 {
    TCopulaParetoModel::DEFAULT_DOF
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Pareto { .. } => "pareto",
            ModelSpec::TCopulaPareto { .. } => "t_copula_pareto",
            ModelSpec::Csv { .. } => "csv",
        }
    }

    /// Builds the model for dimension `d`. CSV paths resolve relative to `base`.
    pub fn build(&self, d: usize, base: Option<&Path>) -> Result<ModelSource> {
        match self {
            ModelSpec::Pareto { alphas, scale } => {
                let alphas = TailIndexVector::new(broadcast(alphas, d, "alphas")?)?;
                let scale = match scale {
                    Some(s) => broadcast(s, d, "scale")?,
                    None => vec![1.0; d],
                };
                Ok(ModelSource::Pareto(ParetoModel::new(alphas, scale)?))
            }
            ModelSpec::TCopulaPareto {
                alphas,
                scale,
                dof,
                correlation,
                equicorrelation,
            } => {
                let alphas = TailIndexVector::new(broadcast(alphas, d, "alphas")?)?;
                let scale = match scale {
                    Some(s) => broadcast(s, d, "scale")?,
                    None => vec![1.0; d],
                };
                let corr = match (correlation, equicorrelation) {
                    (Some(_), Some(_)) => {
                        return Err(Error::Config(
                            "give either correlation or equicorrelation, not both".into(),
                        ))
                    }
                    (Some(rows), None) => {
                        if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                            return Err(Error::Config(format!("correlation must be {d}x{d}")));
                        }
                        DMatrix::from_fn(d, d, |i, j| rows[i][j])
                    }
                    (None, rho) => {
                        let rho = rho.unwrap_or(0.0);
                        DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { rho })
                    }
                };
                Ok(ModelSource::TCopula(TCopulaParetoModel::new(
                    corr, *dof, alphas, scale,
                )?))
            }
            ModelSpec::Csv { path } => {
                let resolved = match base {
                    Some(b) if path.is_relative() => b.join(path),
                    _ => path.clone(),
                };
                let data = super::csv_io::load_returns_csv(&resolved)?;
                if data.ncols() != d {
                    return Err(Error::Config(format!(
                        "{} has {} columns but dimension is {d}",
                        resolved.display(),
                        data.ncols()
                    )));
                }
                Ok(ModelSource::Empirical(EmpiricalModel::new(data)))
            }
        }
    }
}

fn broadcast(v: &[f64], d: usize, what: &str) -> Result<Vec<f64>> {
    match v.len() {
        1 => Ok(vec![v[0]; d]),
        n if n == d => Ok(v.to_vec()),
        n => Err(Error::Config(format!(
            "{what} has {n} entries; expected 1 or {d}"
        ))),
    }
}

/// Portfolio weights: `"uniform"` or an explicit vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThetaSpec {
    Named(ThetaName),
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaName {
    Uniform,
}

impl Default for ThetaSpec {
    fn default() -> Self {
        ThetaSpec::Named(ThetaName::Uniform)
    }
}

impl ThetaSpec {
    pub fn resolve(&self, d: usize) -> Result<Vec<f64>> {
        match self {
            ThetaSpec::Named(ThetaName::Uniform) => Ok(vec![1.0 / d as f64; d]),
            ThetaSpec::Explicit(v) => {
                if v.len() != d {
                    return Err(Error::Config(format!(
                        "theta has {} entries, dimension is {d}",
                        v.len()
                    )));
                }
                if v.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || v.iter().all(|&t| t == 0.0) {
                    return Err(Error::Config("theta must be nonnegative and nonzero".into()));
                }
                Ok(v.clone())
            }
        }
    }

    /// Parses `uniform` or a comma-separated list of weights.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "uniform" {
            return Ok(ThetaSpec::Named(ThetaName::Uniform));
        }
        s.split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidInput(format!("bad theta component {p:?}")))
            })
            .collect::<Result<Vec<_>>>()
            .map(ThetaSpec::Explicit)
    }
}

/// One target level, with its base level either fixed or chosen by
/// cross-validation (when absent and candidates are configured) or defaulted
/// by loss kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelSpec {
    pub beta: f64,
    #[serde(default)]
    pub beta0: Option<f64>,
}

/// Full description of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub model: ModelSpec,
    pub dimension: usize,
    #[serde(default = "default_loss")]
    pub loss: LossModel,
    #[serde(default)]
    pub theta: ThetaSpec,
    pub levels: Vec<LevelSpec>,
    #[serde(default)]
    pub beta0_candidates: Option<Vec<f64>>,
    #[serde(default = "default_folds")]
    pub cv_folds: usize,
    #[serde(default = "default_sample_sizes")]
    pub sample_sizes: Vec<usize>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    /// Rows used for the plug-in benchmark value.
    #[serde(default = "default_benchmark_size")]
    pub benchmark_size: usize,
    /// Use closed-form Pareto values as the benchmark (1-d Pareto only).
    #[serde(default)]
    pub closed_form_benchmark: bool,
    /// Rows of the reference sample for portfolio evaluation.
    #[serde(default = "default_reference_size")]
    pub reference_size: usize,
    /// Starts used to locate the reference optimum.
    #[serde(default = "default_multi_start")]
    pub multi_start: usize,
    #[serde(default)]
    pub optimizer: Option<OptimizerConfig>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_loss() -> LossModel {
    LossModel::Linear
}
fn default_folds() -> usize {
    5
}
fn default_sample_sizes() -> Vec<usize> {
    vec![250, 500, 1000, 2000]
}
fn default_replications() -> usize {
    200
}
fn default_benchmark_size() -> usize {
    1_000_000
}
fn default_reference_size() -> usize {
    100_000
}
fn default_multi_start() -> usize {
    4
}

impl ExperimentConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config file. A relative CSV model path is taken relative to
    /// the directory holding the config.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json_str(&text)?;
        if let (ModelSpec::Csv { path: csv }, Some(dir)) = (&mut cfg.model, path.parent()) {
            if csv.is_relative() {
                *csv = dir.join(&*csv);
            }
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 {
            return Err(Error::Config("dimension must be at least 1".into()));
        }
        if self.levels.is_empty() {
            return Err(Error::Config("at least one level is required".into()));
        }
        for l in &self.levels {
            let beta0 = l.beta0.unwrap_or(l.beta);
            TailLevels::new(l.beta, beta0).map_err(|e| Error::Config(e.to_string()))?;
        }
        if let Some(c) = &self.beta0_candidates {
            if c.is_empty() {
                return Err(Error::Config("beta0_candidates is empty".into()));
            }
            for l in &self.levels {
                for &b0 in c {
                    TailLevels::new(l.beta, b0).map_err(|e| Error::Config(e.to_string()))?;
                }
            }
            if self.cv_folds < 2 {
                return Err(Error::Config("cv_folds must be at least 2".into()));
            }
        }
        if self.sample_sizes.is_empty() || self.sample_sizes.contains(&0) {
            return Err(Error::Config("sample sizes must be positive".into()));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if self.benchmark_size == 0 || self.reference_size == 0 {
            return Err(Error::Config("benchmark and reference sizes must be positive".into()));
        }
        if self.multi_start == 0 {
            return Err(Error::Config("multi_start must be at least 1".into()));
        }
        self.loss.validate()?;
        self.theta.resolve(self.dimension)?;
        if let Some(o) = &self.optimizer {
            o.validate()?;
        }
        if self.kind == ExperimentKind::Portfolio && self.dimension < 2 {
            return Err(Error::Config("portfolio experiments need dimension >= 2".into()));
        }
        if self.kind == ExperimentKind::VarianceStudy && self.replications < 2 {
            return Err(Error::Config("variance studies need at least 2 replications".into()));
        }
        match &self.model {
            ModelSpec::Pareto { alphas, scale } | ModelSpec::TCopulaPareto { alphas, scale, .. } => {
                TailIndexVector::new(broadcast(alphas, self.dimension, "alphas")?)?;
                if let Some(s) = scale {
                    broadcast(s, self.dimension, "scale")?;
                }
            }
            ModelSpec::Csv { .. } => {}
        }
        Ok(())
    }

    /// Base level when none is given: `20β` for linear loss, `8β` otherwise,
    /// `0.1` for portfolios; capped below 1.
    pub fn default_beta0(&self, beta: f64) -> f64 {
        let b0 = match (self.kind, self.loss) {
            (ExperimentKind::Portfolio, _) => 0.1f64.max(beta),
            (_, LossModel::Linear) => 20.0 * beta,
            _ => 8.0 * beta,
        };
        b0.min(0.5).max(beta)
    }

    /// Fixed base level for `level`, or `None` when it is cross-validated.
    pub fn fixed_beta0(&self, level: &LevelSpec) -> Option<f64> {
        match (level.beta0, &self.beta0_candidates) {
            (Some(b0), _) => Some(b0),
            (None, Some(_)) => None,
            (None, None) => Some(self.default_beta0(level.beta)),
        }
    }

    pub fn extrapolation_config(&self) -> Option<ExtrapolationConfig> {
        self.beta0_candidates.as_ref().map(|c| ExtrapolationConfig {
            beta0_candidates: c.clone(),
            cv_folds: self.cv_folds,
        })
    }

    pub fn optimizer_config(&self) -> OptimizerConfig {
        self.optimizer.clone().unwrap_or_default()
    }
}
