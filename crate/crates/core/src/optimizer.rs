//! Projected gradient descent for `min C_β(θ)` over the probability simplex.

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::empirical::{sa_cvar, sa_cvar_and_gradient, Method, TailLevels};
use crate::error::{Error, Result};
use crate::extrapolation::estimate_extrapolated;
use crate::loss::LossModel;
use crate::rng;
use crate::sample::SampleMatrix;

/// Euclidean projection onto `{θ ≥ 0, Σθ = 1}` by the sorted-threshold rule.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    if v.is_empty() {
        return Vec::new();
    }
    let mut u = v.to_vec();
    u.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut tau = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cum += uj;
        let t = (cum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            tau = t;
        }
    }
    v.iter().map(|&x| (x - tau).max(0.0)).collect()
}

/// A CVaR-minimising portfolio problem on a fixed sample of asset losses.
#[derive(Debug, Clone)]
pub struct PortfolioProblem {
    pub samples: SampleMatrix,
    pub loss: LossModel,
    pub gradient_method: Method,
    /// `β` is the objective level; `β₀` is used by the extrapolated gradient.
    pub levels: TailLevels,
}

impl PortfolioProblem {
    pub fn new(
        samples: SampleMatrix,
        loss: LossModel,
        gradient_method: Method,
        levels: TailLevels,
    ) -> Result<Self> {
        if samples.ncols() < 2 {
            return Err(Error::InvalidInput("a portfolio needs at least 2 assets".into()));
        }
        if gradient_method == Method::ImportanceSampling {
            return Err(Error::InvalidInput(
                "portfolio gradients come from the sample-average or extrapolated estimator".into(),
            ));
        }
        Ok(Self {
            samples,
            loss,
            gradient_method,
            levels,
        })
    }

    pub fn dim(&self) -> usize {
        self.samples.ncols()
    }

    /// Objective estimate and gradient at `theta` from the configured estimator.
    pub fn objective_and_gradient(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        match self.gradient_method {
            Method::Extrapolated => {
                let r = estimate_extrapolated(&self.samples, theta, &self.loss, self.levels)?;
                Ok((r.cvar, r.gradient.expect("extrapolated report has a gradient")))
            }
            _ => {
                let (_, c, g) =
                    sa_cvar_and_gradient(&self.samples, theta, &self.loss, self.levels.beta())?;
                Ok((c, g))
            }
        }
    }
}

/// Where descent starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartPoint {
    /// Equal weights.
    Uniform,
    /// Given weights, projected onto the simplex.
    Explicit(Vec<f64>),
    /// Uniform draw on the simplex from the optimizer seed.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    /// Fixed step; `None` uses `0.1/‖ĝ(θ₀)‖₂`.
    #[serde(default)]
    pub step_size: Option<f64>,
    /// Scale step `t` by `1/√t` (1-based).
    #[serde(default)]
    pub decay: bool,
    /// Halve the step, from then on, whenever a step would raise the sample
    /// objective. Keeps the trace nonincreasing near kinks of the empirical
    /// CVaR, where a fixed step zigzags.
    #[serde(default = "default_backtrack")]
    pub backtrack: bool,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    /// Stop once `‖θ_{t+1} − θ_t‖∞` falls below this.
    #[serde(default = "default_tolerance")]
    pub grad_tolerance: f64,
    #[serde(default = "default_start")]
    pub start: StartPoint,
    #[serde(default)]
    pub seed: u64,
}

fn default_max_iters() -> usize {
    200
}

fn default_tolerance() -> f64 {
    1e-7
}

fn default_backtrack() -> bool {
    true
}

fn default_start() -> StartPoint {
    StartPoint::Uniform
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            step_size: None,
            decay: false,
            backtrack: true,
            max_iters: default_max_iters(),
            grad_tolerance: default_tolerance(),
            start: StartPoint::Uniform,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidInput("max_iters must be at least 1".into()));
        }
        if let Some(s) = self.step_size {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidInput(format!("step size must be positive, got {s}")));
            }
        }
        if !(self.grad_tolerance >= 0.0) {
            return Err(Error::InvalidInput("tolerance must be nonnegative".into()));
        }
        Ok(())
    }

    fn initial_point(&self, d: usize) -> Result<Vec<f64>> {
        match &self.start {
            StartPoint::Uniform => Ok(vec![1.0 / d as f64; d]),
            StartPoint::Explicit(v) => {
                if v.len() != d {
                    return Err(Error::InvalidInput(format!(
                        "start point has {} weights, problem has {d} assets",
                        v.len()
                    )));
                }
                Ok(project_simplex(v))
            }
            StartPoint::Random => {
                let mut r = rng::stream(self.seed, &[rng::tag::START]);
                let e: Vec<f64> = (0..d).map(|_| r.sample::<f64, _>(Exp1)).collect();
                let s: f64 = e.iter().sum();
                Ok(e.iter().map(|x| x / s).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub theta_star: Vec<f64>,
    /// `(iteration, objective estimate at the iterate entering that step)`.
    pub trace: Vec<(usize, f64)>,
    pub iterations: usize,
}

/// Halvings tried before a step is declared unable to descend.
const MAX_HALVINGS: u32 = 40;

/// Runs `θ ← Π(θ − η_t ĝ(θ))` on the problem's fixed sample.
pub fn minimize_cvar(
    problem: &PortfolioProblem,
    config: &OptimizerConfig,
) -> Result<OptimizationResult> {
    config.validate()?;
    let mut theta = config.initial_point(problem.dim())?;
    let (mut obj, mut grad) = problem.objective_and_gradient(&theta)?;
    let eta0 = config.step_size.unwrap_or_else(|| {
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm > 0.0 {
            0.1 / norm
        } else {
            0.1
        }
    });
    let mut shrink = 1.0;
    let mut trace = Vec::with_capacity(config.max_iters);
    let mut iterations = 0;
    for t in 0..config.max_iters {
        trace.push((t, obj));
        let schedule = if config.decay {
            1.0 / ((t + 1) as f64).sqrt()
        } else {
            1.0
        };
        let mut halvings = 0;
        let (next, next_obj, next_grad) = loop {
            let eta = eta0 * schedule * shrink;
            let stepped: Vec<f64> = theta.iter().zip(&grad).map(|(x, g)| x - eta * g).collect();
            let next = project_simplex(&stepped);
            let (o, g) = problem.objective_and_gradient(&next)?;
            if !config.backtrack || o <= obj {
                break (next, o, g);
            }
            if halvings == MAX_HALVINGS {
                // no descent along the projected step: stay put
                return Ok(OptimizationResult {
                    theta_star: theta,
                    trace,
                    iterations,
                });
            }
            shrink *= 0.5;
            halvings += 1;
        };
        let change = next
            .iter()
            .zip(&theta)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        theta = next;
        obj = next_obj;
        grad = next_grad;
        iterations = t + 1;
        if change < config.grad_tolerance {
            break;
        }
    }
    Ok(OptimizationResult {
        theta_star: theta,
        trace,
        iterations,
    })
}

/// Plug-in CVaR of the portfolio `θᵀX` on a reference sample.
pub fn evaluate_solution(theta: &[f64], reference: &SampleMatrix, beta: f64) -> Result<f64> {
    let losses = reference.project(theta)?;
    sa_cvar(&losses, beta)
}
