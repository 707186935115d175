//! Replication grids behind the `compare`, `variance` and `optimize` commands.
//!
//! Replication `r` of level `li` at sample size index `ni` always draws from
//! stream `(seed, REPLICATION, li, ni, r)`, so cells do not depend on thread
//! scheduling or on how many replications were requested.

use rand::Rng;
use rayon::prelude::*;

use crate::empirical::{sa_cvar, sa_report, sa_var_cvar, tail_budget, LossSample, Method, TailLevels};
use crate::error::{Error, Result};
use crate::extrapolation::{estimate_extrapolated, select_beta0};
use crate::importance::{mean_variance, paired_cvar_estimates};
use crate::loss::LossModel;
use crate::models::{pareto_cvar_closed_form, Sampler};
use crate::optimizer::{minimize_cvar, OptimizerConfig, PortfolioProblem, StartPoint};
use crate::rng::{self, tag};
use crate::sample::SampleMatrix;

use super::config::{ExperimentConfig, ExperimentKind, LevelSpec};
use super::results::{BenchmarkResult, BenchmarkValue, Cell, VarianceRatio};
use super::source::ModelSource;

/// Rows generated per chunk when building a benchmark from simulation.
const CHUNK_ROWS: usize = 50_000;

/// Dispatches on `config.kind`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<BenchmarkResult> {
    match config.kind {
        ExperimentKind::RmseCvar | ExperimentKind::RmseGradient => run_rmse_benchmark(config),
        ExperimentKind::VarianceStudy => run_variance_study(config),
        ExperimentKind::Portfolio => run_portfolio_experiment(config),
    }
}

fn build_model(config: &ExperimentConfig) -> Result<ModelSource> {
    config.validate()?;
    config.model.build(config.dimension, None)
}

struct Truth {
    cvar: f64,
    gradient: Option<Vec<f64>>,
    source: &'static str,
}

/// Per-replication outcome of one method: relative error and scalar estimate.
type Outcome = std::result::Result<(f64, f64), String>;

/// Naive SA at `β` against extrapolation from `β₀` on shared draws.
pub fn run_rmse_benchmark(config: &ExperimentConfig) -> Result<BenchmarkResult> {
    if !matches!(config.kind, ExperimentKind::RmseCvar | ExperimentKind::RmseGradient) {
        return Err(Error::Config(format!(
            "{} is not an RMSE experiment",
            config.kind.as_str()
        )));
    }
    let model = build_model(config)?;
    let theta = config.theta.resolve(config.dimension)?;
    let want_grad = config.kind == ExperimentKind::RmseGradient;
    let cv = config.extrapolation_config();

    let mut cells = Vec::new();
    let mut benchmarks = Vec::new();
    for (li, level) in config.levels.iter().enumerate() {
        let truth = benchmark_truth(config, &model, &theta, level.beta, li as u64, want_grad)?;
        benchmarks.push(BenchmarkValue {
            beta: level.beta,
            source: truth.source.to_string(),
            value: truth.cvar,
            gradient: truth.gradient.clone(),
            theta: Some(theta.clone()),
        });
        let fixed = config.fixed_beta0(level);

        for (ni, &n) in config.sample_sizes.iter().enumerate() {
            let outcomes: Vec<(Outcome, Outcome, f64)> = (0..config.replications)
                .into_par_iter()
                .map(|r| {
                    let mut g = rng::stream(
                        config.seed,
                        &[tag::REPLICATION, li as u64, ni as u64, r as u64],
                    );
                    let x = model.sample_with(n, &mut g);
                    let cv_seed: u64 = g.random();
                    let naive = sa_report(&x, &theta, &config.loss, level.beta)
                        .map(|rep| score(rep.cvar, rep.gradient.as_deref(), &theta, &truth, want_grad))
                        .map_err(|e| e.to_string());
                    let b0 = match fixed {
                        Some(b0) => Ok(b0),
                        None => select_beta0(
                            &x,
                            &theta,
                            &config.loss,
                            level.beta,
                            cv.as_ref().expect("candidates present when beta0 is not fixed"),
                            cv_seed,
                        ),
                    };
                    let b0_used = b0.as_ref().map_or(f64::NAN, |b| *b);
                    let extrap = b0
                        .and_then(|b0| {
                            let levels = TailLevels::new(level.beta, b0)?;
                            estimate_extrapolated(&x, &theta, &config.loss, levels)
                        })
                        .map(|rep| score(rep.cvar, rep.gradient.as_deref(), &theta, &truth, want_grad))
                        .map_err(|e| e.to_string());
                    (naive, extrap, b0_used)
                })
                .collect();

            let naive: Vec<Outcome> = outcomes.iter().map(|o| o.0.clone()).collect();
            let extrap: Vec<Outcome> = outcomes.iter().map(|o| o.1.clone()).collect();
            let b0_mean = fixed.unwrap_or_else(|| finite_mean(outcomes.iter().map(|o| o.2)));
            let base = CellKey {
                config,
                model: config.model.name(),
                beta: level.beta,
                n,
            };
            cells.push(aggregate(&base, level.beta, Method::SampleAverage, &naive));
            cells.push(aggregate(&base, b0_mean, Method::Extrapolated, &extrap));
        }
    }
    Ok(BenchmarkResult {
        config: config.clone(),
        cells,
        benchmarks,
        variance_ratios: Vec::new(),
    })
}

/// Mean of the finite values; NaN when there are none. Reports the average
/// cross-validated base level.
fn finite_mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn score(cvar: f64, grad: Option<&[f64]>, theta: &[f64], truth: &Truth, want_grad: bool) -> (f64, f64) {
    if want_grad {
        let g = grad.expect("gradient requested");
        let t = truth.gradient.as_deref().expect("gradient benchmark");
        let num = g.iter().zip(t).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let den = t.iter().map(|b| b.abs()).fold(0.0, f64::max);
        let directional: f64 = g.iter().zip(theta).map(|(a, b)| a * b).sum();
        (num / den, directional)
    } else {
        ((cvar - truth.cvar).abs() / truth.cvar.abs(), cvar)
    }
}

struct CellKey<'a> {
    config: &'a ExperimentConfig,
    model: &'a str,
    beta: f64,
    n: usize,
}

fn aggregate(key: &CellKey<'_>, beta0: f64, method: Method, outcomes: &[Outcome]) -> Cell {
    let ok: Vec<(f64, f64)> = outcomes.iter().filter_map(|o| o.as_ref().ok().copied()).collect();
    let failure = outcomes.iter().find_map(|o| o.as_ref().err().cloned());
    let errors: Vec<f64> = ok.iter().map(|p| p.0).collect();
    let estimates: Vec<f64> = ok.iter().map(|p| p.1).collect();
    let rmse = if errors.is_empty() {
        f64::NAN
    } else {
        (errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt()
    };
    let (mean, variance) = match estimates.len() {
        0 => (f64::NAN, f64::NAN),
        1 => (estimates[0], 0.0),
        _ => mean_variance(&estimates),
    };
    Cell {
        experiment: key.config.kind.as_str().to_string(),
        model: key.model.to_string(),
        d: key.config.dimension,
        loss: key.config.loss.to_string(),
        beta: key.beta,
        beta0,
        n: key.n,
        method: method.as_str().to_string(),
        replications: ok.len(),
        rmse,
        mean,
        variance,
        seed: key.config.seed,
        failures: outcomes.len() - ok.len(),
        failure,
        errors,
    }
}

fn benchmark_truth(
    config: &ExperimentConfig,
    model: &ModelSource,
    theta: &[f64],
    beta: f64,
    li: u64,
    want_grad: bool,
) -> Result<Truth> {
    if config.closed_form_benchmark {
        return closed_form_truth(model, theta, &config.loss, beta);
    }
    if let ModelSource::Empirical(m) = model {
        let data = m.data();
        let (_, cvar, grad) = crate::empirical::sa_cvar_and_gradient(data, theta, &config.loss, beta)?;
        return Ok(Truth {
            cvar,
            gradient: want_grad.then_some(grad),
            source: "sample_average",
        });
    }
    simulated_truth(config, model, theta, beta, li, want_grad)
}

/// Exact CVaR and gradient for a one-dimensional Pareto model.
fn closed_form_truth(model: &ModelSource, theta: &[f64], loss: &LossModel, beta: f64) -> Result<Truth> {
    let ModelSource::Pareto(p) = model else {
        return Err(Error::Config("closed-form benchmark needs a pareto model".into()));
    };
    if p.alphas().len() != 1 {
        return Err(Error::Config("closed-form benchmark needs dimension 1".into()));
    }
    let (alpha, sigma, t) = (p.alphas().as_slice()[0], p.scale()[0], theta[0]);
    // X = σY with Y unit Pareto(α); Y² is unit Pareto(α/2)
    let (cvar, grad) = match loss {
        LossModel::Linear => {
            let c = pareto_cvar_closed_form(alpha, beta)?;
            (t * sigma * c, sigma * c)
        }
        LossModel::Squared => {
            let c = pareto_cvar_closed_form(alpha / 2.0, beta)?;
            (t * t * sigma * sigma * c, 2.0 * t * sigma * sigma * c)
        }
        LossModel::Power { .. } => {
            return Err(Error::Config("no closed-form benchmark for power loss".into()))
        }
    };
    Ok(Truth {
        cvar,
        gradient: Some(vec![grad]),
        source: "closed_form",
    })
}

/// Plug-in CVaR and gradient from `benchmark_size` fresh rows, generated in
/// fixed chunks so memory stays bounded. The gradient needs a second pass that
/// regenerates the same chunks.
fn simulated_truth(
    config: &ExperimentConfig,
    model: &ModelSource,
    theta: &[f64],
    beta: f64,
    li: u64,
    want_grad: bool,
) -> Result<Truth> {
    let total = config.benchmark_size;
    let chunks = total.div_ceil(CHUNK_ROWS);
    let chunk = |c: usize| -> SampleMatrix {
        let rows = CHUNK_ROWS.min(total - c * CHUNK_ROWS);
        let mut g = rng::stream(config.seed, &[tag::BENCHMARK, li, c as u64]);
        model.sample_with(rows, &mut g)
    };
    let losses: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| LossSample::losses_only(&chunk(c), theta, &config.loss).map(|l| l.losses))
        .collect::<Result<_>>()?;
    let losses: Vec<f64> = losses.concat();
    let (var, cvar) = sa_var_cvar(&losses, beta)?;
    if !want_grad {
        return Ok(Truth {
            cvar,
            gradient: None,
            source: "sample_average",
        });
    }

    let above = losses.iter().filter(|&&l| l > var).count();
    let tied = losses.iter().filter(|&&l| l == var).count();
    let budget = tail_budget(total, beta);
    let tie_weight = ((budget - above as f64) / tied.max(1) as f64).max(0.0);
    let d = config.dimension;
    let partials: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let x = chunk(c);
            let ls = LossSample::compute(&x, theta, &config.loss)?;
            let derivs = ls.loss_derivs.as_deref().expect("derivatives computed");
            let mut g = vec![0.0; d];
            for ((row, &l), &dl) in x.rows().zip(&ls.losses).zip(derivs) {
                let w = if l > var {
                    1.0
                } else if l == var {
                    tie_weight
                } else {
                    continue;
                };
                for (gk, &xk) in g.iter_mut().zip(row) {
                    *gk += w * dl * xk;
                }
            }
            Ok(g)
        })
        .collect::<Result<_>>()?;
    let mut grad = vec![0.0; d];
    for p in &partials {
        for (g, v) in grad.iter_mut().zip(p) {
            *g += v;
        }
    }
    grad.iter_mut().for_each(|g| *g /= budget);
    Ok(Truth {
        cvar,
        gradient: Some(grad),
        source: "sample_average",
    })
}

/// Paired IS/SA variance comparison over the `(β, β₀, n)` grid.
pub fn run_variance_study(config: &ExperimentConfig) -> Result<BenchmarkResult> {
    if config.kind != ExperimentKind::VarianceStudy {
        return Err(Error::Config(format!(
            "{} is not a variance study",
            config.kind.as_str()
        )));
    }
    let model = build_model(config)?;
    let density = model.density().ok_or(Error::DensityUnavailable)?;
    let theta = config.theta.resolve(config.dimension)?;

    let mut cells = Vec::new();
    let mut benchmarks = Vec::new();
    let mut ratios = Vec::new();
    for (li, level) in config.levels.iter().enumerate() {
        let b0 = level_beta0(config, level)?;
        let levels = TailLevels::new(level.beta, b0)?;
        let truth = if config.closed_form_benchmark {
            closed_form_truth(&model, &theta, &config.loss, level.beta)?
        } else {
            simulated_truth(config, &model, &theta, level.beta, li as u64, false)?
        };
        benchmarks.push(BenchmarkValue {
            beta: level.beta,
            source: truth.source.to_string(),
            value: truth.cvar,
            gradient: None,
            theta: Some(theta.clone()),
        });
        for (ni, &n) in config.sample_sizes.iter().enumerate() {
            let cell_seed = rng::stream_id(&[config.seed, tag::REPLICATION, li as u64, ni as u64]);
            let pairs = paired_cvar_estimates(
                density,
                &theta,
                &config.loss,
                levels,
                n,
                config.replications,
                cell_seed,
            );
            let key = CellKey {
                config,
                model: config.model.name(),
                beta: level.beta,
                n,
            };
            let rel = |c: f64| ((c - truth.cvar).abs() / truth.cvar.abs(), c);
            match pairs {
                Ok(pairs) => {
                    let is: Vec<Outcome> = pairs.iter().map(|p| Ok(rel(p.0))).collect();
                    let sa: Vec<Outcome> = pairs.iter().map(|p| Ok(rel(p.1))).collect();
                    let sa_cell = aggregate(&key, level.beta, Method::SampleAverage, &sa);
                    let is_cell = aggregate(&key, b0, Method::ImportanceSampling, &is);
                    ratios.push(VarianceRatio {
                        beta: level.beta,
                        beta0: b0,
                        n,
                        var_is: is_cell.variance,
                        var_sa: sa_cell.variance,
                        ratio: is_cell.variance / sa_cell.variance,
                    });
                    cells.push(sa_cell);
                    cells.push(is_cell);
                }
                Err(e) => {
                    let failed: Vec<Outcome> = vec![Err(e.to_string()); config.replications];
                    cells.push(aggregate(&key, level.beta, Method::SampleAverage, &failed));
                    cells.push(aggregate(&key, b0, Method::ImportanceSampling, &failed));
                }
            }
        }
    }
    Ok(BenchmarkResult {
        config: config.clone(),
        cells,
        benchmarks,
        variance_ratios: ratios,
    })
}

fn level_beta0(config: &ExperimentConfig, level: &LevelSpec) -> Result<f64> {
    match level.beta0 {
        Some(b0) => Ok(b0),
        None if config.beta0_candidates.is_some() => Err(Error::Config(format!(
            "level beta = {} needs an explicit beta0 for this experiment",
            level.beta
        ))),
        None => Ok(config.default_beta0(level.beta)),
    }
}

/// CVaR of `ℓ(θᵀX)` on `reference`.
fn reference_objective(theta: &[f64], reference: &SampleMatrix, loss: &LossModel, beta: f64) -> Result<f64> {
    let losses = LossSample::losses_only(reference, theta, loss)?.losses;
    sa_cvar(&losses, beta)
}

/// Reference optimum by multi-start SA-gradient descent on `reference`.
fn reference_optimum(
    config: &ExperimentConfig,
    reference: &SampleMatrix,
    beta: f64,
    li: u64,
) -> Result<(f64, Vec<f64>)> {
    let base = config.optimizer_config();
    let problem = PortfolioProblem::new(
        reference.clone(),
        config.loss,
        Method::SampleAverage,
        TailLevels::single(beta)?,
    )?;
    let starts: Vec<OptimizerConfig> = (0..config.multi_start)
        .map(|k| {
            let mut c = base.clone();
            if k == 0 {
                c.start = StartPoint::Uniform;
            } else {
                c.start = StartPoint::Random;
                c.seed = rng::stream_id(&[config.seed, tag::START, li, k as u64]);
            }
            c
        })
        .collect();
    let results: Vec<Result<(f64, Vec<f64>)>> = starts
        .par_iter()
        .map(|c| {
            let r = minimize_cvar(&problem, c)?;
            let v = reference_objective(&r.theta_star, reference, &config.loss, beta)?;
            Ok((v, r.theta_star))
        })
        .collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut last_err = None;
    for r in results {
        match r {
            Ok((v, t)) => {
                if best.as_ref().map_or(true, |b| v < b.0) {
                    best = Some((v, t));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.expect("at least one start ran"))
}

/// Optimality gap of SA-gradient and extrapolated-gradient descent on
/// `n`-row training samples, measured on a common reference sample.
pub fn run_portfolio_experiment(config: &ExperimentConfig) -> Result<BenchmarkResult> {
    if config.kind != ExperimentKind::Portfolio {
        return Err(Error::Config(format!(
            "{} is not a portfolio experiment",
            config.kind.as_str()
        )));
    }
    let model = build_model(config)?;
    let reference = match &model {
        ModelSource::Empirical(m) => m.data().clone(),
        _ => model.sample_with(
            config.reference_size,
            &mut rng::stream(config.seed, &[tag::REFERENCE]),
        ),
    };
    let opt = config.optimizer_config();
    let cv = config.extrapolation_config();
    let uniform = vec![1.0 / config.dimension as f64; config.dimension];

    let mut cells = Vec::new();
    let mut benchmarks = Vec::new();
    for (li, level) in config.levels.iter().enumerate() {
        let (v_star, theta_star) = reference_optimum(config, &reference, level.beta, li as u64)?;
        benchmarks.push(BenchmarkValue {
            beta: level.beta,
            source: "multi_start".into(),
            value: v_star,
            gradient: None,
            theta: Some(theta_star),
        });
        let fixed = config.fixed_beta0(level);

        for (ni, &n) in config.sample_sizes.iter().enumerate() {
            let outcomes: Vec<(Outcome, Outcome, f64)> = (0..config.replications)
                .into_par_iter()
                .map(|r| {
                    let mut g = rng::stream(
                        config.seed,
                        &[tag::REPLICATION, li as u64, ni as u64, r as u64],
                    );
                    let x = model.sample_with(n, &mut g);
                    let cv_seed: u64 = g.random();
                    let run = |method: Method, b0: f64| -> Result<(f64, f64)> {
                        let levels = TailLevels::new(level.beta, b0)?;
                        let problem = PortfolioProblem::new(x.clone(), config.loss, method, levels)?;
                        let res = minimize_cvar(&problem, &opt)?;
                        let v = reference_objective(&res.theta_star, &reference, &config.loss, level.beta)?;
                        Ok(((v - v_star).abs() / v_star.abs(), v))
                    };
                    let naive = run(Method::SampleAverage, level.beta).map_err(|e| e.to_string());
                    let b0 = match fixed {
                        Some(b0) => Ok(b0),
                        None => select_beta0(
                            &x,
                            &uniform,
                            &config.loss,
                            level.beta,
                            cv.as_ref().expect("candidates present when beta0 is not fixed"),
                            cv_seed,
                        ),
                    };
                    let b0_used = b0.as_ref().map_or(f64::NAN, |b| *b);
                    let extrap = b0
                        .and_then(|b0| run(Method::Extrapolated, b0))
                        .map_err(|e| e.to_string());
                    (naive, extrap, b0_used)
                })
                .collect();
            let naive: Vec<Outcome> = outcomes.iter().map(|o| o.0.clone()).collect();
            let extrap: Vec<Outcome> = outcomes.iter().map(|o| o.1.clone()).collect();
            let key = CellKey {
                config,
                model: config.model.name(),
                beta: level.beta,
                n,
            };
            let b0_mean = fixed.unwrap_or_else(|| finite_mean(outcomes.iter().map(|o| o.2)));
            cells.push(aggregate(&key, level.beta, Method::SampleAverage, &naive));
            cells.push(aggregate(&key, b0_mean, Method::Extrapolated, &extrap));
        }
    }
    Ok(BenchmarkResult {
        config: config.clone(),
        cells,
        benchmarks,
        variance_ratios: Vec::new(),
    })
}
