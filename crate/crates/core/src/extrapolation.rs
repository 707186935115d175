//! Tail extrapolation of CVaR and its gradient.
//!
//! For regularly varying losses `C_β ≈ (β₀/β)^ξ·C_{β₀}` and the same holds
//! for the gradient. The data-driven estimator computes plug-in estimates at
//! the moderate level `β₀`, estimates `ξ` by Hill on the same losses, and
//! scales both by `(β₀/β)^ξ̂`.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::empirical::{
    gradient_given_var, hill_estimator, sa_var_cvar, tail_count, EstimateReport, LossSample,
    Method, TailLevels,
};
use crate::error::{Error, Result};
use crate::loss::LossModel;
use crate::rng::{self, tag};
use crate::sample::SampleMatrix;

/// Extrapolation factor `(β₀/β)^ξ̂`.
pub fn extrapolation_factor(xi_hat: f64, levels: TailLevels) -> f64 {
    levels.ratio().powf(xi_hat)
}

/// `value·(β₀/β)^ξ̂`.
pub fn extrapolate(value: f64, xi_hat: f64, levels: TailLevels) -> f64 {
    value * extrapolation_factor(xi_hat, levels)
}

/// Componentwise [`extrapolate`] for gradient vectors.
pub fn extrapolate_vec(values: &[f64], xi_hat: f64, levels: TailLevels) -> Vec<f64> {
    let f = extrapolation_factor(xi_hat, levels);
    values.iter().map(|v| v * f).collect()
}

/// Data-driven CVaR and CVaR-gradient estimate at level `β` from plug-in
/// estimates at `β₀`.
///
/// The reported `var` is the plug-in VaR at `β₀`; the estimator never forms a
/// VaR at the target level.
pub fn estimate_extrapolated(
    samples: &SampleMatrix,
    theta: &[f64],
    loss: &LossModel,
    levels: TailLevels,
) -> Result<EstimateReport> {
    let ls = LossSample::compute(samples, theta, loss)?;
    levels.check_sample_size(ls.losses.len())?;
    let beta0 = levels.beta0();
    let (var0, cvar0) = sa_var_cvar(&ls.losses, beta0)?;
    let grad0 = gradient_given_var(samples, &ls, beta0, var0);
    let xi_hat = hill_estimator(&ls.losses, beta0)?;
    if !xi_hat.is_finite() {
        return Err(Error::InvalidInput(format!("degenerate tail: xi_hat = {xi_hat}")));
    }
    let factor = extrapolation_factor(xi_hat, levels);
    Ok(EstimateReport {
        var: var0,
        cvar: cvar0 * factor,
        gradient: Some(grad0.iter().map(|g| g * factor).collect()),
        xi_hat: Some(xi_hat),
        method: Method::Extrapolated,
        levels,
        n: samples.nrows(),
    })
}

/// CVaR only; skips the gradient pass.
pub fn extrapolated_cvar(losses: &[f64], levels: TailLevels) -> Result<(f64, f64)> {
    levels.check_sample_size(losses.len())?;
    let (_, cvar0) = sa_var_cvar(losses, levels.beta0())?;
    let xi_hat = hill_estimator(losses, levels.beta0())?;
    Ok((extrapolate(cvar0, xi_hat, levels), xi_hat))
}

/// Settings for choosing `β₀` by cross-validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtrapolationConfig {
    pub beta0_candidates: Vec<f64>,
    #[serde(default = "default_folds")]
    pub cv_folds: usize,
}

fn default_folds() -> usize {
    5
}

impl ExtrapolationConfig {
    /// Minimum training-set tail count at a candidate base level.
    pub const MIN_TAIL: usize = 5;

    pub fn new(beta0_candidates: Vec<f64>) -> Self {
        Self {
            beta0_candidates,
            cv_folds: default_folds(),
        }
    }
}

/// Picks the base level minimising the mean squared cross-validation error.
///
/// Rows are shuffled with `seed` and split into `cv_folds` folds. For each
/// fold the extrapolated CVaR is fitted on the remaining rows and compared to
/// the plug-in CVaR at `β` on all rows (held-out pooled with training, the
/// best reference the data allow). Scores tied within `1e−12` go to the larger
/// candidate.
pub fn select_beta0(
    samples: &SampleMatrix,
    theta: &[f64],
    loss: &LossModel,
    beta: f64,
    config: &ExtrapolationConfig,
    seed: u64,
) -> Result<f64> {
    let cands = &config.beta0_candidates;
    if cands.is_empty() {
        return Err(Error::NoFeasibleCandidate { candidates: vec![] });
    }
    if config.cv_folds < 2 {
        return Err(Error::InvalidInput("cross-validation needs at least 2 folds".into()));
    }
    let n = samples.nrows();
    if n < config.cv_folds {
        return Err(Error::InvalidInput(format!(
            "{n} rows cannot fill {} folds",
            config.cv_folds
        )));
    }
    for &b0 in cands {
        TailLevels::new(beta, b0)?;
    }
    let losses = LossSample::losses_only(samples, theta, loss)?.losses;

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, &[tag::FOLDS]));
    let folds: Vec<Vec<f64>> = (0..config.cv_folds)
        .map(|f| {
            order
                .iter()
                .enumerate()
                .filter(|(pos, _)| pos % config.cv_folds != f)
                .map(|(_, &i)| losses[i])
                .collect()
        })
        .collect();
    let smallest_train = folds.iter().map(Vec::len).min().unwrap_or(0);

    let feasible: Vec<f64> = cands
        .iter()
        .copied()
        .filter(|&b0| tail_count(smallest_train, b0) >= ExtrapolationConfig::MIN_TAIL)
        .collect();
    if feasible.is_empty() {
        return Err(Error::NoFeasibleCandidate {
            candidates: cands.clone(),
        });
    }
    if feasible.len() == 1 {
        return Ok(feasible[0]);
    }

    let (_, reference) = sa_var_cvar(&losses, beta)?;
    let scores = feasible
        .par_iter()
        .map(|&b0| {
            let levels = TailLevels::new(beta, b0)?;
            let mut sq = 0.0;
            for train in &folds {
                let (c, _) = extrapolated_cvar(train, levels)?;
                sq += (c - reference).powi(2);
            }
            Ok(sq / folds.len() as f64)
        })
        .collect::<Result<Vec<f64>>>()?;

    let mut best = 0;
    for i in 1..feasible.len() {
        let (s, sb) = (scores[i], scores[best]);
        let tie = (s - sb).abs() <= 1e-12 * sb.abs().max(1.0);
        if (tie && feasible[i] > feasible[best]) || (!tie && s < sb) {
            best = i;
        }
    }
    Ok(feasible[best])
}
