//! Importance sampling by tail scaling.
//!
//! Samples drawn from the nominal density `f` are pushed into the target tail
//! by the componentwise map `x ↦ s·x` with `s_k = (β₀/β)^{1/α_k}`. Each scaled
//! sample carries the exact likelihood ratio
//! `(Π_k s_k)·f(s·x)/f(x)`, so tail probabilities and CVaR at the rare level
//! `β` are estimated from the far more frequent events at level `β₀`.

use rayon::prelude::*;

use crate::empirical::{sa_var_cvar, tail_budget, EstimateReport, Method, TailLevels};
use crate::error::{Error, Result};
use crate::loss::LossModel;
use crate::models::{JointDensity, Sampler, TailIndexVector};
use crate::rng::{self, tag};
use crate::sample::{dot, SampleMatrix};

/// Componentwise scaling `s_k = (β₀/β)^{1/α_k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingVector {
    s: Vec<f64>,
    levels: TailLevels,
}

impl ScalingVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.s
    }

    pub fn levels(&self) -> TailLevels {
        self.levels
    }

    /// `Σ_k ln s_k`.
    fn log_jacobian(&self) -> f64 {
        self.s.iter().map(|s| s.ln()).sum()
    }
}

pub fn scaling_vector(alphas: &TailIndexVector, levels: TailLevels) -> ScalingVector {
    let ratio = levels.ratio();
    ScalingVector {
        s: alphas.as_slice().iter().map(|a| ratio.powf(1.0 / a)).collect(),
        levels,
    }
}

/// Losses under the IS law paired with their likelihood ratios.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedLossSample {
    losses: Vec<f64>,
    weights: Vec<f64>,
}

impl WeightedLossSample {
    pub fn new(losses: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if losses.is_empty() {
            return Err(Error::EmptySample);
        }
        if losses.len() != weights.len() {
            return Err(Error::InvalidInput(format!(
                "{} losses but {} weights",
                losses.len(),
                weights.len()
            )));
        }
        if losses.iter().any(|l| !l.is_finite()) {
            return Err(Error::InvalidInput("losses must be finite".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidInput(format!(
                "likelihood ratios must be positive and finite, got {w}"
            )));
        }
        Ok(Self { losses, weights })
    }

    pub fn losses(&self) -> &[f64] {
        &self.losses
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.losses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.losses.is_empty()
    }

    /// `(1/n) Σ w_i 𝟙(L_i > u)`.
    pub fn tail_mass(&self, u: f64) -> f64 {
        let s: f64 = self
            .losses
            .iter()
            .zip(&self.weights)
            .filter(|(&l, _)| l > u)
            .map(|(_, &w)| w)
            .sum();
        s / self.len() as f64
    }
}

/// `(Π_k s_k)·f(s·x)/f(x)`, evaluated in log space.
pub fn likelihood_ratio<D: JointDensity + ?Sized>(
    density: &D,
    x: &[f64],
    s: &ScalingVector,
) -> Result<f64> {
    let base = density.log_joint_pdf(x);
    if base == f64::NEG_INFINITY {
        return Err(Error::ZeroDensity);
    }
    let scaled: Vec<f64> = x.iter().zip(&s.s).map(|(xk, sk)| xk * sk).collect();
    Ok((s.log_jacobian() + density.log_joint_pdf(&scaled) - base).exp())
}

/// Draws `X_i` from the model, returns `ℓ(θᵀ(s·X_i))` with likelihood ratios.
pub fn is_weighted_sample<M>(
    model: &M,
    theta: &[f64],
    loss: &LossModel,
    n: usize,
    levels: TailLevels,
    seed: u64,
) -> Result<WeightedLossSample>
where
    M: Sampler + JointDensity,
{
    let x = draw(model, n, &mut rng::seeded(seed))?;
    weighted_from_draws(model, &x, theta, loss, levels)
}

fn draw<M: Sampler>(model: &M, n: usize, rng: &mut rng::StreamRng) -> Result<SampleMatrix> {
    if n == 0 {
        return Err(Error::InvalidInput("sample size must be at least 1".into()));
    }
    Ok(model.sample_with(n, rng))
}

/// IS losses and weights built from nominal draws `x`.
pub fn weighted_from_draws<D: JointDensity + ?Sized>(
    density: &D,
    x: &SampleMatrix,
    theta: &[f64],
    loss: &LossModel,
    levels: TailLevels,
) -> Result<WeightedLossSample> {
    x.check_theta(theta)?;
    if density.tail_indices().len() != x.ncols() {
        return Err(Error::InvalidInput(format!(
            "model has {} components, samples have {}",
            density.tail_indices().len(),
            x.ncols()
        )));
    }
    let s = scaling_vector(density.tail_indices(), levels);
    let mut losses = Vec::with_capacity(x.nrows());
    let mut weights = Vec::with_capacity(x.nrows());
    let mut scaled = vec![0.0; x.ncols()];
    for row in x.rows() {
        for ((dst, xk), sk) in scaled.iter_mut().zip(row).zip(&s.s) {
            *dst = xk * sk;
        }
        losses.push(loss.eval(dot(&scaled, theta)));
        weights.push(likelihood_ratio(density, row, &s)?);
    }
    WeightedLossSample::new(losses, weights)
}

/// Estimated c.d.f. `1 − (1/n) Σ w_i 𝟙(L_i > u)`.
pub fn is_tail_cdf(ws: &WeightedLossSample, u: f64) -> f64 {
    1.0 - ws.tail_mass(u)
}

/// `inf{u : F̂(u) ≥ 1 − β}`: the smallest observed loss whose weighted mass
/// strictly above it does not exceed `β`.
pub fn is_var(ws: &WeightedLossSample, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    let n = ws.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&a, &b| ws.losses[b].total_cmp(&ws.losses[a]));
    // compare un-normalized mass against nβ so unit weights reproduce the
    // order-statistic VaR exactly
    let budget = tail_budget(n, beta);
    let mut above = 0.0;
    let mut var = ws.losses[order[0]];
    let mut i = 0;
    while i < n {
        let u = ws.losses[order[i]];
        if above > budget {
            break;
        }
        var = u;
        while i < n && ws.losses[order[i]] == u {
            above += ws.weights[order[i]];
            i += 1;
        }
    }
    Ok(var)
}

/// `v̂ + (nβ)⁻¹ Σ (L_i − v̂)⁺ w_i` at target level `β`.
pub fn is_cvar(ws: &WeightedLossSample, beta: f64) -> Result<EstimateReport> {
    let var = is_var(ws, beta)?;
    let excess: f64 = ws
        .losses
        .iter()
        .zip(&ws.weights)
        .map(|(&l, &w)| (l - var).max(0.0) * w)
        .sum();
    let cvar = var + excess / (ws.len() as f64 * beta);
    Ok(EstimateReport {
        var,
        cvar,
        gradient: None,
        xi_hat: None,
        method: Method::ImportanceSampling,
        levels: TailLevels::single(beta)?,
        n: ws.len(),
    })
}

/// IS report carrying the full `(β, β₀)` levels.
pub fn is_estimate<M>(
    model: &M,
    theta: &[f64],
    loss: &LossModel,
    n: usize,
    levels: TailLevels,
    seed: u64,
) -> Result<EstimateReport>
where
    M: Sampler + JointDensity,
{
    let ws = is_weighted_sample(model, theta, loss, n, levels, seed)?;
    let mut report = is_cvar(&ws, levels.beta())?;
    report.levels = levels;
    Ok(report)
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "tail probability must lie in (0, 1), got {beta}"
        )))
    }
}

/// Empirical variances of the IS and sample-average CVaR estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceStudy {
    pub var_is: f64,
    pub var_sa: f64,
    /// `var_is / var_sa`.
    pub ratio: f64,
    pub mean_is: f64,
    pub mean_sa: f64,
    pub replications: usize,
}

/// Per-replication CVaR estimates `(IS, SA)` on paired draws.
///
/// Replication `r` draws from stream `(seed, REPLICATION, r)`; the SA estimate
/// uses the same nominal draws as the IS one.
pub fn paired_cvar_estimates<M>(
    model: &M,
    theta: &[f64],
    loss: &LossModel,
    levels: TailLevels,
    n: usize,
    replications: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>>
where
    M: Sampler + JointDensity,
{
    (0..replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::stream(seed, &[tag::REPLICATION, r as u64]);
            let x = draw(model, n, &mut rng)?;
            let ws = weighted_from_draws(model, &x, theta, loss, levels)?;
            let c_is = is_cvar(&ws, levels.beta())?.cvar;
            let plain: Vec<f64> = x.rows().map(|row| loss.eval(dot(row, theta))).collect();
            let (_, c_sa) = sa_var_cvar(&plain, levels.beta())?;
            Ok((c_is, c_sa))
        })
        .collect()
}

pub fn is_variance_study<M>(
    model: &M,
    theta: &[f64],
    loss: &LossModel,
    levels: TailLevels,
    n: usize,
    replications: usize,
    seed: u64,
) -> Result<VarianceStudy>
where
    M: Sampler + JointDensity,
{
    if replications < 2 {
        return Err(Error::InvalidInput(
            "a variance study needs at least 2 replications".into(),
        ));
    }
    let pairs = paired_cvar_estimates(model, theta, loss, levels, n, replications, seed)?;
    let is: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let sa: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let (mean_is, var_is) = mean_variance(&is);
    let (mean_sa, var_sa) = mean_variance(&sa);
    Ok(VarianceStudy {
        var_is,
        var_sa,
        ratio: var_is / var_sa,
        mean_is,
        mean_sa,
        replications,
    })
}

/// Mean and unbiased sample variance, summed in index order.
pub fn mean_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, ss / (n - 1.0))
}
