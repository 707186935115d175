//! Order statistics and plug-in (sample-average) estimators of VaR, CVaR and
//! the CVaR gradient, plus the Hill estimator of the extreme value index.
//!
//! VaR at tail probability `β` is the `⌈n(1−β)⌉`-th smallest loss, with no
//! interpolation. CVaR is `v̂ + (nβ)⁻¹ Σ (L_i − v̂)⁺`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::LossModel;
use crate::sample::SampleMatrix;

/// Target and base tail probabilities, `0 < β ≤ β₀ < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLevels", into = "RawLevels")]
pub struct TailLevels {
    beta: f64,
    beta0: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLevels {
    beta: f64,
    beta0: f64,
}

impl TryFrom<RawLevels> for TailLevels {
    type Error = Error;

    fn try_from(r: RawLevels) -> Result<Self> {
        Self::new(r.beta, r.beta0)
    }
}

impl From<TailLevels> for RawLevels {
    fn from(l: TailLevels) -> Self {
        RawLevels {
            beta: l.beta,
            beta0: l.beta0,
        }
    }
}

impl TailLevels {
    pub fn new(beta: f64, beta0: f64) -> Result<Self> {
        if beta > 0.0 && beta <= beta0 && beta0 < 1.0 {
            Ok(Self { beta, beta0 })
        } else {
            Err(Error::InvalidLevels { beta, beta0 })
        }
    }

    /// Levels with no extrapolation gap (`β₀ = β`).
    pub fn single(beta: f64) -> Result<Self> {
        Self::new(beta, beta)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn beta0(&self) -> f64 {
        self.beta0
    }

    /// `β₀/β ≥ 1`.
    pub fn ratio(&self) -> f64 {
        self.beta0 / self.beta
    }

    /// Checks that `n` observations leave at least one at the base level.
    pub fn check_sample_size(&self, n: usize) -> Result<()> {
        let count = tail_count(n, self.beta0);
        if count == 0 || count >= n {
            return Err(Error::InsufficientTail {
                n,
                level: self.beta0,
                count,
                required: 1,
            });
        }
        Ok(())
    }
}

/// Which estimator produced a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    SampleAverage,
    ImportanceSampling,
    Extrapolated,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::SampleAverage => "sample_average",
            Method::ImportanceSampling => "importance_sampling",
            Method::Extrapolated => "extrapolated",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "sample_average" | "sa" => Ok(Method::SampleAverage),
            "importance_sampling" | "is" => Ok(Method::ImportanceSampling),
            "extrapolated" | "extrapolation" => Ok(Method::Extrapolated),
            _ => Err(Error::InvalidInput(format!("unknown method {s:?}"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Output of one estimation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub var: f64,
    pub cvar: f64,
    pub gradient: Option<Vec<f64>>,
    pub xi_hat: Option<f64>,
    pub method: Method,
    pub levels: TailLevels,
    pub n: usize,
}

/// Losses `L_i = ℓ(θᵀX_i)` and derivatives `ℓ′(θᵀX_i)` for one θ.
///
/// The gradient of `ℓ(θᵀX_i)` in θ is `ℓ′(θᵀX_i)·X_i`; only the scalar factor
/// is stored, the rows come from the sample matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LossSample {
    pub losses: Vec<f64>,
    pub loss_derivs: Option<Vec<f64>>,
    pub theta: Vec<f64>,
}

impl LossSample {
    pub fn compute(samples: &SampleMatrix, theta: &[f64], loss: &LossModel) -> Result<Self> {
        Self::build(samples, theta, loss, true)
    }

    pub fn losses_only(samples: &SampleMatrix, theta: &[f64], loss: &LossModel) -> Result<Self> {
        Self::build(samples, theta, loss, false)
    }

    fn build(
        samples: &SampleMatrix,
        theta: &[f64],
        loss: &LossModel,
        with_derivs: bool,
    ) -> Result<Self> {
        let u = samples.project(theta)?;
        let losses = u.iter().map(|&x| loss.eval(x)).collect();
        let loss_derivs = with_derivs.then(|| u.iter().map(|&x| loss.deriv(x)).collect());
        Ok(Self {
            losses,
            loss_derivs,
            theta: theta.to_vec(),
        })
    }
}

/// `⌊nβ⌋`, snapping products within rounding error of an integer so that
/// e.g. `10 × 0.2` counts two tail observations.
pub fn tail_count(n: usize, beta: f64) -> usize {
    tail_budget(n, beta).floor().max(0.0) as usize
}

/// `nβ`, snapped to the nearest integer when within rounding error of it.
pub(crate) fn tail_budget(n: usize, beta: f64) -> f64 {
    let x = n as f64 * beta;
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.max(1.0) {
        r
    } else {
        x
    }
}

/// The `k`-th smallest value (1-based).
pub fn order_statistic(values: &[f64], k: usize) -> Result<f64> {
    if k == 0 || k > values.len() {
        return Err(Error::IndexOutOfRange { k, n: values.len() });
    }
    Ok(sorted(values)[k - 1])
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    v
}

fn check_losses(losses: &[f64], beta: f64) -> Result<()> {
    if losses.is_empty() {
        return Err(Error::EmptySample);
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidInput(format!(
            "tail probability must lie in (0, 1), got {beta}"
        )));
    }
    if losses.iter().any(|l| !l.is_finite()) {
        return Err(Error::InvalidInput("losses must be finite".into()));
    }
    Ok(())
}

/// Index (1-based, ascending) of the VaR order statistic, `⌈n(1−β)⌉ = n − ⌊nβ⌋`.
fn var_index(n: usize, beta: f64) -> Result<usize> {
    let k = n.saturating_sub(tail_count(n, beta));
    if k == 0 {
        return Err(Error::IndexOutOfRange { k, n });
    }
    Ok(k)
}

fn var_of_sorted(sorted: &[f64], beta: f64) -> Result<f64> {
    Ok(sorted[var_index(sorted.len(), beta)? - 1])
}

/// Sample-average VaR: the `⌈n(1−β)⌉`-th order statistic.
pub fn sa_var(losses: &[f64], beta: f64) -> Result<f64> {
    check_losses(losses, beta)?;
    var_of_sorted(&sorted(losses), beta)
}

/// Sample-average CVaR: `v̂ + (nβ)⁻¹ Σ (L_i − v̂)⁺`.
pub fn sa_cvar(losses: &[f64], beta: f64) -> Result<f64> {
    let var = sa_var(losses, beta)?;
    Ok(cvar_given_var(losses, beta, var))
}

pub(crate) fn cvar_given_var(losses: &[f64], beta: f64, var: f64) -> f64 {
    let excess: f64 = losses.iter().map(|&l| (l - var).max(0.0)).sum();
    var + excess / (losses.len() as f64 * beta)
}

/// VaR and CVaR together, sorting once.
pub fn sa_var_cvar(losses: &[f64], beta: f64) -> Result<(f64, f64)> {
    let var = sa_var(losses, beta)?;
    Ok((var, cvar_given_var(losses, beta, var)))
}

/// Sample-average estimate of `∇_θ C_β(θ)`.
///
/// Observations strictly above `v̂` enter with weight one. Observations tied
/// at `v̂` share the remaining weight `nβ − #{L_i > v̂}` equally, so the total
/// tail weight is exactly `nβ`. This is the derivative in θ of [`sa_cvar`]
/// itself, and for distinct losses with integral `nβ` it reduces to the mean
/// of `ℓ′(θᵀX_i)·X_i` over the top `nβ` observations.
pub fn sa_cvar_gradient(
    samples: &SampleMatrix,
    theta: &[f64],
    loss: &LossModel,
    beta: f64,
) -> Result<Vec<f64>> {
    let ls = LossSample::compute(samples, theta, loss)?;
    let var = sa_var(&ls.losses, beta)?;
    Ok(gradient_given_var(samples, &ls, beta, var))
}

pub(crate) fn gradient_given_var(
    samples: &SampleMatrix,
    ls: &LossSample,
    beta: f64,
    var: f64,
) -> Vec<f64> {
    let n = ls.losses.len();
    let d = samples.ncols();
    let derivs = ls
        .loss_derivs
        .as_deref()
        .expect("gradient needs loss derivatives");
    let above = ls.losses.iter().filter(|&&l| l > var).count();
    let tied = ls.losses.iter().filter(|&&l| l == var).count();
    let budget = n as f64 * beta;
    let tie_weight = if tied > 0 {
        ((budget - above as f64) / tied as f64).max(0.0)
    } else {
        0.0
    };
    let mut grad = vec![0.0; d];
    for ((row, &l), &dl) in samples.rows().zip(&ls.losses).zip(derivs) {
        let w = if l > var {
            1.0
        } else if l == var {
            tie_weight
        } else {
            continue;
        };
        for (g, &x) in grad.iter_mut().zip(row) {
            *g += w * dl * x;
        }
    }
    grad.iter_mut().for_each(|g| *g /= budget);
    grad
}

/// Portfolio CVaR `C_β(θ)` and its gradient from one sample.
pub fn sa_cvar_and_gradient(
    samples: &SampleMatrix,
    theta: &[f64],
    loss: &LossModel,
    beta: f64,
) -> Result<(f64, f64, Vec<f64>)> {
    let ls = LossSample::compute(samples, theta, loss)?;
    let (var, cvar) = sa_var_cvar(&ls.losses, beta)?;
    let grad = gradient_given_var(samples, &ls, beta, var);
    Ok((var, cvar, grad))
}

/// Hill estimate of the extreme value index from the top `k = ⌊nβ₀⌋` losses:
/// `k⁻¹ Σ_{i<k} [log L_{(n−i)} − log L_{(n−k)}]`.
pub fn hill_estimator(losses: &[f64], beta0: f64) -> Result<f64> {
    check_losses(losses, beta0)?;
    let n = losses.len();
    let k = tail_count(n, beta0);
    if k == 0 || k >= n {
        return Err(Error::InsufficientTail {
            n,
            level: beta0,
            count: k,
            required: 1,
        });
    }
    let s = sorted(losses);
    let threshold = s[n - 1 - k];
    if threshold <= 0.0 {
        return Err(Error::NonPositiveTail { value: threshold });
    }
    let log_threshold = threshold.ln();
    let sum: f64 = s[n - k..].iter().map(|l| l.ln() - log_threshold).sum();
    Ok(sum / k as f64)
}

/// Plug-in report at level `β` with gradient.
pub fn sa_report(
    samples: &SampleMatrix,
    theta: &[f64],
    loss: &LossModel,
    beta: f64,
) -> Result<EstimateReport> {
    let (var, cvar, grad) = sa_cvar_and_gradient(samples, theta, loss, beta)?;
    Ok(EstimateReport {
        var,
        cvar,
        gradient: Some(grad),
        xi_hat: None,
        method: Method::SampleAverage,
        levels: TailLevels::single(beta)?,
        n: samples.nrows(),
    })
}
