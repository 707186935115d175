//! Heavy-tailed random vectors: independent Pareto marginals and a t-copula
//! with Pareto marginals, together with the exact Pareto density and
//! closed-form Pareto VaR/CVaR used as ground truth.
//!
//! Pareto(α, σ) here always means survival `P(X > x) = (x/σ)^{−α}` for
//! `x ≥ σ`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Pareto, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, StreamRng};
use crate::sample::SampleMatrix;

/// Marginal tail indices `α₁..α_d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TailIndexVector(Vec<f64>);

impl TailIndexVector {
    pub fn new(alphas: Vec<f64>) -> Result<Self> {
        if alphas.is_empty() {
            return Err(Error::InvalidInput("tail index vector is empty".into()));
        }
        if let Some(a) = alphas.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
            return Err(Error::InvalidInput(format!(
                "tail indices must be positive and finite, got {a}"
            )));
        }
        Ok(Self(alphas))
    }

    /// `d` copies of the same index.
    pub fn uniform(alpha: f64, d: usize) -> Result<Self> {
        Self::new(vec![alpha; d])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Extreme value index of the heaviest marginal, `ξ = 1/min_k α_k`.
    pub fn xi(&self) -> f64 {
        1.0 / self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

impl TryFrom<Vec<f64>> for TailIndexVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<TailIndexVector> for Vec<f64> {
    fn from(t: TailIndexVector) -> Self {
        t.0
    }
}

/// Draws rows of a random vector from a seeded stream.
pub trait Sampler: Sync {
    fn dim(&self) -> usize;

    fn sample_with(&self, n: usize, rng: &mut StreamRng) -> SampleMatrix;
}

/// Exact joint density, required by importance sampling.
pub trait JointDensity: Sync {
    fn tail_indices(&self) -> &TailIndexVector;

    /// Natural log of the joint density; `-inf` outside the support.
    fn log_joint_pdf(&self, x: &[f64]) -> f64;

    fn joint_pdf(&self, x: &[f64]) -> f64 {
        self.log_joint_pdf(x).exp()
    }
}

/// Independent Pareto marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct ParetoModel {
    alphas: TailIndexVector,
    scale: Vec<f64>,
}

impl ParetoModel {
    pub fn new(alphas: TailIndexVector, scale: Vec<f64>) -> Result<Self> {
        check_scale(&scale, alphas.len())?;
        Ok(Self { alphas, scale })
    }

    /// Unit-scale model.
    pub fn unit(alphas: TailIndexVector) -> Self {
        let d = alphas.len();
        Self {
            alphas,
            scale: vec![1.0; d],
        }
    }

    /// `d` i.i.d. unit-scale Pareto(α) components.
    pub fn iid(alpha: f64, d: usize) -> Result<Self> {
        Ok(Self::unit(TailIndexVector::uniform(alpha, d)?))
    }

    pub fn alphas(&self) -> &TailIndexVector {
        &self.alphas
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }
}

impl Sampler for ParetoModel {
    fn dim(&self) -> usize {
        self.alphas.len()
    }

    fn sample_with(&self, n: usize, rng: &mut StreamRng) -> SampleMatrix {
        let marginals: Vec<Pareto<f64>> = self
            .alphas
            .as_slice()
            .iter()
            .zip(&self.scale)
            .map(|(&a, &s)| Pareto::new(s, a).expect("validated parameters"))
            .collect();
        let d = marginals.len();
        let mut data = Vec::with_capacity(n * d);
        for _ in 0..n {
            data.extend(marginals.iter().map(|m| m.sample(rng)));
        }
        SampleMatrix::from_generated(n, d, data)
    }
}

impl JointDensity for ParetoModel {
    fn tail_indices(&self) -> &TailIndexVector {
        &self.alphas
    }

    fn log_joint_pdf(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.scale.len());
        let mut acc = 0.0;
        for ((&xk, &a), &s) in x.iter().zip(self.alphas.as_slice()).zip(&self.scale) {
            if !(xk >= s) {
                return f64::NEG_INFINITY;
            }
            acc += a.ln() + a * s.ln() - (a + 1.0) * xk.ln();
        }
        acc
    }
}

/// Samples an `n × d` matrix of independent Pareto rows.
pub fn sample_pareto_matrix(model: &ParetoModel, n: usize, seed: u64) -> Result<SampleMatrix> {
    if n == 0 {
        return Err(Error::InvalidInput("sample size must be at least 1".into()));
    }
    Ok(model.sample_with(n, &mut rng::seeded(seed)))
}

/// Pareto density product `Π_k α_k σ_k^{α_k} x_k^{−(α_k+1)}`; zero off the support.
pub fn joint_pdf(model: &ParetoModel, x: &[f64]) -> f64 {
    model.joint_pdf(x)
}

/// Dependence through a Student-t copula, Pareto marginals.
#[derive(Debug, Clone)]
pub struct TCopulaParetoModel {
    correlation: DMatrix<f64>,
    cholesky_factor: DMatrix<f64>,
    dof: f64,
    alphas: TailIndexVector,
    scale: Vec<f64>,
}

impl TCopulaParetoModel {
    pub const DEFAULT_DOF: f64 = 4.0;

    pub fn new(
        correlation: DMatrix<f64>,
        dof: f64,
        alphas: TailIndexVector,
        scale: Vec<f64>,
    ) -> Result<Self> {
        let d = alphas.len();
        check_scale(&scale, d)?;
        if !(dof > 0.0 && dof.is_finite()) {
            return Err(Error::InvalidInput(format!("copula dof must be positive, got {dof}")));
        }
        if correlation.nrows() != d || correlation.ncols() != d {
            return Err(Error::InvalidInput(format!(
                "correlation is {}x{}, expected {d}x{d}",
                correlation.nrows(),
                correlation.ncols()
            )));
        }
        for i in 0..d {
            if (correlation[(i, i)] - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidInput(format!(
                    "correlation diagonal entry {i} is {}, expected 1",
                    correlation[(i, i)]
                )));
            }
            for j in 0..i {
                if (correlation[(i, j)] - correlation[(j, i)]).abs() > 1e-12 {
                    return Err(Error::InvalidInput(format!(
                        "correlation is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let cholesky_factor = correlation
            .clone()
            .cholesky()
            .ok_or(Error::NotPositiveDefinite)?
            .l();
        Ok(Self {
            correlation,
            cholesky_factor,
            dof,
            alphas,
            scale,
        })
    }

    /// Equicorrelated copula: unit diagonal, `rho` everywhere else.
    pub fn equicorrelated(
        rho: f64,
        dof: f64,
        alphas: TailIndexVector,
        scale: Vec<f64>,
    ) -> Result<Self> {
        let d = alphas.len();
        let corr = DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { rho });
        Self::new(corr, dof, alphas, scale)
    }

    pub fn correlation(&self) -> &DMatrix<f64> {
        &self.correlation
    }

    pub fn dof(&self) -> f64 {
        self.dof
    }

    pub fn alphas(&self) -> &TailIndexVector {
        &self.alphas
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }
}

impl Sampler for TCopulaParetoModel {
    fn dim(&self) -> usize {
        self.alphas.len()
    }

    fn sample_with(&self, n: usize, rng: &mut StreamRng) -> SampleMatrix {
        let d = self.dim();
        let chi = ChiSquared::new(self.dof).expect("validated dof");
        let mut data = Vec::with_capacity(n * d);
        let mut g = DVector::<f64>::zeros(d);
        for _ in 0..n {
            for gk in g.iter_mut() {
                *gk = rng.sample(StandardNormal);
            }
            let z = &self.cholesky_factor * &g;
            let w = (chi.sample(rng) / self.dof).sqrt();
            for k in 0..d {
                // survival of the t marginal drives the inverse Pareto map, which
                // keeps precision deep in the upper tail
                let tail = student_t_sf(z[k] / w, self.dof);
                let a = self.alphas.as_slice()[k];
                data.push(self.scale[k] * tail.powf(-1.0 / a));
            }
        }
        SampleMatrix::from_generated(n, d, data)
    }
}

/// Samples an `n × d` matrix from the t-copula model.
pub fn sample_t_copula_matrix(
    model: &TCopulaParetoModel,
    n: usize,
    seed: u64,
) -> Result<SampleMatrix> {
    if n == 0 {
        return Err(Error::InvalidInput("sample size must be at least 1".into()));
    }
    Ok(model.sample_with(n, &mut rng::seeded(seed)))
}

/// Survival function of the standard Student-t with `dof` degrees of freedom,
/// via the regularized incomplete beta function.
pub fn student_t_sf(t: f64, dof: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return if t > 0.0 { 0.0 } else { 1.0 };
    }
    let x = dof / (dof + t * t);
    let half = 0.5 * statrs::function::beta::beta_reg(0.5 * dof, 0.5, x);
    if t >= 0.0 {
        half
    } else {
        1.0 - half
    }
}

/// Unit-scale Pareto VaR at tail probability `beta`: `β^{−1/α}`.
pub fn pareto_var_closed_form(alpha: f64, beta: f64) -> Result<f64> {
    check_alpha_beta(alpha, beta)?;
    Ok(beta.powf(-1.0 / alpha))
}

/// Unit-scale Pareto CVaR at tail probability `beta`: `(α/(α−1))·β^{−1/α}`.
pub fn pareto_cvar_closed_form(alpha: f64, beta: f64) -> Result<f64> {
    check_alpha_beta(alpha, beta)?;
    if alpha <= 1.0 {
        return Err(Error::InfiniteCvar { alpha });
    }
    Ok(alpha / (alpha - 1.0) * beta.powf(-1.0 / alpha))
}

fn check_alpha_beta(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidInput(format!("tail index must be positive, got {alpha}")));
    }
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "tail probability must lie in (0, 1], got {beta}"
        )));
    }
    Ok(())
}

fn check_scale(scale: &[f64], d: usize) -> Result<()> {
    if scale.len() != d {
        return Err(Error::InvalidInput(format!(
            "scale has {} entries, expected {d}",
            scale.len()
        )));
    }
    if let Some(s) = scale.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
        return Err(Error::InvalidInput(format!("scale must be positive, got {s}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn tail_index_vector_validation() {
        assert!(TailIndexVector::new(vec![]).is_err());
        assert!(TailIndexVector::new(vec![3.0, 0.0]).is_err());
        assert!(TailIndexVector::new(vec![3.0, f64::INFINITY]).is_err());
        let t = TailIndexVector::new(vec![4.0, 2.0, 3.0]).unwrap();
        assert_relative_eq!(t.xi(), 0.5);
    }

    #[test]
    fn pdf_values() {
        let m1 = ParetoModel::iid(3.0, 1).unwrap();
        assert_relative_eq!(joint_pdf(&m1, &[1.0]), 3.0, max_relative = 1e-14);
        let m2 = ParetoModel::iid(3.0, 2).unwrap();
        assert_relative_eq!(joint_pdf(&m2, &[1.0, 1.0]), 9.0, max_relative = 1e-14);
        assert_eq!(joint_pdf(&m2, &[0.99, 5.0]), 0.0);
        assert_eq!(joint_pdf(&m2, &[5.0, -1.0]), 0.0);
        let scaled = ParetoModel::new(TailIndexVector::uniform(2.0, 1).unwrap(), vec![2.0]).unwrap();
        // α σ^α x^{-(α+1)} = 2·4·3^{-3}
        assert_relative_eq!(joint_pdf(&scaled, &[3.0]), 8.0 / 27.0, max_relative = 1e-14);
        assert_eq!(joint_pdf(&scaled, &[1.5]), 0.0);
    }

    #[test]
    fn closed_forms() {
        assert_relative_eq!(pareto_var_closed_form(3.0, 0.01).unwrap(), 4.641588833612779, max_relative = 1e-14);
        assert_eq!(pareto_var_closed_form(3.0, 1.0).unwrap(), 1.0);
        assert_relative_eq!(pareto_var_closed_form(1.0, 0.1).unwrap(), 10.0, max_relative = 1e-14);
        assert_relative_eq!(pareto_cvar_closed_form(3.0, 0.01).unwrap(), 6.962383250419168, max_relative = 1e-14);
        assert_relative_eq!(pareto_cvar_closed_form(2.0, 0.25).unwrap(), 4.0, max_relative = 1e-14);
        assert!(matches!(
            pareto_cvar_closed_form(1.0, 0.3),
            Err(Error::InfiniteCvar { .. })
        ));
        assert!(pareto_var_closed_form(3.0, 0.0).is_err());
    }

    #[test]
    fn pareto_cvar_matches_quadrature() {
        // CVaR = (1/β)∫_v^∞ x f(x) dx; substitute x = v/u, u ∈ (0, 1], which
        // turns the integrand into α v^{1−α} u^{α−2} for unit scale.
        for &(alpha, beta) in &[(3.0, 0.01), (2.5, 0.2), (6.0, 0.05)] {
            let v = pareto_var_closed_form(alpha, beta).unwrap();
            let m = 200_000;
            let h = 1.0 / m as f64;
            let integrand = |u: f64| alpha * v.powf(1.0 - alpha) * u.powf(alpha - 2.0);
            // all α > 2 here, so the integrand vanishes at u = 0
            let mut s = integrand(1.0);
            for i in 1..m {
                let u = i as f64 * h;
                s += if i % 2 == 1 { 4.0 } else { 2.0 } * integrand(u);
            }
            let quad = s * h / 3.0 / beta;
            assert_relative_eq!(quad, pareto_cvar_closed_form(alpha, beta).unwrap(), max_relative = 1e-6);
        }
    }

    #[test]
    fn student_t_sf_reference_values() {
        assert_relative_eq!(student_t_sf(0.0, 4.0), 0.5, max_relative = 1e-14);
        // dof = 1 is Cauchy: sf(t) = 1/2 − atan(t)/π
        for &t in &[-3.0, -0.5, 0.7, 2.0, 50.0] {
            let exact = 0.5 - f64::atan(t) / std::f64::consts::PI;
            assert_relative_eq!(student_t_sf(t, 1.0), exact, max_relative = 1e-12);
        }
        // dof = 2: sf(t) = 1/2 − t / (2 sqrt(2 + t²))
        for &t in &[-4.0f64, 0.3, 1.0, 10.0] {
            let exact = 0.5 - t / (2.0 * (2.0 + t * t).sqrt());
            assert_relative_eq!(student_t_sf(t, 2.0), exact, max_relative = 1e-12);
        }
        assert_eq!(student_t_sf(f64::INFINITY, 4.0), 0.0);
    }

    #[test]
    fn copula_rejects_bad_correlation() {
        let alphas = TailIndexVector::uniform(3.0, 2).unwrap();
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 1.2, 1.2, 1.0]);
        assert!(matches!(
            TCopulaParetoModel::new(bad, 4.0, alphas.clone(), vec![1.0; 2]),
            Err(Error::NotPositiveDefinite)
        ));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.3, 1.0]);
        assert!(TCopulaParetoModel::new(asym, 4.0, alphas.clone(), vec![1.0; 2]).is_err());
        let diag = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        assert!(TCopulaParetoModel::new(diag, 4.0, alphas.clone(), vec![1.0; 2]).is_err());
        assert!(TCopulaParetoModel::equicorrelated(0.5, 0.0, alphas, vec![1.0; 2]).is_err());
    }

    #[test]
    fn zero_sample_size_rejected() {
        let m = ParetoModel::iid(3.0, 2).unwrap();
        assert!(sample_pareto_matrix(&m, 0, 1).is_err());
    }
}
