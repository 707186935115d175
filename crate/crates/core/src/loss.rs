//! Scalar loss functions applied to portfolio values `u = θᵀx`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Loss `ℓ(u)` with derivative `ℓ′(u)` growing like `c₁·u^ρ` in the tail.
///
/// Serialized as its textual form: `linear`, `squared` or `power:c1,rho,u0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum LossModel {
    /// `ℓ(u) = u`, `ρ = 0`.
    Linear,
    /// `ℓ(u) = u²`, `ρ = 1`.
    Squared,
    /// `ℓ′(u) = c₁·u^ρ` for `u ≥ u₀`, continued linearly with slope
    /// `c₁·u₀^ρ` below `u₀` so that `ℓ` is C¹.
    Power { c1: f64, rho: f64, u0: f64 },
}

impl LossModel {
    pub fn power(c1: f64, rho: f64, u0: f64) -> Result<Self> {
        if !(c1 > 0.0 && c1.is_finite()) {
            return Err(Error::InvalidInput(format!("power loss needs c1 > 0, got {c1}")));
        }
        if !(rho >= 0.0 && rho.is_finite()) {
            return Err(Error::InvalidInput(format!("power loss needs rho >= 0, got {rho}")));
        }
        if !(u0 > 0.0 && u0.is_finite()) {
            return Err(Error::InvalidInput(format!("power loss needs u0 > 0, got {u0}")));
        }
        Ok(LossModel::Power { c1, rho, u0 })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LossModel::Power { c1, rho, u0 } => Self::power(c1, rho, u0).map(|_| ()),
            _ => Ok(()),
        }
    }

    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            LossModel::Linear => u,
            LossModel::Squared => u * u,
            LossModel::Power { c1, rho, u0 } => {
                let at_threshold = c1 * u0.powf(rho + 1.0) / (rho + 1.0);
                if u >= u0 {
                    c1 * u.powf(rho + 1.0) / (rho + 1.0)
                } else {
                    at_threshold + c1 * u0.powf(rho) * (u - u0)
                }
            }
        }
    }

    pub fn deriv(&self, u: f64) -> f64 {
        match *self {
            LossModel::Linear => 1.0,
            LossModel::Squared => 2.0 * u,
            LossModel::Power { c1, rho, u0 } => c1 * u.max(u0).powf(rho),
        }
    }

    /// Tail growth exponent `ρ` of the derivative.
    pub fn rho(&self) -> f64 {
        match *self {
            LossModel::Linear => 0.0,
            LossModel::Squared => 1.0,
            LossModel::Power { rho, .. } => rho,
        }
    }

    pub fn c1(&self) -> f64 {
        match *self {
            LossModel::Linear => 1.0,
            LossModel::Squared => 2.0,
            LossModel::Power { c1, .. } => c1,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LossModel::Linear => "linear",
            LossModel::Squared => "squared",
            LossModel::Power { .. } => "power",
        }
    }

    /// Parses `linear`, `squared` or `power:c1,rho,u0`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "linear" => return Ok(LossModel::Linear),
            "squared" => return Ok(LossModel::Squared),
            _ => {}
        }
        let params = s
            .strip_prefix("power:")
            .ok_or_else(|| Error::InvalidInput(format!("unknown loss {s:?}")))?;
        let vals = params
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidInput(format!("bad power-loss parameter {p:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        match vals[..] {
            [c1, rho, u0] => Self::power(c1, rho, u0),
            _ => Err(Error::InvalidInput(
                "power loss takes three parameters: c1,rho,u0".into(),
            )),
        }
    }
}

impl std::fmt::Display for LossModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LossModel::Power { c1, rho, u0 } => write!(f, "power:{c1},{rho},{u0}"),
            other => f.write_str(other.name()),
        }
    }
}

impl TryFrom<String> for LossModel {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        Self::parse(&s)
    }
}

impl From<LossModel> for String {
    fn from(l: LossModel) -> Self {
        l.to_string()
    }
}
