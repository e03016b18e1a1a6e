//! Priors on the scale parameters σ₀, σ₁..σ_r.

use serde::{Deserialize, Serialize};

use super::hyper::Hyper;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorStructure {
    /// `π(σᵢ) ∝ σᵢ^{-(2aᵢ+1)} exp(-bᵢ/σᵢ²)` for `i = 0..r`.
    PowerExp { a: Vec<Hyper>, b: Vec<Hyper> },
    /// `π(σ₀) ∝ σ₀^{-(2a₀+1)}` and half-Cauchy `π(σᵢ) ∝ (1 + σᵢ²/sᵢ²)^{-1}`.
    HalfCauchy { a0: Hyper, s: Vec<f64> },
}

impl PriorStructure {
    /// `a₀ = 0`, `a₁..a_r = -1/2`, `b = 0`.
    pub fn standard_diffuse(r: usize) -> Self {
        let mut a = vec![Hyper::new(-1, 2); r + 1];
        a[0] = Hyper::ZERO;
        PriorStructure::PowerExp {
            a,
            b: vec![Hyper::ZERO; r + 1],
        }
    }

    pub fn power_exp(a: Vec<Hyper>, b: Vec<Hyper>) -> Result<Self> {
        let p = PriorStructure::PowerExp { a, b };
        p.validate(p.r())?;
        Ok(p)
    }

    pub fn half_cauchy(a0: Hyper, s: Vec<f64>) -> Result<Self> {
        let p = PriorStructure::HalfCauchy { a0, s };
        p.validate(p.r())?;
        Ok(p)
    }

    /// Number of random-effect scales the prior is written for.
    pub fn r(&self) -> usize {
        match self {
            PriorStructure::PowerExp { a, .. } => a.len().saturating_sub(1),
            PriorStructure::HalfCauchy { s, .. } => s.len(),
        }
    }

    pub fn validate(&self, r: usize) -> Result<()> {
        match self {
            PriorStructure::PowerExp { a, b } => {
                if a.len() != r + 1 || b.len() != r + 1 {
                    return Err(Error::Configuration(format!(
                        "power-exp prior needs {} entries in a and b (a₀..a_r), got {} and {}",
                        r + 1,
                        a.len(),
                        b.len()
                    )));
                }
                if let Some((i, bi)) = b.iter().enumerate().find(|(_, v)| **v < Hyper::ZERO) {
                    return Err(Error::Configuration(format!("b_{i} = {bi} is negative")));
                }
            }
            PriorStructure::HalfCauchy { s, .. } => {
                if s.len() != r {
                    return Err(Error::Configuration(format!(
                        "half-Cauchy prior needs {r} scales s₁..s_r, got {}",
                        s.len()
                    )));
                }
                if let Some((i, si)) = s.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
                    return Err(Error::Configuration(format!("s_{} = {si} must be positive", i + 1)));
                }
            }
        }
        Ok(())
    }

    pub fn a0(&self) -> Hyper {
        match self {
            PriorStructure::PowerExp { a, .. } => a[0],
            PriorStructure::HalfCauchy { a0, .. } => *a0,
        }
    }

    pub fn b0(&self) -> Hyper {
        match self {
            PriorStructure::PowerExp { b, .. } => b[0],
            PriorStructure::HalfCauchy { .. } => Hyper::ZERO,
        }
    }

    /// Unnormalised log prior kernel of `σᵢ` (`i = 0` is the residual scale).
    pub fn ln_kernel(&self, i: usize, sigma: f64) -> f64 {
        if sigma <= 0.0 {
            return f64::NEG_INFINITY;
        }
        match self {
            PriorStructure::PowerExp { a, b } => {
                let (ai, bi) = (a[i].to_f64(), b[i].to_f64());
                let tail = if bi == 0.0 { 0.0 } else { bi / (sigma * sigma) };
                -(2.0 * ai + 1.0) * sigma.ln() - tail
            }
            PriorStructure::HalfCauchy { a0, s } => {
                if i == 0 {
                    -(2.0 * a0.to_f64() + 1.0) * sigma.ln()
                } else {
                    let z = sigma / s[i - 1];
                    -(z * z).ln_1p()
                }
            }
        }
    }
}
