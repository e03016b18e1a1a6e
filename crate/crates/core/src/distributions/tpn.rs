//! Two-piece normal `TPN(μ, σ, γ)`: scale `σ·b(γ)` left of the mode and
//! `σ·a(γ)` right of it, joined continuously at `μ`.

use rand::Rng;
use rand_distr::StandardNormal;

use super::skew::SkewParameterisation;
use crate::error::{Error, Result};
use crate::numeric::special::{ln_norm_pdf, norm_cdf, norm_pdf};

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("scale σ={sigma} must be positive")))
    }
}

pub fn tpn_pdf(u: f64, mu: f64, sigma: f64, gamma: f64, param: &SkewParameterisation) -> Result<f64> {
    check_sigma(sigma)?;
    let (a, b) = param.scales(gamma)?;
    let c = if u < mu { b } else { a };
    Ok(2.0 / (sigma * (a + b)) * norm_pdf((u - mu) / (sigma * c)))
}

pub fn tpn_ln_pdf(
    u: f64,
    mu: f64,
    sigma: f64,
    gamma: f64,
    param: &SkewParameterisation,
) -> Result<f64> {
    check_sigma(sigma)?;
    let (a, b) = param.scales(gamma)?;
    Ok(tpn_ln_pdf_ab(u, mu, sigma, a, b))
}

#[inline]
pub(crate) fn tpn_ln_pdf_ab(u: f64, mu: f64, sigma: f64, a: f64, b: f64) -> f64 {
    let c = if u < mu { b } else { a };
    std::f64::consts::LN_2 - (sigma * (a + b)).ln() + ln_norm_pdf((u - mu) / (sigma * c))
}

pub fn tpn_cdf(u: f64, mu: f64, sigma: f64, gamma: f64, param: &SkewParameterisation) -> Result<f64> {
    check_sigma(sigma)?;
    let (a, b) = param.scales(gamma)?;
    let h = a + b;
    Ok(if u < mu {
        2.0 * b / h * norm_cdf((u - mu) / (sigma * b))
    } else {
        b / h + 2.0 * a / h * (norm_cdf((u - mu) / (sigma * a)) - 0.5)
    })
}

/// Exact draw: left piece with probability `b/(a+b)`, otherwise right.
pub fn tpn_sample<R: Rng + ?Sized>(
    rng: &mut R,
    mu: f64,
    sigma: f64,
    gamma: f64,
    param: &SkewParameterisation,
) -> Result<f64> {
    check_sigma(sigma)?;
    let (a, b) = param.scales(gamma)?;
    let left: f64 = rng.random();
    let z: f64 = rng.sample::<f64, _>(StandardNormal).abs();
    Ok(if left < b / (a + b) {
        mu - sigma * b * z
    } else {
        mu + sigma * a * z
    })
}
