//! Scale mixtures of normals with covariance `σ²I` and a precision
//! multiplier `τ ~ H(· | δ)`.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use super::skew::Interval;
use crate::error::{Error, Result};
use crate::numeric::quad::{integrate, Tolerance};
use crate::numeric::special::{ln_gamma, LN_SQRT_2PI};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixingDistribution {
    /// `τ ≡ 1`; the mixture is the normal.
    PointMass,
    /// `τ ~ Gamma(δ/2, rate δ/2)`; the mixture is Student-t with δ d.o.f.
    StudentT,
}

impl MixingDistribution {
    pub fn name(&self) -> &'static str {
        match self {
            MixingDistribution::PointMass => "point_mass",
            MixingDistribution::StudentT => "student_t",
        }
    }

    pub fn delta_domain(&self) -> Interval {
        match self {
            MixingDistribution::PointMass => Interval::REAL_LINE,
            MixingDistribution::StudentT => Interval::POSITIVE,
        }
    }

    pub fn check_delta(&self, delta: f64) -> Result<()> {
        if self.delta_domain().contains(delta) {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "δ={delta} outside {} domain {}",
                self.name(),
                self.delta_domain()
            )))
        }
    }

    /// `E[τ^s | δ]`, `+∞` when the moment does not exist.
    pub fn moment(&self, s: f64, delta: f64) -> f64 {
        match self {
            MixingDistribution::PointMass => 1.0,
            MixingDistribution::StudentT => {
                let k = 0.5 * delta;
                if k + s <= 0.0 {
                    f64::INFINITY
                } else {
                    (ln_gamma(k + s) - ln_gamma(k) - s * k.ln()).exp()
                }
            }
        }
    }

    /// Log density of `τ` (not defined for the point mass).
    pub fn ln_density(&self, tau: f64, delta: f64) -> Option<f64> {
        match self {
            MixingDistribution::PointMass => None,
            MixingDistribution::StudentT => {
                if tau <= 0.0 {
                    return Some(f64::NEG_INFINITY);
                }
                let k = 0.5 * delta;
                Some(k * k.ln() - ln_gamma(k) + (k - 1.0) * tau.ln() - k * tau)
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, delta: f64) -> Result<f64> {
        self.check_delta(delta)?;
        Ok(match self {
            MixingDistribution::PointMass => 1.0,
            MixingDistribution::StudentT => {
                let k = 0.5 * delta;
                Gamma::new(k, 1.0 / k)
                    .map_err(|e| Error::Domain(e.to_string()))?
                    .sample(rng)
            }
        })
    }

    /// Quantile of `τ` on the unit interval; `None` for the point mass.
    pub fn quantile(&self, w: f64, delta: f64) -> Option<f64> {
        match self {
            MixingDistribution::PointMass => None,
            MixingDistribution::StudentT => {
                use statrs::distribution::{ContinuousCDF, Gamma as SGamma};
                let k = 0.5 * delta;
                SGamma::new(k, k).ok().map(|g| g.inverse_cdf(w))
            }
        }
    }
}

/// Density of `SMN_q(0, σ²I, δ; H)` at `x`, integrating over `τ` on the log
/// scale. The point-mass member is evaluated directly.
pub fn smn_pdf(x: &[f64], sigma: f64, mixing: MixingDistribution, delta: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Domain(format!("scale σ={sigma} must be positive")));
    }
    mixing.check_delta(delta)?;
    let q = x.len() as f64;
    let r2: f64 = x.iter().map(|v| v * v).sum::<f64>() / (sigma * sigma);
    let ln_kernel = |tau: f64| 0.5 * q * tau.ln() - q * (LN_SQRT_2PI + sigma.ln()) - 0.5 * tau * r2;
    match mixing {
        MixingDistribution::PointMass => Ok(ln_kernel(1.0).exp()),
        MixingDistribution::StudentT => {
            // τ = e^s, dτ = τ ds; the integrand is smooth and decays both ways
            let k = 0.5 * delta;
            let mode = ((k + 0.5 * q) / (k + 0.5 * r2)).ln();
            let res = integrate(
                |s| {
                    let tau = s.exp();
                    (ln_kernel(tau) + mixing.ln_density(tau, delta).unwrap() + s).exp()
                },
                f64::NEG_INFINITY,
                f64::INFINITY,
                &[mode],
                Tolerance::new(1e-14, 1e-10),
            )?;
            Ok(res.value)
        }
    }
}
