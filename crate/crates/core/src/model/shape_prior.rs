//! Proper priors for the shape parameters γ, λ and δ.

use rand::Rng;
use rand_distr::{Distribution, Gamma as RGamma};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Gamma as SGamma};

use crate::distributions::Interval;
use crate::error::{Error, Result};
use crate::numeric::special::{ln_norm_pdf, norm_cdf, norm_quantile};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapePrior {
    Uniform { lo: f64, hi: f64 },
    TruncatedNormal { mean: f64, sd: f64, lo: f64, hi: f64 },
    /// Shape/rate parameterisation.
    Gamma { shape: f64, rate: f64 },
    PointMass { at: f64 },
}

impl ShapePrior {
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        let p = ShapePrior::Uniform { lo, hi };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Configuration(m));
        match *self {
            ShapePrior::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return bad(format!("uniform prior needs finite lo < hi, got ({lo}, {hi})"));
                }
            }
            ShapePrior::TruncatedNormal { mean, sd, lo, hi } => {
                if !(mean.is_finite() && sd > 0.0 && sd.is_finite()) || lo.is_nan() || hi.is_nan() || lo >= hi {
                    return bad(format!(
                        "truncated normal needs finite mean, sd > 0 and lo < hi, got mean={mean} sd={sd} ({lo}, {hi})"
                    ));
                }
                if self.mass() <= 0.0 {
                    return bad("truncated normal has no mass on its support".into());
                }
            }
            ShapePrior::Gamma { shape, rate } => {
                if !(shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite()) {
                    return bad(format!("gamma prior needs shape, rate > 0, got {shape}, {rate}"));
                }
            }
            ShapePrior::PointMass { at } => {
                if !at.is_finite() {
                    return bad(format!("point mass at non-finite {at}"));
                }
            }
        }
        Ok(())
    }

    pub fn point_mass(&self) -> Option<f64> {
        match *self {
            ShapePrior::PointMass { at } => Some(at),
            _ => None,
        }
    }

    /// Closure endpoints of the support (degenerate for a point mass).
    pub fn support(&self) -> (f64, f64) {
        match *self {
            ShapePrior::Uniform { lo, hi } | ShapePrior::TruncatedNormal { lo, hi, .. } => (lo, hi),
            ShapePrior::Gamma { .. } => (0.0, f64::INFINITY),
            ShapePrior::PointMass { at } => (at, at),
        }
    }

    /// Checks that the prior lives inside the open parameter domain.
    pub fn check_within(&self, domain: Interval, what: &str) -> Result<()> {
        self.validate()?;
        let ok = match self.point_mass() {
            Some(at) => domain.contains(at),
            None => {
                let (lo, hi) = self.support();
                lo >= domain.lo && hi <= domain.hi
            }
        };
        if ok {
            Ok(())
        } else {
            let (lo, hi) = self.support();
            Err(Error::Domain(format!(
                "{what} prior support [{lo}, {hi}] is not inside the parameter domain {domain}"
            )))
        }
    }

    fn mass(&self) -> f64 {
        match *self {
            ShapePrior::TruncatedNormal { mean, sd, lo, hi } => {
                norm_cdf((hi - mean) / sd) - norm_cdf((lo - mean) / sd)
            }
            _ => 1.0,
        }
    }

    /// Log density; a point mass has none.
    pub fn ln_pdf(&self, x: f64) -> Result<f64> {
        Ok(match *self {
            ShapePrior::Uniform { lo, hi } => {
                if x > lo && x < hi {
                    -(hi - lo).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            ShapePrior::TruncatedNormal { mean, sd, lo, hi } => {
                if x > lo && x < hi {
                    ln_norm_pdf((x - mean) / sd) - sd.ln() - self.mass().ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            ShapePrior::Gamma { shape, rate } => {
                if x > 0.0 {
                    gamma_dist(shape, rate)?.ln_pdf(x)
                } else {
                    f64::NEG_INFINITY
                }
            }
            ShapePrior::PointMass { at } => {
                return Err(Error::Domain(format!("point mass at {at} has no density")))
            }
        })
    }

    pub fn pdf(&self, x: f64) -> Result<f64> {
        self.ln_pdf(x).map(f64::exp)
    }

    /// Inverse CDF on `(0, 1)`.
    pub fn quantile(&self, w: f64) -> Result<f64> {
        if !(w > 0.0 && w < 1.0) {
            return Err(Error::Domain(format!("quantile level {w} outside (0, 1)")));
        }
        Ok(match *self {
            ShapePrior::Uniform { lo, hi } => lo + w * (hi - lo),
            ShapePrior::TruncatedNormal { mean, sd, lo, hi } => {
                let fl = norm_cdf((lo - mean) / sd);
                let fh = norm_cdf((hi - mean) / sd);
                (mean + sd * norm_quantile(fl + w * (fh - fl))).clamp(lo, hi)
            }
            ShapePrior::Gamma { shape, rate } => gamma_dist(shape, rate)?.inverse_cdf(w),
            ShapePrior::PointMass { at } => at,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        Ok(match *self {
            ShapePrior::Gamma { shape, rate } => RGamma::new(shape, 1.0 / rate)
                .map_err(|e| Error::Configuration(e.to_string()))?
                .sample(rng),
            ShapePrior::PointMass { at } => at,
            _ => {
                let w: f64 = rng.random();
                self.quantile(w.max(f64::MIN_POSITIVE))?
            }
        })
    }
}

fn gamma_dist(shape: f64, rate: f64) -> Result<SGamma> {
    SGamma::new(shape, rate).map_err(|e| Error::Configuration(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::quad::{integrate, Tolerance};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn priors() -> Vec<ShapePrior> {
        vec![
            ShapePrior::Uniform { lo: -1.0, hi: 1.0 },
            ShapePrior::TruncatedNormal { mean: 0.3, sd: 0.5, lo: -1.0, hi: 1.0 },
            ShapePrior::TruncatedNormal { mean: 0.0, sd: 2.0, lo: f64::NEG_INFINITY, hi: f64::INFINITY },
            ShapePrior::Gamma { shape: 2.0, rate: 1.0 },
            ShapePrior::Gamma { shape: 0.7, rate: 3.0 },
        ]
    }

    #[test]
    fn densities_normalise() {
        for p in priors() {
            let (lo, hi) = p.support();
            let tol = Tolerance::new(1e-12, 1e-11);
            let r = integrate(|x| p.pdf(x).unwrap(), lo, hi, &[], tol).unwrap();
            assert!((r.value - 1.0).abs() < 1e-8, "{p:?}: {}", r.value);
        }
    }

    #[test]
    fn quantile_inverts_cumulative_mass() {
        for p in priors() {
            let (lo, _) = p.support();
            for w in [0.05, 0.3, 0.5, 0.9] {
                let x = p.quantile(w).unwrap();
                let tol = Tolerance::new(1e-13, 1e-11);
                let mass = integrate(|t| p.pdf(t).unwrap(), lo, x, &[], tol).unwrap().value;
                assert!((mass - w).abs() < 1e-7, "{p:?} w={w}: {mass}");
            }
        }
    }

    #[test]
    fn sampler_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = ShapePrior::Gamma { shape: 2.0, rate: 1.0 };
        let n = 40_000;
        let m: f64 = (0..n).map(|_| p.sample(&mut rng).unwrap()).sum::<f64>() / n as f64;
        // mean 2, sd √2
        assert!((m - 2.0).abs() < 3.0 * (2.0f64 / n as f64).sqrt());
    }

    #[test]
    fn support_checks() {
        let eps = Interval::new(-1.0, 1.0).unwrap();
        assert!(ShapePrior::Uniform { lo: -1.0, hi: 1.0 }.check_within(eps, "γ").is_ok());
        assert!(ShapePrior::Uniform { lo: -1.0, hi: 1.5 }.check_within(eps, "γ").is_err());
        assert!(ShapePrior::Gamma { shape: 2.0, rate: 1.0 }.check_within(eps, "γ").is_err());
        assert!(ShapePrior::Gamma { shape: 2.0, rate: 1.0 }.check_within(Interval::POSITIVE, "γ").is_ok());
        assert!(ShapePrior::PointMass { at: 1.0 }.check_within(eps, "γ").is_err());
        assert!(ShapePrior::PointMass { at: 0.0 }.check_within(eps, "γ").is_ok());
        assert!(ShapePrior::PointMass { at: 0.0 }.pdf(0.0).is_err());
        assert!(ShapePrior::Uniform { lo: 1.0, hi: 1.0 }.validate().is_err());
    }

    #[test]
    fn json_shape() {
        let p: ShapePrior = serde_json::from_str(r#"{"kind":"gamma","shape":2,"rate":1}"#).unwrap();
        assert_eq!(p, ShapePrior::Gamma { shape: 2.0, rate: 1.0 });
        assert!(serde_json::from_str::<ShapePrior>(r#"{"kind":"gamma","shape":2,"rat":1}"#).is_err());
    }
}
