//! Transformations of the normal through a density `p` on `[0, 1]`:
//! `s(u) = p[Φ(z) | λ] φ(z) / σ` with `z = (u - μ)/σ`.

use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::skew::Interval;
use crate::error::{Error, Result};
use crate::numeric::special::{ln_gamma, ln_norm_cdf, ln_norm_pdf, norm_cdf, norm_pdf, norm_quantile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FsnFamily {
    /// `p ≡ 1`: the normal itself.
    Uniform,
    /// `p[Φ(z) | λ] = 2Φ(λz)`: Azzalini's skew-normal.
    SkewNormal,
    /// `p = Beta(λ, λ)` on `[0, 1]`, `λ > 0`: symmetric, with tails
    /// heavier (`λ < 1`) or lighter (`λ > 1`) than the normal. Unbounded.
    BetaGenerated,
}

impl FsnFamily {
    pub fn name(&self) -> &'static str {
        match self {
            FsnFamily::Uniform => "uniform",
            FsnFamily::SkewNormal => "skew_normal",
            FsnFamily::BetaGenerated => "beta_generated",
        }
    }

    pub fn lambda_domain(&self) -> Interval {
        match self {
            FsnFamily::BetaGenerated => Interval::POSITIVE,
            _ => Interval::REAL_LINE,
        }
    }

    /// Finite supremum of `p` over `[0,1] × Λ`, when one exists.
    pub fn sup_bound(&self) -> Option<f64> {
        match self {
            FsnFamily::Uniform => Some(1.0),
            FsnFamily::SkewNormal => Some(2.0),
            FsnFamily::BetaGenerated => None,
        }
    }

    pub fn check_lambda(&self, lambda: f64) -> Result<()> {
        let d = self.lambda_domain();
        if d.contains(lambda) {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "λ={lambda} outside {} domain {d}",
                self.name()
            )))
        }
    }

    /// `p(t | λ)` for `t ∈ [0, 1]`.
    pub fn p(&self, t: f64, lambda: f64) -> f64 {
        if !(0.0..=1.0).contains(&t) {
            return 0.0;
        }
        match self {
            FsnFamily::Uniform => 1.0,
            FsnFamily::SkewNormal if lambda == 0.0 => 1.0,
            FsnFamily::SkewNormal => 2.0 * norm_cdf(lambda * norm_quantile(t)),
            FsnFamily::BetaGenerated => {
                if t == 0.0 || t == 1.0 {
                    return if lambda < 1.0 { f64::INFINITY } else if lambda == 1.0 { 1.0 } else { 0.0 };
                }
                ((lambda - 1.0) * (t.ln() + (-t).ln_1p()) - ln_beta_sym(lambda)).exp()
            }
        }
    }

    /// `ln p[Φ(z) | λ]`, evaluated without round-tripping through `Φ`.
    #[inline]
    pub(crate) fn ln_p_at_normal_score(&self, z: f64, lambda: f64) -> f64 {
        match self {
            FsnFamily::Uniform => 0.0,
            FsnFamily::SkewNormal => std::f64::consts::LN_2 + ln_norm_cdf(lambda * z),
            FsnFamily::BetaGenerated => {
                (lambda - 1.0) * (ln_norm_cdf(z) + ln_norm_cdf(-z)) - ln_beta_sym(lambda)
            }
        }
    }
}

/// `ln B(λ, λ)`.
fn ln_beta_sym(lambda: f64) -> f64 {
    2.0 * ln_gamma(lambda) - ln_gamma(2.0 * lambda)
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("scale σ={sigma} must be positive")))
    }
}

pub fn fsn_pdf(u: f64, mu: f64, sigma: f64, lambda: f64, family: FsnFamily) -> Result<f64> {
    check_sigma(sigma)?;
    family.check_lambda(lambda)?;
    let z = (u - mu) / sigma;
    Ok(match family {
        FsnFamily::Uniform => norm_pdf(z) / sigma,
        FsnFamily::SkewNormal => 2.0 * norm_cdf(lambda * z) * norm_pdf(z) / sigma,
        FsnFamily::BetaGenerated => (family.ln_p_at_normal_score(z, lambda) + ln_norm_pdf(z)).exp() / sigma,
    })
}

pub fn fsn_ln_pdf(u: f64, mu: f64, sigma: f64, lambda: f64, family: FsnFamily) -> Result<f64> {
    check_sigma(sigma)?;
    family.check_lambda(lambda)?;
    let z = (u - mu) / sigma;
    Ok(family.ln_p_at_normal_score(z, lambda) + ln_norm_pdf(z) - sigma.ln())
}

pub fn fsn_sample<R: Rng + ?Sized>(
    rng: &mut R,
    mu: f64,
    sigma: f64,
    lambda: f64,
    family: FsnFamily,
) -> Result<f64> {
    check_sigma(sigma)?;
    family.check_lambda(lambda)?;
    let z0: f64 = rng.sample(StandardNormal);
    let z = match family {
        FsnFamily::Uniform => z0,
        FsnFamily::SkewNormal => {
            let delta = lambda / (1.0 + lambda * lambda).sqrt();
            let z1: f64 = rng.sample(StandardNormal);
            delta * z0.abs() + (1.0 - delta * delta).sqrt() * z1
        }
        FsnFamily::BetaGenerated => {
            let b: f64 = Beta::new(lambda, lambda)
                .map_err(|e| Error::Domain(e.to_string()))?
                .sample(rng);
            norm_quantile(b)
        }
    };
    Ok(mu + sigma * z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::quad::{integrate, integrate_default, Tolerance};

    #[test]
    fn worked_values() {
        let phi0 = 0.398_942_280_401_432_7;
        assert!((fsn_pdf(0.0, 0.0, 1.0, 0.0, FsnFamily::SkewNormal).unwrap() - phi0).abs() < 1e-15);
        // closed-form skew-normal density 2φ(z)Φ(λz) at z=0
        let oracle = 2.0 * norm_pdf(0.0) * 0.5;
        assert!((fsn_pdf(0.0, 0.0, 1.0, 1.0, FsnFamily::SkewNormal).unwrap() - oracle).abs() < 1e-15);
        for &(u, mu, s) in &[(0.3, -1.0, 2.0), (-4.0, 0.5, 0.7)] {
            let normal = norm_pdf((u - mu) / s) / s;
            assert!((fsn_pdf(u, mu, s, 3.0, FsnFamily::Uniform).unwrap() - normal).abs() < 1e-15);
        }
    }

    #[test]
    fn normalises() {
        for lambda in [-5.0, -1.0, 0.0, 0.7, 4.0] {
            for fam in [FsnFamily::Uniform, FsnFamily::SkewNormal] {
                let total = integrate(
                    |u| fsn_pdf(u, 0.4, 1.7, lambda, fam).unwrap(),
                    f64::NEG_INFINITY,
                    f64::INFINITY,
                    &[0.4],
                    Tolerance::default(),
                )
                .unwrap()
                .value;
                assert!((total - 1.0).abs() < 1e-8, "{fam:?} λ={lambda}: {total}");
                let pmass = integrate_default(|t| fam.p(t, lambda), 0.0, 1.0).unwrap();
                assert!((pmass - 1.0).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn skew_normal_p_is_bounded_by_two() {
        let bound = FsnFamily::SkewNormal.sup_bound().unwrap();
        for lambda in [-50.0, -3.0, 0.0, 2.0, 50.0] {
            for i in 0..=1000 {
                let t = i as f64 / 1000.0;
                assert!(FsnFamily::SkewNormal.p(t, lambda) <= bound);
            }
        }
    }

    #[test]
    fn log_density_matches_density() {
        for &(u, l) in &[(0.2, 2.0), (-3.0, 5.0), (1.0, -0.5)] {
            let a = fsn_pdf(u, 0.0, 1.2, l, FsnFamily::SkewNormal).unwrap().ln();
            let b = fsn_ln_pdf(u, 0.0, 1.2, l, FsnFamily::SkewNormal).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn sampler_mean_matches_skew_normal_mean() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let lambda: f64 = 2.0;
        let n = 200_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| fsn_sample(&mut rng, 0.0, 1.0, lambda, FsnFamily::SkewNormal).unwrap())
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let delta = lambda / (1.0 + lambda * lambda).sqrt();
        let exact = delta * (2.0 / std::f64::consts::PI).sqrt();
        let var = 1.0 - exact * exact;
        assert!((mean - exact).abs() < 4.0 * (var / n as f64).sqrt());
    }

    #[test]
    fn beta_generated_family() {
        for lambda in [0.5, 1.0, 3.0] {
            let fam = FsnFamily::BetaGenerated;
            let total = integrate(
                |u| fsn_pdf(u, -0.3, 0.8, lambda, fam).unwrap(),
                f64::NEG_INFINITY,
                f64::INFINITY,
                &[-0.3],
                Tolerance::default(),
            )
            .unwrap()
            .value;
            assert!((total - 1.0).abs() < 1e-8, "λ={lambda}: {total}");
            let a = fsn_pdf(0.9, 0.0, 1.3, lambda, fam).unwrap().ln();
            let b = fsn_ln_pdf(0.9, 0.0, 1.3, lambda, fam).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
        // λ = 1 is the normal
        let v = fsn_pdf(0.7, 0.0, 1.0, 1.0, FsnFamily::BetaGenerated).unwrap();
        assert!((v - norm_pdf(0.7)).abs() < 1e-15);
        assert!(FsnFamily::BetaGenerated.sup_bound().is_none());
        assert!(FsnFamily::BetaGenerated.p(0.0, 0.5).is_infinite());
        assert!(fsn_pdf(0.0, 0.0, 1.0, -1.0, FsnFamily::BetaGenerated).is_err());

        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let n = 100_000;
        let lambda = 0.5;
        // Φ(U) ~ Beta(λ, λ), variance 1/(4(2λ+1))
        let ts: Vec<f64> = (0..n)
            .map(|_| norm_cdf(fsn_sample(&mut rng, 0.0, 1.0, lambda, FsnFamily::BetaGenerated).unwrap()))
            .collect();
        let m = ts.iter().sum::<f64>() / n as f64;
        let v = ts.iter().map(|t| (t - m) * (t - m)).sum::<f64>() / n as f64;
        assert!((v - 1.0 / (4.0 * (2.0 * lambda + 1.0))).abs() < 0.003, "{v}");
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(fsn_pdf(0.0, 0.0, 0.0, 1.0, FsnFamily::SkewNormal).is_err());
        assert!(fsn_pdf(0.0, 0.0, 1.0, f64::NAN, FsnFamily::SkewNormal).is_err());
    }
}
