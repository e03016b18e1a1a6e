//! Standard normal helpers that stay accurate deep in the tails.

use libm::erfc;
use statrs::function::erf::erfc_inv;

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

#[inline]
pub fn ln_norm_pdf(x: f64) -> f64 {
    -LN_SQRT_2PI - 0.5 * x * x
}

#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        return 1.0;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `ln Φ(x)`; uses the Mills-ratio continued fraction below -30 where
/// `erfc` underflows.
pub fn ln_norm_cdf(x: f64) -> f64 {
    if x > -30.0 {
        let c = norm_cdf(x);
        if c > 0.5 {
            (-norm_cdf(-x)).ln_1p()
        } else {
            c.ln()
        }
    } else {
        // Φ(x) = φ(x)/|x| · 1/(1 + 1/x² · ... ) via Lentz-free continued fraction
        let z = -x;
        let mut cf = z;
        for k in (1..=40).rev() {
            cf = z + k as f64 / cf;
        }
        ln_norm_pdf(x) - cf.ln()
    }
}

/// Inverse of `Φ`; returns ±∞ at the endpoints.
pub fn norm_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p > 0.5 {
        return -norm_quantile(1.0 - p);
    }
    // statrs' inverse is good to ~1e-10; Newton steps on ln Φ finish the job
    let mut x = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p);
    let lp = p.ln();
    for _ in 0..2 {
        let lc = ln_norm_cdf(x);
        x -= (lc - lp) * (lc - ln_norm_pdf(x)).exp();
    }
    x
}

#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}
