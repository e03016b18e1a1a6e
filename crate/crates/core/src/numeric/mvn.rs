//! Normal CDFs in up to three dimensions.
//!
//! `bvn_cdf` is Genz's Drezner–Wesolowsky refinement: fast with ~1e-15
//! absolute accuracy. The `Accurate` paths integrate the conditional
//! representation instead, which keeps relative accuracy in the far tails
//! at the price of speed. The fast trivariate path applies a fixed composite
//! Gauss–Legendre rule to the same conditional form.

use std::f64::consts::PI;
use std::sync::OnceLock;

use super::quad::{gauss_legendre, integrate, Tolerance};
use super::special::{norm_cdf, norm_pdf};

/// Below this the standard normal density underflows to zero.
const LOWER_LIMIT: f64 = -38.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CdfMode {
    Fast,
    Accurate,
}

struct HalfRules {
    r3: (Vec<f64>, Vec<f64>),
    r6: (Vec<f64>, Vec<f64>),
    r10: (Vec<f64>, Vec<f64>),
    r10_full: (Vec<f64>, Vec<f64>),
}

fn half_rules() -> &'static HalfRules {
    static RULES: OnceLock<HalfRules> = OnceLock::new();
    RULES.get_or_init(|| {
        let half = |n: usize| {
            let (x, w) = gauss_legendre(n);
            (x[..n / 2].to_vec(), w[..n / 2].to_vec())
        };
        HalfRules {
            r3: half(6),
            r6: half(12),
            r10: half(20),
            r10_full: gauss_legendre(10),
        }
    })
}

/// `P(X > dh, Y > dk)` for a standard bivariate normal with correlation `r`.
fn bvnu(dh: f64, dk: f64, r: f64) -> f64 {
    if dh == f64::INFINITY || dk == f64::INFINITY {
        return 0.0;
    }
    if dh == f64::NEG_INFINITY {
        return if dk == f64::NEG_INFINITY {
            1.0
        } else {
            norm_cdf(-dk)
        };
    }
    if dk == f64::NEG_INFINITY {
        return norm_cdf(-dh);
    }
    let rules = half_rules();
    let (x, w) = if r.abs() < 0.3 {
        (&rules.r3.0, &rules.r3.1)
    } else if r.abs() < 0.75 {
        (&rules.r6.0, &rules.r6.1)
    } else {
        (&rules.r10.0, &rules.r10.1)
    };
    let h = dh;
    let mut k = dk;
    let mut hk = h * k;
    let mut bvn = 0.0;
    if r.abs() < 0.925 {
        let hs = (h * h + k * k) / 2.0;
        let asr = r.asin();
        for (xi, wi) in x.iter().zip(w) {
            for is in [-1.0, 1.0] {
                let sn = (asr * (is * xi + 1.0) / 2.0).sin();
                bvn += wi * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
            }
        }
        bvn = bvn * asr / (4.0 * PI) + norm_cdf(-h) * norm_cdf(-k);
    } else {
        if r < 0.0 {
            k = -k;
            hk = -hk;
        }
        if r.abs() < 1.0 {
            let as_ = (1.0 - r) * (1.0 + r);
            let mut a = as_.sqrt();
            let bs = (h - k) * (h - k);
            let c = (4.0 - hk) / 8.0;
            let d = (12.0 - hk) / 16.0;
            let asr = -(bs / as_ + hk) / 2.0;
            if asr > -100.0 {
                bvn = a
                    * asr.exp()
                    * (1.0 - c * (bs - as_) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as_ * as_ / 5.0);
            }
            if hk > -100.0 {
                let b = bs.sqrt();
                bvn -= (-hk / 2.0).exp()
                    * (2.0 * PI).sqrt()
                    * norm_cdf(-b / a)
                    * b
                    * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
            }
            a /= 2.0;
            for (xi, wi) in x.iter().zip(w) {
                for is in [-1.0, 1.0] {
                    let xs = (a * (is * xi + 1.0)).powi(2);
                    let rs = (1.0 - xs).sqrt();
                    let asr = -(bs / xs + hk) / 2.0;
                    if asr > -100.0 {
                        bvn += a
                            * wi
                            * asr.exp()
                            * ((-hk * (1.0 - rs) / (2.0 * (1.0 + rs))).exp() / rs
                                - (1.0 + c * xs * (1.0 + d * xs)));
                    }
                }
            }
            bvn = -bvn / (2.0 * PI);
        }
        if r > 0.0 {
            bvn += norm_cdf(-h.max(k));
        } else {
            bvn = -bvn;
            if k > h {
                if h < 0.0 {
                    bvn += norm_cdf(k) - norm_cdf(h);
                } else {
                    bvn += norm_cdf(-h) - norm_cdf(-k);
                }
            }
        }
    }
    bvn.clamp(0.0, 1.0)
}

/// `P(X < h, Y < k)` for a standard bivariate normal with correlation `rho`.
pub fn bvn_cdf(h: f64, k: f64, rho: f64) -> f64 {
    bvnu(-h, -k, rho.clamp(-1.0, 1.0))
}

/// Same quantity via `∫_{-∞}^{h} φ(x) Φ((k - ρx)/√(1-ρ²)) dx`.
pub fn bvn_cdf_accurate(h: f64, k: f64, rho: f64) -> f64 {
    let rho = rho.clamp(-1.0, 1.0);
    if h == f64::NEG_INFINITY || k == f64::NEG_INFINITY {
        return 0.0;
    }
    if h == f64::INFINITY {
        return norm_cdf(k);
    }
    if k == f64::INFINITY {
        return norm_cdf(h);
    }
    // integrate over the more restrictive coordinate
    let (h, k) = if h <= k { (h, k) } else { (k, h) };
    let s = ((1.0 - rho) * (1.0 + rho)).sqrt();
    if s < 1e-15 {
        return if rho > 0.0 {
            norm_cdf(h)
        } else {
            (norm_cdf(h) - norm_cdf(-k)).max(0.0)
        };
    }
    if h <= LOWER_LIMIT {
        return 0.0;
    }
    let mut breaks = Vec::new();
    transition_breaks(&mut breaks, k, rho, s);
    let tol = Tolerance::new(1e-300, 1e-11);
    if h >= -LOWER_LIMIT {
        return norm_cdf(h);
    }
    let (lo, hi) = support(LOWER_LIMIT, h, &[(k, rho, s)]);
    if hi <= lo {
        return 0.0;
    }
    integrate(
        |x| norm_pdf(x) * norm_cdf((k - rho * x) / s),
        lo,
        hi,
        &breaks,
        tol,
    )
    .map(|r| r.value)
    .unwrap_or_else(|e| match e {
        crate::Error::Numerical {
            partial: Some(v), ..
        } => v,
        _ => f64::NAN,
    })
    .clamp(0.0, 1.0)
}

const FAST_LOWER: f64 = -8.5;
const FAST_PANEL: f64 = 3.0;
/// Below this conditional sd the integrand has a near-jump that the fixed
/// rule cannot resolve, so the adaptive rule takes over.
const FAST_MIN_SD: f64 = 0.3;

/// Narrows `[lo, hi]` to where every conditional argument
/// `(zⱼ - rⱼx)/sⱼ` stays above `-SUPPORT_SD`; outside it the integrand is
/// below `Φ(-SUPPORT_SD)` times the density.
fn support(mut lo: f64, mut hi: f64, conds: &[(f64, f64, f64)]) -> (f64, f64) {
    for &(zj, rj, sj) in conds {
        if rj == 0.0 {
            continue;
        }
        let edge = (zj + SUPPORT_SD * sj) / rj;
        if rj > 0.0 {
            hi = hi.min(edge);
        } else {
            lo = lo.max(edge);
        }
    }
    (lo, hi)
}

const SUPPORT_SD: f64 = 10.0;

/// Breakpoints around the step of `Φ((z - r·x)/s)` at `x = z/r`, graded so
/// that a sharp step does not hide between quadrature nodes.
fn transition_breaks(out: &mut Vec<f64>, z: f64, r: f64, s: f64) {
    if r == 0.0 {
        return;
    }
    let t = z / r;
    out.push(t);
    let d = s / r.abs();
    if d < 1.0 {
        for m in [1.0, 4.0, 16.0] {
            out.push(t - m * d);
            out.push(t + m * d);
        }
    }
}

/// Composite 10-point Gauss–Legendre over `[lo, hi]`, split at `breaks`.
fn fixed_rule<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, breaks: &mut Vec<f64>) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let (x, w) = &half_rules().r10_full;
    breaks.retain(|b| *b > lo && *b < hi);
    breaks.sort_by(f64::total_cmp);
    let mut edges = Vec::with_capacity(breaks.len() + 2);
    edges.push(lo);
    edges.extend_from_slice(breaks);
    edges.push(hi);
    let mut total = 0.0;
    for e in edges.windows(2) {
        let pieces = ((e[1] - e[0]) / FAST_PANEL).ceil().max(1.0) as usize;
        let step = (e[1] - e[0]) / pieces as f64;
        for p in 0..pieces {
            let mid = e[0] + step * (p as f64 + 0.5);
            let half = 0.5 * step;
            let mut acc = 0.0;
            for (xi, wi) in x.iter().zip(w) {
                acc += wi * f(mid + half * xi);
            }
            total += half * acc;
        }
    }
    total
}

/// `P(Y < z)` for `Y ~ N(0, R)` with `R` a 3×3 correlation matrix given
/// by its upper triangle `(r12, r13, r23)`.
pub fn tvn_cdf(z: [f64; 3], r12: f64, r13: f64, r23: f64, mode: CdfMode) -> f64 {
    if z.contains(&f64::NEG_INFINITY) {
        return 0.0;
    }
    let r = [[1.0, r12, r13], [r12, 1.0, r23], [r13, r23, 1.0]];
    let bvn = |h: f64, k: f64, rho: f64| match mode {
        CdfMode::Fast => bvn_cdf(h, k, rho),
        CdfMode::Accurate => bvn_cdf_accurate(h, k, rho),
    };
    // drop unbounded coordinates
    let finite: Vec<usize> = (0..3).filter(|&i| z[i] < f64::INFINITY).collect();
    match finite.len() {
        0 => return 1.0,
        1 => return norm_cdf(z[finite[0]]),
        2 => return bvn(z[finite[0]], z[finite[1]], r[finite[0]][finite[1]]),
        _ => {}
    }
    // condition on the coordinate least correlated with the others
    let c = (0..3)
        .min_by(|&a, &b| {
            let ma = (0..3).filter(|&j| j != a).map(|j| r[a][j].abs()).fold(0.0, f64::max);
            let mb = (0..3).filter(|&j| j != b).map(|j| r[b][j].abs()).fold(0.0, f64::max);
            ma.total_cmp(&mb)
        })
        .unwrap();
    let (j, k) = match c {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let (rcj, rck, rjk) = (r[c][j], r[c][k], r[j][k]);
    let sj = ((1.0 - rcj) * (1.0 + rcj)).max(0.0).sqrt();
    let sk = ((1.0 - rck) * (1.0 + rck)).max(0.0).sqrt();
    let rho = if sj * sk > 1e-300 {
        ((rjk - rcj * rck) / (sj * sk)).clamp(-1.0, 1.0)
    } else {
        0.0
    };
    let zc = z[c];
    if zc <= LOWER_LIMIT {
        return 0.0;
    }
    let cond = |zz: f64, rr: f64, s: f64, x: f64| {
        let num = zz - rr * x;
        if s > 0.0 {
            num / s
        } else if num > 0.0 {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        }
    };
    let mut breaks = Vec::new();
    transition_breaks(&mut breaks, z[j], rcj, sj);
    transition_breaks(&mut breaks, z[k], rck, sk);
    let f = |x: f64| {
        let d = norm_pdf(x);
        if d == 0.0 {
            return 0.0;
        }
        d * bvn(cond(z[j], rcj, sj, x), cond(z[k], rck, sk, x), rho)
    };
    if mode == CdfMode::Fast && sj.min(sk) > FAST_MIN_SD {
        let (lo, hi) = support((zc - 4.0).min(FAST_LOWER), zc.min(-FAST_LOWER), &[(z[j], rcj, sj), (z[k], rck, sk)]);
        return fixed_rule(f, lo, hi, &mut breaks).clamp(0.0, 1.0);
    }
    let tol = match mode {
        CdfMode::Fast => Tolerance::new(1e-15, 1e-9),
        CdfMode::Accurate => Tolerance::new(1e-300, 1e-10),
    };
    let (lo, hi) = support(LOWER_LIMIT, zc.min(-LOWER_LIMIT), &[(z[j], rcj, sj), (z[k], rck, sk)]);
    if hi <= lo {
        return 0.0;
    }
    let res = integrate(f, lo, hi, &breaks, tol);
    match res {
        Ok(r) => r.value.clamp(0.0, 1.0),
        Err(crate::Error::Numerical {
            partial: Some(v), ..
        }) => v.clamp(0.0, 1.0),
        Err(_) => f64::NAN,
    }
}

/// `P(Y < z)` for `Y ~ N(0, R)`, dimension 1 to 3. `corr` is row-major.
pub fn mvn_cdf(z: &[f64], corr: &[f64], mode: CdfMode) -> f64 {
    let d = z.len();
    assert_eq!(corr.len(), d * d, "correlation matrix shape");
    match d {
        0 => 1.0,
        1 => norm_cdf(z[0]),
        2 => match mode {
            CdfMode::Fast => bvn_cdf(z[0], z[1], corr[1]),
            CdfMode::Accurate => bvn_cdf_accurate(z[0], z[1], corr[1]),
        },
        3 => tvn_cdf([z[0], z[1], z[2]], corr[1], corr[2], corr[5], mode),
        _ => panic!("mvn_cdf supports at most three dimensions"),
    }
}
