//! One-dimensional quadrature: fixed Gauss–Legendre rules and an adaptive
//! Gauss–Kronrod (7/15) integrator with tangent mapping of infinite ranges.

use std::collections::BinaryHeap;
use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

pub const DEFAULT_ABS_TOL: f64 = 1e-10;
pub const DEFAULT_REL_TOL: f64 = 1e-8;
const DEFAULT_MAX_SUBDIVISIONS: usize = 4000;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            if n == 1 {
                p1 = x;
                p0 = 1.0;
            } else {
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
            }
            // p1 = P_n(x), p0 = P_{n-1}(x)
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        if n == 1 {
            dp = 1.0;
            x = 0.0;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n == 1 {
        weights[0] = 2.0;
    }
    (nodes, weights)
}

/// A fixed rule mapped onto `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    x.iter()
        .zip(&w)
        .map(|(&xi, &wi)| (mid + half * xi, half * wi))
        .collect()
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_subdivisions: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: DEFAULT_ABS_TOL,
            rel: DEFAULT_REL_TOL,
            max_subdivisions: DEFAULT_MAX_SUBDIVISIONS,
        }
    }
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Self {
            abs,
            rel,
            ..Self::default()
        }
    }
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Adaptive integration over finite `[a, b]`, starting from the given
/// initial partition points (which must lie inside `[a, b]`).
fn adaptive_finite<F: FnMut(f64) -> f64>(
    f: &mut F,
    points: &[f64],
    tol: Tolerance,
) -> Result<QuadResult> {
    let mut heap = BinaryHeap::new();
    let mut evaluations = 0;
    let (mut total, mut total_err) = (0.0, 0.0);
    for w in points.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let (v, e) = gk15(f, w[0], w[1]);
        evaluations += 15;
        total += v;
        total_err += e;
        heap.push(Segment {
            a: w[0],
            b: w[1],
            value: v,
            error: e,
        });
    }
    let mut splits = 0;
    while total_err > tol.abs.max(tol.rel * total.abs()) {
        if !total.is_finite() || !total_err.is_finite() {
            return Err(Error::Numerical {
                message: "non-finite integrand".into(),
                partial: None,
            });
        }
        if splits >= tol.max_subdivisions {
            return Err(Error::Numerical {
                message: format!(
                    "adaptive quadrature did not converge after {splits} subdivisions (error estimate {total_err:e})"
                ),
                partial: Some(total),
            });
        }
        let Some(seg) = heap.pop() else { break };
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            // interval collapsed to floating point resolution
            heap.push(Segment { error: 0.0, ..seg });
            total_err = heap.iter().map(|s| s.error).sum();
            continue;
        }
        let (v1, e1) = gk15(f, seg.a, mid);
        let (v2, e2) = gk15(f, mid, seg.b);
        evaluations += 30;
        total += v1 + v2 - seg.value;
        total_err += e1 + e2 - seg.error;
        heap.push(Segment {
            a: seg.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            a: mid,
            b: seg.b,
            value: v2,
            error: e2,
        });
        splits += 1;
        if splits % 64 == 0 {
            // re-sum to shed accumulated rounding
            total = heap.iter().map(|s| s.value).sum();
            total_err = heap.iter().map(|s| s.error).sum();
        }
    }
    let value: f64 = heap.iter().map(|s| s.value).sum();
    let error: f64 = heap.iter().map(|s| s.error).sum();
    Ok(QuadResult {
        value,
        error,
        evaluations,
    })
}

/// Integrates `f` over `[a, b]`, either end possibly infinite. Extra
/// `breaks` (kinks, discontinuities) are honoured as segment boundaries.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: Tolerance,
) -> Result<QuadResult> {
    if a.is_nan() || b.is_nan() {
        return Err(Error::Domain("NaN integration limit".into()));
    }
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    if a > b {
        let r = integrate(f, b, a, breaks, tol)?;
        return Ok(QuadResult {
            value: -r.value,
            ..r
        });
    }
    let mut pts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|x| x.is_finite() && *x > a && *x < b)
        .collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();

    if a.is_finite() && b.is_finite() {
        let mut all = Vec::with_capacity(pts.len() + 2);
        all.push(a);
        all.extend(pts);
        all.push(b);
        return adaptive_finite(&mut f, &all, tol);
    }

    // x = c + tan θ. The centre is the first finite anchor available.
    let centre = if a.is_finite() {
        a
    } else if b.is_finite() {
        b
    } else {
        pts.first().copied().unwrap_or(0.0)
    };
    let to_theta = |x: f64| (x - centre).atan();
    let lo = if a.is_finite() { to_theta(a) } else { -FRAC_PI_2 };
    let hi = if b.is_finite() { to_theta(b) } else { FRAC_PI_2 };
    let mut all = Vec::with_capacity(pts.len() + 2);
    all.push(lo);
    all.extend(pts.iter().map(|&x| to_theta(x)));
    all.push(hi);
    // guard against atan rounding producing non-increasing points
    all.dedup_by(|x, y| *x <= *y);
    let mut g = |theta: f64| {
        let x = centre + theta.tan();
        let fx = f(x);
        if fx == 0.0 {
            return 0.0;
        }
        let c = theta.cos();
        let v = fx / (c * c);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    adaptive_finite(&mut g, &all, tol)
}

/// Convenience: integrate with default tolerances and no breaks.
pub fn integrate_default<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64) -> Result<f64> {
    integrate(f, a, b, &[], Tolerance::default()).map(|r| r.value)
}
