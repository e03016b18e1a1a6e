//! Skewing functions `{a(γ), b(γ)}` for the two-piece normal.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Number of points used when validating a parameterisation.
pub const VALIDATION_GRID_POINTS: usize = 10_000;

/// An open interval `(lo, hi)`; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const REAL_LINE: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };
    pub const POSITIVE: Interval = Interval {
        lo: 0.0,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(Error::Domain(format!("invalid interval ({lo}, {hi})")));
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }

    /// Closed-interval containment of `other` in `self`.
    pub fn covers(&self, other: &Interval) -> bool {
        other.lo >= self.lo && other.hi <= self.hi
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    /// `n` interior points that reach each finite endpoint geometrically
    /// (to within ~1e-12 of the width) and each infinite end out to ~e^27.
    pub fn dense_grid(&self, n: usize) -> Vec<f64> {
        const SPAN: f64 = 27.0;
        (0..n)
            .map(|j| {
                let s = -SPAN + 2.0 * SPAN * (j as f64 + 0.5) / n as f64;
                match (self.lo.is_finite(), self.hi.is_finite()) {
                    (true, true) => {
                        let w = self.hi - self.lo;
                        let t = 1.0 / (1.0 + (-s).exp());
                        // evaluate from the nearer endpoint to keep precision
                        if t < 0.5 {
                            self.lo + w * t
                        } else {
                            self.hi - w / (1.0 + s.exp())
                        }
                    }
                    (true, false) => self.lo + s.exp(),
                    (false, true) => self.hi - s.exp(),
                    (false, false) => s.sinh(),
                }
            })
            .filter(|x| self.contains(*x))
            .collect()
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.lo, self.hi)
    }
}

/// A pair of positive functions `{a(γ), b(γ)}` on an open domain Γ with
/// constants `m ≥ min{a, b}` and `M ≤ a + b` throughout Γ.
#[derive(Clone)]
pub struct SkewParameterisation {
    name: String,
    a: ScalarFn,
    b: ScalarFn,
    domain: Interval,
    m: f64,
    big_m: f64,
}

impl fmt::Debug for SkewParameterisation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SkewParameterisation")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("m", &self.m)
            .field("M", &self.big_m)
            .finish()
    }
}

impl PartialEq for SkewParameterisation {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.domain == other.domain
    }
}

impl SkewParameterisation {
    /// Builds and validates a parameterisation on a dense grid over the
    /// domain. Fails if `a` or `b` is non-positive anywhere on the grid, or
    /// if the `m`/`M` bounds are violated.
    pub fn new(
        name: impl Into<String>,
        a: impl Fn(f64) -> f64 + Send + Sync + 'static,
        b: impl Fn(f64) -> f64 + Send + Sync + 'static,
        domain: Interval,
        m: f64,
        big_m: f64,
    ) -> Result<Self> {
        let p = Self {
            name: name.into(),
            a: Arc::new(a),
            b: Arc::new(b),
            domain,
            m,
            big_m,
        };
        p.validate()?;
        Ok(p)
    }

    /// `{1 - γ, 1 + γ}` on `(-1, 1)`.
    pub fn epsilon_skew() -> Self {
        Self {
            name: "epsilon_skew".into(),
            a: Arc::new(|g| 1.0 - g),
            b: Arc::new(|g| 1.0 + g),
            domain: Interval { lo: -1.0, hi: 1.0 },
            m: 1.0,
            big_m: 2.0,
        }
    }

    /// `{γ, 1/γ}` on `(0, ∞)`.
    pub fn inverse_scale_factors() -> Self {
        Self {
            name: "inverse_scale_factors".into(),
            a: Arc::new(|g| g),
            b: Arc::new(|g| 1.0 / g),
            domain: Interval::POSITIVE,
            m: 1.0,
            big_m: 2.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.m > 0.0 && self.big_m > 0.0) {
            return Err(Error::Domain(format!(
                "{}: bound constants must be positive (m={}, M={})",
                self.name, self.m, self.big_m
            )));
        }
        for g in self.domain.dense_grid(VALIDATION_GRID_POINTS) {
            let (a, b) = ((self.a)(g), (self.b)(g));
            if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
                return Err(Error::Domain(format!(
                    "{}: a({g})={a}, b({g})={b} must be finite and positive",
                    self.name
                )));
            }
            if a.min(b) > self.m {
                return Err(Error::Domain(format!(
                    "{}: min(a, b)={} exceeds m={} at γ={g}",
                    self.name,
                    a.min(b),
                    self.m
                )));
            }
            if a + b < self.big_m {
                return Err(Error::Domain(format!(
                    "{}: a + b={} falls below M={} at γ={g}",
                    self.name,
                    a + b,
                    self.big_m
                )));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn big_m(&self) -> f64 {
        self.big_m
    }

    pub fn check(&self, gamma: f64) -> Result<()> {
        if self.domain.contains(gamma) {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "γ={gamma} outside {} domain {}",
                self.name, self.domain
            )))
        }
    }

    /// `(a(γ), b(γ))`.
    pub fn scales(&self, gamma: f64) -> Result<(f64, f64)> {
        self.check(gamma)?;
        Ok(((self.a)(gamma), (self.b)(gamma)))
    }

    /// `(a(γ), b(γ))` without the domain check, for hot loops whose γ
    /// values were validated upstream.
    #[inline]
    pub(crate) fn scales_unchecked(&self, gamma: f64) -> (f64, f64) {
        ((self.a)(gamma), (self.b)(gamma))
    }

    /// Some γ with `a(γ) = b(γ)`, found by bisection on `a - b`.
    pub fn symmetric_point(&self) -> Option<f64> {
        let grid = self.domain.dense_grid(2_000);
        let diff = |g: f64| (self.a)(g) - (self.b)(g);
        for w in grid.windows(2) {
            let (fa, fb) = (diff(w[0]), diff(w[1]));
            if fa == 0.0 {
                return Some(w[0]);
            }
            if fa.signum() != fb.signum() {
                let (mut lo, mut hi) = (w[0], w[1]);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if diff(mid).signum() == fa.signum() {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                return Some(0.5 * (lo + hi));
            }
        }
        None
    }
}

/// `h(γ) = min{a(γ), b(γ)}`.
pub fn h_gamma(gamma: f64, param: &SkewParameterisation) -> Result<f64> {
    let (a, b) = param.scales(gamma)?;
    Ok(a.min(b))
}

/// `H(γ) = a(γ) + b(γ)`.
#[allow(non_snake_case)]
pub fn H_gamma(gamma: f64, param: &SkewParameterisation) -> Result<f64> {
    let (a, b) = param.scales(gamma)?;
    Ok(a + b)
}

/// `max{a(γ), b(γ)}`, the alternative majorant usable in condition (e).
pub fn max_ab(gamma: f64, param: &SkewParameterisation) -> Result<f64> {
    let (a, b) = param.scales(gamma)?;
    Ok(a.max(b))
}

/// Named parameterisations; new entries are validated on registration.
#[derive(Debug, Clone)]
pub struct ParameterisationRegistry {
    entries: BTreeMap<String, SkewParameterisation>,
}

impl Default for ParameterisationRegistry {
    fn default() -> Self {
        let mut entries = BTreeMap::new();
        for p in [
            SkewParameterisation::epsilon_skew(),
            SkewParameterisation::inverse_scale_factors(),
        ] {
            entries.insert(p.name.clone(), p);
        }
        Self { entries }
    }
}

impl ParameterisationRegistry {
    pub fn register(&mut self, p: SkewParameterisation) -> Result<()> {
        p.validate()?;
        if self.entries.contains_key(&p.name) {
            return Err(Error::Configuration(format!(
                "parameterisation '{}' already registered",
                p.name
            )));
        }
        self.entries.insert(p.name.clone(), p);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<SkewParameterisation> {
        self.entries.get(name).cloned().ok_or_else(|| {
            Error::Configuration(format!(
                "unknown parameterisation '{name}' (known: {})",
                self.names().join(", ")
            ))
        })
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.keys().cloned().collect()
    }
}
