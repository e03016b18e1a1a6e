//! Exact rational hyperparameters, so sharp inequalities such as
//! `q_i + 2a_i > q - t` are decided without floating point slack.

use std::fmt;
use std::str::FromStr;

use num_rational::Rational64;
use num_traits::{ToPrimitive, Zero};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Hyper(Rational64);

impl Hyper {
    pub const ZERO: Hyper = Hyper(Rational64::new_raw(0, 1));

    pub fn new(numer: i64, denom: i64) -> Self {
        Hyper(Rational64::new(numer, denom))
    }

    pub fn integer(v: i64) -> Self {
        Hyper(Rational64::from_integer(v))
    }

    pub fn ratio(&self) -> Rational64 {
        self.0
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    /// Parses the shortest round-trip decimal form of `v`.
    pub fn from_f64_decimal(v: f64) -> Result<Self> {
        if !v.is_finite() {
            return Err(Error::Configuration(format!("hyperparameter {v} is not finite")));
        }
        format!("{v}").parse()
    }
}

impl From<i64> for Hyper {
    fn from(v: i64) -> Self {
        Hyper::integer(v)
    }
}

impl From<Rational64> for Hyper {
    fn from(v: Rational64) -> Self {
        Hyper(v)
    }
}

impl std::ops::Add for Hyper {
    type Output = Hyper;
    fn add(self, rhs: Hyper) -> Hyper {
        Hyper(self.0 + rhs.0)
    }
}

impl std::ops::Sub for Hyper {
    type Output = Hyper;
    fn sub(self, rhs: Hyper) -> Hyper {
        Hyper(self.0 - rhs.0)
    }
}

impl std::ops::Mul<i64> for Hyper {
    type Output = Hyper;
    fn mul(self, rhs: i64) -> Hyper {
        Hyper(self.0 * rhs)
    }
}

impl std::ops::Neg for Hyper {
    type Output = Hyper;
    fn neg(self) -> Hyper {
        Hyper(-self.0)
    }
}

impl std::iter::Sum for Hyper {
    fn sum<I: Iterator<Item = Hyper>>(iter: I) -> Hyper {
        iter.fold(Hyper::ZERO, |a, b| a + b)
    }
}

impl FromStr for Hyper {
    type Err = Error;

    /// Accepts integers, decimals (`-0.25`), scientific notation (`1e-3`)
    /// and fractions (`-1/2`).
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Configuration(format!("cannot parse '{s}' as an exact rational"));
        let t = s.trim();
        if let Some((n, d)) = t.split_once('/') {
            let n: i64 = n.trim().parse().map_err(|_| bad())?;
            let d: i64 = d.trim().parse().map_err(|_| bad())?;
            if d == 0 {
                return Err(bad());
            }
            return Ok(Hyper::new(n, d));
        }
        let (mant, exp) = match t.find(['e', 'E']) {
            Some(i) => (&t[..i], t[i + 1..].parse::<i32>().map_err(|_| bad())?),
            None => (t, 0),
        };
        let (neg, mant) = match mant.strip_prefix('-') {
            Some(m) => (true, m),
            None => (false, mant.strip_prefix('+').unwrap_or(mant)),
        };
        let (int_part, frac_part) = mant.split_once('.').unwrap_or((mant, ""));
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(bad());
        }
        if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let digits = format!("{int_part}{frac_part}");
        let mut numer: i128 = digits.parse().map_err(|_| bad())?;
        let mut scale = exp - frac_part.len() as i32;
        let mut denom: i128 = 1;
        while scale > 0 {
            numer = numer.checked_mul(10).ok_or_else(bad)?;
            scale -= 1;
        }
        while scale < 0 {
            denom = denom.checked_mul(10).ok_or_else(bad)?;
            scale += 1;
        }
        let g = gcd(numer.abs(), denom);
        let (numer, denom) = (numer / g.max(1), denom / g.max(1));
        let numer = i64::try_from(numer).map_err(|_| bad())?;
        let denom = i64::try_from(denom).map_err(|_| bad())?;
        Ok(Hyper::new(if neg { -numer } else { numer }, denom))
    }
}

fn gcd(mut a: i128, mut b: i128) -> i128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl fmt::Display for Hyper {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self.0.denom() == 1 {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl Serialize for Hyper {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Hyper {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Hyper;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a rational number as a string (\"-0.5\", \"-1/2\") or a JSON number")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Hyper, E> {
                v.parse().map_err(|e: Error| E::custom(e.to_string()))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Hyper, E> {
                Ok(Hyper::integer(v))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Hyper, E> {
                i64::try_from(v).map(Hyper::integer).map_err(E::custom)
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Hyper, E> {
                Hyper::from_f64_decimal(v).map_err(|e| E::custom(e.to_string()))
            }
        }
        d.deserialize_any(V)
    }
}
