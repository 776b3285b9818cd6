//! Exact non-negative fractions for pass rates and band edges.
//!
//! Pass rates are ratios of small integers (successes over attempts) and
//! are compared against decimal thresholds such as `0.97` or `0.81`.
//! Doing those comparisons in floating point puts values like `26/32`
//! on the wrong side of an edge, so both sides are kept as rationals.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_integer::Integer;
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FractionError {
    #[error("zero denominator")]
    ZeroDenominator,
    #[error("fraction {0} is greater than one")]
    AboveOne(String),
    #[error("cannot parse fraction from {0:?}")]
    Parse(String),
}

/// A reduced fraction `num / den` with `den > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Fraction {
    num: u64,
    den: u64,
}

impl Fraction {
    pub const ZERO: Fraction = Fraction { num: 0, den: 1 };
    pub const ONE: Fraction = Fraction { num: 1, den: 1 };

    pub fn new(num: u64, den: u64) -> Result<Self, FractionError> {
        if den == 0 {
            return Err(FractionError::ZeroDenominator);
        }
        let g = num.gcd(&den);
        Ok(Fraction {
            num: num / g,
            den: den / g,
        })
    }

    /// Like [`Fraction::new`] but additionally requires the value to lie in `[0, 1]`.
    pub fn unit(num: u64, den: u64) -> Result<Self, FractionError> {
        let f = Self::new(num, den)?;
        if f.num > f.den {
            return Err(FractionError::AboveOne(f.to_string()));
        }
        Ok(f)
    }

    pub fn numer(&self) -> u64 {
        self.num
    }

    pub fn denom(&self) -> u64 {
        self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Parses a plain decimal such as `0.97`, `1`, or `.5`.
    pub fn from_decimal_str(s: &str) -> Result<Self, FractionError> {
        let err = || FractionError::Parse(s.to_string());
        let s = s.trim();
        let (int_part, frac_part) = match s.split_once('.') {
            Some((i, f)) => (i, f),
            None => (s, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(err());
        }
        if !int_part.bytes().all(|b| b.is_ascii_digit())
            || !frac_part.bytes().all(|b| b.is_ascii_digit())
            || frac_part.len() > 18
        {
            return Err(err());
        }
        let den = 10u64.pow(frac_part.len() as u32);
        let int: u64 = if int_part.is_empty() {
            0
        } else {
            int_part.parse().map_err(|_| err())?
        };
        let frac: u64 = if frac_part.is_empty() {
            0
        } else {
            frac_part.parse().map_err(|_| err())?
        };
        let num = int
            .checked_mul(den)
            .and_then(|v| v.checked_add(frac))
            .ok_or_else(err)?;
        Self::new(num, den)
    }

    /// Converts through the shortest decimal rendering of `x`, so `0.97_f64`
    /// becomes exactly `97/100`.
    pub fn from_f64(x: f64) -> Result<Self, FractionError> {
        if !x.is_finite() || x < 0.0 {
            return Err(FractionError::Parse(x.to_string()));
        }
        Self::from_decimal_str(&format!("{x}"))
    }

    /// `self * n` when that is an integer.
    pub fn times_integer(&self, n: u64) -> Option<u64> {
        let scaled = self.num as u128 * n as u128;
        scaled.is_multiple_of(self.den as u128).then(|| (scaled / self.den as u128) as u64)
    }
}

impl Ord for Fraction {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.num as u128 * other.den as u128).cmp(&(other.num as u128 * self.den as u128))
    }
}

impl PartialOrd for Fraction {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Six-digit decimal rendering, e.g. `0.625000`.
impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // round half up on the exact value
        let scaled = (self.num as u128 * 1_000_000 * 2 + self.den as u128) / (2 * self.den as u128);
        write!(f, "{}.{:06}", scaled / 1_000_000, scaled % 1_000_000)
    }
}

impl FromStr for Fraction {
    type Err = FractionError;

    /// Accepts `num/den` or a plain decimal.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once('/') {
            Some((n, d)) => {
                let n = n.trim().parse().map_err(|_| FractionError::Parse(s.into()))?;
                let d = d.trim().parse().map_err(|_| FractionError::Parse(s.into()))?;
                Self::new(n, d)
            }
            None => Self::from_decimal_str(s),
        }
    }
}

/// Serialized as the exact `"num/den"` string.
impl Serialize for Fraction {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&format!("{}/{}", self.num, self.den))
    }
}

/// Accepts `"num/den"`, a decimal string, or a JSON/TOML number.
impl<'de> Deserialize<'de> for Fraction {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct Visitor;

        impl de::Visitor<'_> for Visitor {
            type Value = Fraction;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a fraction as \"num/den\" or a non-negative number")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Fraction, E> {
                v.parse().map_err(E::custom)
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Fraction, E> {
                Fraction::new(v, 1).map_err(E::custom)
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Fraction, E> {
                u64::try_from(v)
                    .map_err(|_| E::custom("negative fraction"))
                    .and_then(|v| Fraction::new(v, 1).map_err(E::custom))
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Fraction, E> {
                Fraction::from_f64(v).map_err(E::custom)
            }
        }

        deserializer.deserialize_any(Visitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduces_and_compares_exactly() {
        let a = Fraction::new(26, 32).unwrap();
        assert_eq!((a.numer(), a.denom()), (13, 16));
        let edge = Fraction::from_decimal_str("0.81").unwrap();
        assert!(a > edge);
        assert_eq!(Fraction::from_f64(0.97).unwrap(), Fraction::new(97, 100).unwrap());
    }

    #[test]
    fn renders_six_digits() {
        assert_eq!(Fraction::new(5, 8).unwrap().to_string(), "0.625000");
        assert_eq!(Fraction::new(1, 3).unwrap().to_string(), "0.333333");
        assert_eq!(Fraction::new(2, 3).unwrap().to_string(), "0.666667");
        assert_eq!(Fraction::ONE.to_string(), "1.000000");
    }

    #[test]
    fn parses_both_forms() {
        assert_eq!("7/8".parse::<Fraction>().unwrap(), Fraction::new(7, 8).unwrap());
        assert_eq!("0.875".parse::<Fraction>().unwrap(), Fraction::new(7, 8).unwrap());
        assert!("1/0".parse::<Fraction>().is_err());
        assert!("abc".parse::<Fraction>().is_err());
        assert!(Fraction::unit(9, 8).is_err());
    }

    #[test]
    fn serde_is_exact() {
        let f = Fraction::new(1, 3).unwrap();
        let s = serde_json::to_string(&f).unwrap();
        assert_eq!(s, "\"1/3\"");
        assert_eq!(serde_json::from_str::<Fraction>(&s).unwrap(), f);
        assert_eq!(serde_json::from_str::<Fraction>("0.01").unwrap(), Fraction::new(1, 100).unwrap());
    }
}
