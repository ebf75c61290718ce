//! Exact rational helpers and the `"p/q"` text encoding used in every report.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serializer};
use std::fmt;

/// Exact rational number used throughout the crate.
pub type Rational = BigRational;

/// Error produced when a rational literal cannot be parsed.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed rational literal `{0}`")]
pub struct ParseRationalError(pub String);

/// Builds `n / d` from machine integers. Panics on a zero denominator.
pub fn ratio(n: i64, d: i64) -> Rational {
    assert!(d != 0, "zero denominator");
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// Builds the integer `n` as a rational.
pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Formats as `p/q`, always with an explicit denominator.
pub fn to_pq(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Parses `p/q`, `p`, or a finite decimal such as `0.25`.
pub fn parse_rational(s: &str) -> Result<Rational, ParseRationalError> {
    let t = s.trim();
    let err = || ParseRationalError(s.to_string());
    if let Some((p, q)) = t.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| err())?;
        let q: BigInt = q.trim().parse().map_err(|_| err())?;
        if q.is_zero() {
            return Err(err());
        }
        return Ok(Rational::new(p, q));
    }
    if let Some((ip, fp)) = t.split_once('.') {
        if fp.is_empty() || !fp.chars().all(|c| c.is_ascii_digit()) {
            return Err(err());
        }
        let neg = ip.starts_with('-');
        let ip_abs = ip.trim_start_matches(['-', '+']);
        let whole: BigInt = if ip_abs.is_empty() {
            BigInt::zero()
        } else {
            ip_abs.parse().map_err(|_| err())?
        };
        let frac: BigInt = fp.parse().map_err(|_| err())?;
        let scale = num_traits::pow(BigInt::from(10), fp.len());
        let mag = Rational::new(whole * &scale + frac, scale);
        return Ok(if neg { -mag } else { mag });
    }
    let p: BigInt = t.parse().map_err(|_| err())?;
    Ok(Rational::from_integer(p))
}

/// Parses a comma-separated list of rationals.
pub fn parse_rational_list(s: &str) -> Result<Vec<Rational>, ParseRationalError> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(parse_rational).collect()
}

/// Lossy conversion for Monte-Carlo comparisons.
pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Exact sum of a slice.
pub fn sum(values: &[Rational]) -> Rational {
    values.iter().fold(Rational::zero(), |acc, v| acc + v)
}

pub(crate) fn is_nonneg(r: &Rational) -> bool {
    !r.is_negative()
}

/// Serde adapter writing a rational as a `"p/q"` string.
pub mod pq {
    use super::*;

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&to_pq(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).map_err(serde::de::Error::custom)
    }
}

/// Serde adapter for `Vec<Rational>` as a list of `"p/q"` strings.
pub mod pq_vec {
    use super::*;
    use serde::ser::SerializeSeq;

    pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for r in v {
            seq.serialize_element(&to_pq(r))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
        let v = Vec::<String>::deserialize(d)?;
        v.iter()
            .map(|s| parse_rational(s).map_err(serde::de::Error::custom))
            .collect()
    }
}

/// Display wrapper printing `p/q`.
pub struct Pq<'a>(pub &'a Rational);

impl fmt::Display for Pq<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.0.numer(), self.0.denom())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_forms() {
        assert_eq!(parse_rational("3/6").unwrap(), ratio(1, 2));
        assert_eq!(parse_rational("-4").unwrap(), int(-4));
        assert_eq!(parse_rational("0.25").unwrap(), ratio(1, 4));
        assert_eq!(parse_rational("-1.5").unwrap(), ratio(-3, 2));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
    }

    #[test]
    fn pq_roundtrip() {
        assert_eq!(to_pq(&int(2)), "2/1");
        assert_eq!(parse_rational(&to_pq(&ratio(-7, 3))).unwrap(), ratio(-7, 3));
    }
}
