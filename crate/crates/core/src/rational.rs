//! Exact rational scalars and their textual encoding.
//!
//! Values are written as an integer (`"3"`, `"-2"`) or a reduced fraction
//! `"p/q"` with `q > 0`. Floating point literals are rejected.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

pub fn int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

pub fn frac(p: i64, q: i64) -> Rational {
    Rational::new(BigInt::from(p), BigInt::from(q))
}

pub fn zero() -> Rational {
    Rational::zero()
}

pub fn one() -> Rational {
    Rational::one()
}

/// Parses `"p"` or `"p/q"`; whitespace around the tokens is ignored.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || {
        Error::Parse(format!(
            "invalid rational `{s}` (expected an integer or p/q)"
        ))
    };
    let parse_int = |t: &str| -> Result<BigInt> {
        let t = t.trim();
        let digits = t.strip_prefix(['-', '+']).unwrap_or(t);
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        t.parse::<BigInt>().map_err(|_| bad())
    };
    match s.split_once('/') {
        None => Ok(Rational::from_integer(parse_int(s)?)),
        Some((p, q)) => {
            let p = parse_int(p)?;
            let q = parse_int(q)?;
            if !q.is_positive() {
                return Err(Error::Parse(format!(
                    "rational `{s}` must have a positive denominator"
                )));
            }
            Ok(Rational::new(p, q))
        }
    }
}

pub fn format_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_integers_and_fractions() {
        assert_eq!(parse_rational("3").unwrap(), int(3));
        assert_eq!(parse_rational(" -1/8 ").unwrap(), frac(-1, 8));
        assert_eq!(parse_rational("4/2").unwrap(), int(2));
    }

    #[test]
    fn rejects_floats_and_bad_denominators() {
        assert!(parse_rational("0.5").is_err());
        assert!(parse_rational("1e3").is_err());
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("1/-2").is_err());
        assert!(parse_rational("").is_err());
        assert!(parse_rational("/3").is_err());
    }

    #[test]
    fn formats_reduced() {
        assert_eq!(format_rational(&frac(-2, 16)), "-1/8");
        assert_eq!(format_rational(&int(11)), "11");
        assert_eq!(format_rational(&zero()), "0");
    }
}
