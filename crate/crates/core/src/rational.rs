//! Rational helpers on top of `num_rational::BigRational`.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Exact rational number, always stored in reduced form with a positive denominator.
pub type Rational = num_rational::BigRational;

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// Parses `"p/q"` or `"n"`. Decimal points and exponents are rejected.
pub fn parse(s: &str) -> Result<Rational> {
    let t = s.trim();
    if t.contains(['.', 'e', 'E']) {
        return Err(Error::Invalid(format!("floating-point literal {s:?} is not allowed")));
    }
    let q: Rational = t
        .parse()
        .map_err(|_| Error::Invalid(format!("cannot parse rational {s:?}")))?;
    Ok(q)
}

/// Parses a comma-separated list of rationals.
pub fn parse_list(s: &str) -> Result<Vec<Rational>> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(parse).collect()
}

pub fn format(q: &Rational) -> String {
    q.to_string()
}

pub fn format_list(qs: &[Rational]) -> String {
    qs.iter().map(format).collect::<Vec<_>>().join(", ")
}

pub fn sum<'a>(it: impl IntoIterator<Item = &'a Rational>) -> Rational {
    it.into_iter().fold(Rational::zero(), |acc, q| acc + q)
}

pub fn lcm_of_denominators<'a>(it: impl IntoIterator<Item = &'a Rational>) -> BigInt {
    it.into_iter()
        .fold(BigInt::one(), |acc, q| acc.lcm(q.denom()))
}

/// Floor of a nonnegative rational as `usize`, if it fits.
pub fn floor_usize(q: &Rational) -> Option<usize> {
    if q.is_negative() {
        return None;
    }
    q.floor().to_integer().to_usize()
}

/// Exact conversion of an integral nonnegative rational to `usize`.
pub fn to_usize(q: &Rational) -> Option<usize> {
    if q.is_integer() {
        floor_usize(q)
    } else {
        None
    }
}

pub fn from_usize(n: usize) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_forms() {
        assert_eq!(parse("7").unwrap(), int(7));
        assert_eq!(parse("-3/6").unwrap(), ratio(-1, 2));
        assert!(parse("0.7").is_err());
        assert!(parse("1e3").is_err());
        assert!(parse("abc").is_err());
    }

    #[test]
    fn display_is_reduced() {
        assert_eq!(format(&ratio(4, 6)), "2/3");
        assert_eq!(format(&ratio(6, 3)), "2");
    }

    #[test]
    fn lcm_and_floor() {
        let qs = [ratio(1, 2), ratio(2, 3), int(5)];
        assert_eq!(lcm_of_denominators(&qs), BigInt::from(6));
        assert_eq!(floor_usize(&ratio(7, 2)), Some(3));
        assert_eq!(to_usize(&ratio(7, 2)), None);
        assert_eq!(to_usize(&int(4)), Some(4));
    }
}
