//! Exact rational scalars and their textual "num/den" form.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Arbitrary-precision rational, always kept in lowest terms with a positive
/// denominator.
pub type ExactRational = BigRational;

pub fn rat(num: i64, den: i64) -> ExactRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(n: i64) -> ExactRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Parses `"p/q"` or `"p"`.
pub fn parse_rational(s: &str) -> Result<ExactRational> {
    let s = s.trim();
    let parse_int = |t: &str| {
        t.trim()
            .parse::<BigInt>()
            .map_err(|_| Error::Parse(format!("not an integer: {t:?}")))
    };
    match s.split_once('/') {
        Some((n, d)) => {
            let den = parse_int(d)?;
            if den.is_zero() {
                return Err(Error::Parse(format!("zero denominator in {s:?}")));
            }
            Ok(BigRational::new(parse_int(n)?, den))
        }
        None => Ok(BigRational::from_integer(parse_int(s)?)),
    }
}

/// Canonical text: `"p/q"`, with integers written as `"p/1"`.
pub fn format_rational(q: &ExactRational) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

/// Exact value of a finite binary float.
pub fn from_f64(x: f64) -> Result<ExactRational> {
    BigRational::from_float(x).ok_or_else(|| Error::NonFinite(format!("{x}")))
}

pub fn to_f64(q: &ExactRational) -> f64 {
    q.to_f64().unwrap_or_else(|| {
        // Ratio::to_f64 only fails when both parts overflow; fall back to
        // a scaled division.
        let shift = q.numer().bits().max(q.denom().bits()).saturating_sub(1000);
        let n = (q.numer() >> shift).to_f64().unwrap_or(f64::NAN);
        let d = (q.denom() >> shift).to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// `base^exp` by repeated squaring.
pub fn pow(base: &ExactRational, mut exp: u64) -> ExactRational {
    let mut acc = ExactRational::one();
    let mut b = base.clone();
    while exp > 0 {
        if exp & 1 == 1 {
            acc *= &b;
        }
        exp >>= 1;
        if exp > 0 {
            b = &b * &b;
        }
    }
    acc
}

pub fn max_abs<'a>(values: impl IntoIterator<Item = &'a ExactRational>) -> ExactRational {
    values
        .into_iter()
        .map(|v| v.abs())
        .fold(ExactRational::zero(), |a, b| if b > a { b } else { a })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_format() {
        assert_eq!(parse_rational("6/8").unwrap(), rat(3, 4));
        assert_eq!(parse_rational("-5").unwrap(), int(-5));
        assert_eq!(parse_rational(" 2 / -4 ").unwrap(), rat(-1, 2));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
        assert_eq!(format_rational(&rat(-2, 4)), "-1/2");
        assert_eq!(format_rational(&ExactRational::zero()), "0/1");
    }

    #[test]
    fn float_conversion_is_exact() {
        assert_eq!(from_f64(0.1).unwrap() * int(1 << 30), from_f64(0.1 * (1u64 << 30) as f64).unwrap());
        assert_eq!(from_f64(0.375).unwrap(), rat(3, 8));
        assert!(from_f64(f64::NAN).is_err());
    }

    #[test]
    fn power_by_squaring() {
        assert_eq!(pow(&rat(2, 3), 5), rat(32, 243));
        assert_eq!(pow(&rat(-1, 2), 0), int(1));
        assert_eq!(pow(&ExactRational::zero(), 0), int(1));
    }

    #[test]
    fn huge_ratio_to_f64() {
        let big = pow(&int(3), 3000);
        let q = (big.clone() + int(1)) / big;
        assert_eq!(to_f64(&q), 1.0);
    }
}
