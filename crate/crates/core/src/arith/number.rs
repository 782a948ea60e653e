//! Exact rationals, their textual forms and reduction modulo one.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

/// Precision used for irrational expressions such as `sqrt(2)` when the
/// document does not declare one.
pub const DEFAULT_PRECISION: u32 = 40;

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Fractional part, always in `[0, 1)`.
pub fn frac(x: &Rational) -> Rational {
    x - x.floor()
}

pub fn is_unit_interval(x: &Rational) -> bool {
    !x.is_negative() && x < &Rational::one()
}

pub fn to_f64(x: &Rational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Dyadic rational `num / 2^bits`.
pub fn dyadic(num: u64, bits: u32) -> Rational {
    Rational::new(BigInt::from(num), BigInt::one() << bits)
}

/// Formats as `p/q`, or `p` for integers.
pub fn fmt_rat(x: &Rational) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

pub fn is_power_of_two(n: &BigInt) -> bool {
    let n = n.abs();
    !n.is_zero() && (&n & (&n - 1u32)).is_zero()
}

/// Parses a number from one of the accepted textual forms:
///
/// * `p/q` and integers, exact;
/// * decimals such as `0.125`, exact, with at most `precision` fractional
///   digits when a precision is declared;
/// * `sqrt(n)` or `sqrt(n)/d`, truncated to `precision` decimal digits.
///
/// `field` names the document location for error reporting.
pub fn parse_number(text: &str, precision: Option<u32>, field: &str) -> Result<Rational> {
    let s = text.trim();
    if s.is_empty() {
        return Err(Error::spec(field, "empty number"));
    }
    let bad = |why: &str| Error::spec(field, format!("cannot parse `{text}`: {why}"));

    if let Some(rest) = s.strip_prefix("sqrt(") {
        let close = rest.find(')').ok_or_else(|| bad("missing `)`"))?;
        let radicand: BigUint = rest[..close].trim().parse().map_err(|_| bad("bad radicand"))?;
        let tail = rest[close + 1..].trim();
        let divisor: BigUint = if tail.is_empty() {
            BigUint::one()
        } else {
            let d = tail.strip_prefix('/').ok_or_else(|| bad("expected `/d` after sqrt"))?;
            d.trim().parse().map_err(|_| bad("bad divisor"))?
        };
        if divisor.is_zero() {
            return Err(bad("zero divisor"));
        }
        let p = precision.unwrap_or(DEFAULT_PRECISION);
        let scale = BigUint::from(10u32).pow(p);
        // floor(sqrt(r) * 10^p / d) / 10^p
        let root = (radicand * &scale * &scale).sqrt();
        let digits = root / divisor;
        return Ok(Rational::new(BigInt::from(digits), BigInt::from(scale)));
    }

    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| bad("bad numerator"))?;
        let q: BigInt = q.trim().parse().map_err(|_| bad("bad denominator"))?;
        if q.is_zero() {
            return Err(bad("zero denominator"));
        }
        return Ok(Rational::new(p, q));
    }

    let (neg, body) = match s.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (whole, fractional) = match body.split_once('.') {
        Some((w, f)) => (w, f),
        None => (body, ""),
    };
    let all_digits = |t: &str| t.chars().all(|c| c.is_ascii_digit());
    if (whole.is_empty() && fractional.is_empty()) || !all_digits(whole) || !all_digits(fractional)
    {
        return Err(bad("not a number"));
    }
    if let Some(p) = precision {
        if fractional.len() > p as usize {
            return Err(Error::spec(
                field,
                format!(
                    "`{text}` has {} fractional digits, more than the declared precision {p}",
                    fractional.len()
                ),
            ));
        }
    }
    let digits = format!("{}{}", if whole.is_empty() { "0" } else { whole }, fractional);
    let mut numer: BigInt = digits.parse().map_err(|_| bad("not a number"))?;
    if neg {
        numer = -numer;
    }
    let denom = BigInt::from(10u32).pow(fractional.len() as u32);
    Ok(Rational::new(numer, denom))
}

/// Least common multiple of the denominators.
pub fn common_denominator<'a>(xs: impl IntoIterator<Item = &'a Rational>) -> BigInt {
    xs.into_iter()
        .fold(BigInt::one(), |acc, x| acc.lcm(x.denom()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fraction_and_decimal() {
        assert_eq!(parse_number("3/6", None, "x").unwrap(), rat(1, 2));
        assert_eq!(parse_number("-0.25", None, "x").unwrap(), rat(-1, 4));
        assert_eq!(parse_number("7", None, "x").unwrap(), int(7));
    }

    #[test]
    fn decimal_longer_than_precision_is_rejected() {
        let err = parse_number("0.12345", Some(3), "params.alpha").unwrap_err();
        match err {
            Error::Spec { field, .. } => assert_eq!(field, "params.alpha"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn sqrt_truncates_at_precision() {
        let r = parse_number("sqrt(2)/2", Some(40), "x").unwrap();
        assert_eq!(
            fmt_rat(&r),
            fmt_rat(&parse_number("0.7071067811865475244008443621048490392848", None, "x").unwrap())
        );
        let r = parse_number("sqrt(2)", Some(10), "x").unwrap();
        assert_eq!(r, parse_number("1.4142135623", None, "x").unwrap());
    }

    #[test]
    fn frac_is_in_unit_interval() {
        assert_eq!(frac(&rat(-1, 3)), rat(2, 3));
        assert_eq!(frac(&rat(7, 3)), rat(1, 3));
        assert!(is_unit_interval(&frac(&rat(-5, 1))));
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_number("abc", None, "x").is_err());
        assert!(parse_number("1/0", None, "x").is_err());
        assert!(parse_number("sqrt(2", None, "x").is_err());
    }
}
