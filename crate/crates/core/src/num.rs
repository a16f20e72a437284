//! Scalar abstractions shared by the numeric modules.
//!
//! Two families are used throughout the crate:
//!
//! * [`Real`] is a floating point type (`f32` or `f64`) used for
//!   probabilities, TF-IDF weights, centroids and divergences.
//! * [`Scalar`] is anything an expression tree can be evaluated in. This
//!   covers the floats and the exact [`Rational`] type used when the answer
//!   of a problem must be reproduced without rounding.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, FromPrimitive, Num, One, Signed, ToPrimitive, Zero};

/// Arbitrary precision rational number.
pub type Rational = BigRational;

/// Floating point type used for statistics.
pub trait Real:
    'static + Float + FromPrimitive + Sum + Debug + Display + Default + Send + Sync
{
    /// Converts a literal, panicking only if the literal is not representable.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal is representable")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count is representable")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Type an expression tree can be evaluated in.
pub trait Scalar: Num + Clone + Debug {
    fn from_rational(value: &Rational) -> Self;
}

impl Scalar for Rational {
    fn from_rational(value: &Rational) -> Self {
        value.clone()
    }
}

impl Scalar for f64 {
    fn from_rational(value: &Rational) -> Self {
        value.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {
    fn from_rational(value: &Rational) -> Self {
        value.to_f32().unwrap_or(f32::NAN)
    }
}

/// Parses a plain decimal literal such as `12`, `0.25` or `-3.5` exactly.
pub fn parse_decimal(text: &str) -> Option<Rational> {
    let (negative, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text),
    };
    if body.is_empty() {
        return None;
    }
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let numer: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().ok()? };
    let denom = num_traits::pow(BigInt::from(10u32), frac_part.len());
    let value = Rational::new(numer, denom);
    Some(if negative { -value } else { value })
}

/// Renders a rational as a finite decimal when possible, otherwise as `a/b`.
pub fn format_rational(value: &Rational) -> String {
    if value.is_integer() {
        return value.to_integer().to_string();
    }
    let mut denom = value.denom().clone();
    let two = BigInt::from(2u32);
    let five = BigInt::from(5u32);
    let mut places = 0usize;
    let mut twos = 0usize;
    let mut fives = 0usize;
    while (&denom % &two).is_zero() {
        denom /= &two;
        twos += 1;
    }
    while (&denom % &five).is_zero() {
        denom /= &five;
        fives += 1;
    }
    if !denom.is_one() {
        return format!("{}/{}", value.numer(), value.denom());
    }
    places += twos.max(fives);
    let scaled = value * Rational::from_integer(num_traits::pow(BigInt::from(10u32), places));
    let digits = scaled.to_integer().abs().to_string();
    let digits = format!("{digits:0>width$}", width = places + 1);
    let (int_part, frac_part) = digits.split_at(digits.len() - places);
    let sign = if value.is_negative() { "-" } else { "" };
    format!("{sign}{int_part}.{frac_part}")
}

/// Lossy conversion used for reporting.
pub fn rational_to_f64(value: &Rational) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}

/// Exact conversion of a finite float (every finite f64 is a dyadic rational).
pub fn rational_from_f64(value: f64) -> Option<Rational> {
    Rational::from_float(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    #[test]
    fn decimal_literals_are_exact() {
        assert_eq!(parse_decimal("12"), Some(r(12, 1)));
        assert_eq!(parse_decimal("0.125"), Some(r(1, 8)));
        assert_eq!(parse_decimal("-3.5"), Some(r(-7, 2)));
        assert_eq!(parse_decimal(".5"), Some(r(1, 2)));
        assert_eq!(parse_decimal("1e3"), None);
        assert_eq!(parse_decimal(""), None);
        assert_eq!(parse_decimal("."), None);
    }

    #[test]
    fn rationals_render_as_decimals_when_finite() {
        assert_eq!(format_rational(&r(15, 1)), "15");
        assert_eq!(format_rational(&r(1, 8)), "0.125");
        assert_eq!(format_rational(&r(-7, 2)), "-3.5");
        assert_eq!(format_rational(&r(1, 3)), "1/3");
        assert_eq!(format_rational(&r(3, 100)), "0.03");
    }

    #[test]
    fn scalar_conversions() {
        assert_eq!(<f64 as Scalar>::from_rational(&r(1, 4)), 0.25);
        assert_eq!(<f32 as Scalar>::from_rational(&r(3, 2)), 1.5);
        assert_eq!(f64::lit(0.5), 0.5);
        assert_eq!(f32::from_count(3), 3.0);
    }
}
