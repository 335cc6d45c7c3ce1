//! Scalar abstraction shared by every analytical module.
//!
//! The pipeline only needs field arithmetic, ordering and absolute values, so
//! it runs unchanged on binary floats and on exact rationals. Prices parsed
//! from decimal text are represented exactly by [`Exact`], which makes every
//! ratio of price differences exactly invariant under positive affine maps
//! with decimal coefficients.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Num, One, Signed, ToPrimitive, Zero};

/// Exact rational scalar.
pub type Exact = BigRational;

/// Numeric type the analysis is generic over.
pub trait Scalar: Clone + PartialOrd + Debug + Num + Signed + Send + Sync + 'static {
    /// Parses a plain decimal literal (`-12.5`, `1e-3`). Non-finite values are rejected.
    fn parse_decimal(text: &str) -> Option<Self>;

    /// Converts a configuration constant through its shortest decimal form, so
    /// `0.382` becomes exactly `191/500` for exact scalars.
    fn from_config(value: f64) -> Option<Self> {
        if !value.is_finite() {
            return None;
        }
        Self::parse_decimal(&value.to_string())
    }

    fn from_count(n: usize) -> Self;

    fn to_f64(&self) -> f64;

    /// Shortest plain decimal rendering used for CSV output and digests.
    fn to_plain_string(&self) -> String;
}

/// Larger of two values, preferring `a` on ties.
pub fn max_of<T: Scalar>(a: T, b: T) -> T {
    if b > a {
        b
    } else {
        a
    }
}

/// Smaller of two values, preferring `a` on ties.
pub fn min_of<T: Scalar>(a: T, b: T) -> T {
    if b < a {
        b
    } else {
        a
    }
}

macro_rules! float_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            fn parse_decimal(text: &str) -> Option<Self> {
                let v: $t = text.trim().parse().ok()?;
                v.is_finite().then_some(v)
            }

            fn from_count(n: usize) -> Self {
                n as $t
            }

            fn to_f64(&self) -> f64 {
                *self as f64
            }

            fn to_plain_string(&self) -> String {
                if *self == 0.0 {
                    "0".to_string()
                } else {
                    self.to_string()
                }
            }
        }
    };
}

float_scalar!(f32);
float_scalar!(f64);

impl Scalar for BigRational {
    fn parse_decimal(text: &str) -> Option<Self> {
        parse_decimal_rational(text.trim())
    }

    fn from_count(n: usize) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn to_plain_string(&self) -> String {
        terminating_decimal(self).unwrap_or_else(|| Scalar::to_f64(self).to_plain_string())
    }
}

fn parse_decimal_rational(text: &str) -> Option<BigRational> {
    let (mantissa, exponent) = match text.find(['e', 'E']) {
        Some(pos) => (&text[..pos], text[pos + 1..].parse::<i32>().ok()?),
        None => (text, 0),
    };
    let (negative, digits) = match mantissa.as_bytes().first()? {
        b'-' => (true, &mantissa[1..]),
        b'+' => (false, &mantissa[1..]),
        _ => (false, mantissa),
    };
    let (int_part, frac_part) = match digits.find('.') {
        Some(pos) => (&digits[..pos], &digits[pos + 1..]),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let all_digits = format!("{int_part}{frac_part}");
    let mut numer = BigInt::parse_bytes(all_digits.as_bytes(), 10)?;
    if negative {
        numer = -numer;
    }
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10u32);
    let value = if scale >= 0 {
        BigRational::from_integer(numer * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(numer, num_traits::pow(ten, scale.unsigned_abs() as usize))
    };
    Some(value)
}

/// Exact decimal expansion when the reduced denominator only has factors 2 and 5.
fn terminating_decimal(value: &BigRational) -> Option<String> {
    if value.is_zero() {
        return Some("0".to_string());
    }
    let mut denom = value.denom().clone();
    let two = BigInt::from(2u32);
    let five = BigInt::from(5u32);
    let (mut twos, mut fives) = (0usize, 0usize);
    while denom.is_multiple_of(&two) {
        denom /= &two;
        twos += 1;
    }
    while denom.is_multiple_of(&five) {
        denom /= &five;
        fives += 1;
    }
    if !denom.is_one() {
        return None;
    }
    let places = twos.max(fives);
    let scale = num_traits::pow(BigInt::from(10u32), places);
    let scaled = value.numer() * (scale / value.denom());
    let digits = scaled.abs().to_string();
    let sign = if scaled.is_negative() { "-" } else { "" };
    if places == 0 {
        return Some(format!("{sign}{digits}"));
    }
    let padded = format!("{digits:0>width$}", width = places + 1);
    let (int_part, frac_part) = padded.split_at(padded.len() - places);
    let frac_part = frac_part.trim_end_matches('0');
    if frac_part.is_empty() {
        Some(format!("{sign}{int_part}"))
    } else {
        Some(format!("{sign}{int_part}.{frac_part}"))
    }
}
