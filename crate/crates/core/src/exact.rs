//! Exact rational arithmetic over powers of `r`.
//!
//! Kraft sums `Σ r^{−j}` and the weight functional of exponent sequences are
//! evaluated here without rounding, so membership and ordering decisions on
//! grid vectors never depend on floating point.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

/// `r^exponent` as an exact rational (`exponent` may be negative).
pub fn power_of_r(r: u32, exponent: i64) -> BigRational {
    let base = BigInt::from(r);
    let magnitude = base.pow(exponent.unsigned_abs() as u32);
    if exponent >= 0 {
        BigRational::from_integer(magnitude)
    } else {
        BigRational::new(BigInt::one(), magnitude)
    }
}

/// `Σ r^{−level}` over the given levels.
pub fn kraft_sum<I>(levels: I, r: u32) -> BigRational
where
    I: IntoIterator<Item = i32>,
{
    // Common denominator r^D with D ≥ every level, so each term is an
    // integer multiple r^{D − level}.
    let levels: Vec<i64> = levels.into_iter().map(i64::from).collect();
    let deepest = levels.iter().copied().max().unwrap_or(0).max(0);
    let base = BigInt::from(r);
    let mut numerator = BigInt::zero();
    for &l in &levels {
        numerator += base.pow((deepest - l) as u32);
    }
    BigRational::new(numerator, base.pow(deepest as u32))
}

/// Compare `Σ r^{−level}` with 1.
pub fn kraft_cmp_one<I>(levels: I, r: u32) -> Ordering
where
    I: IntoIterator<Item = i32>,
{
    kraft_sum(levels, r).cmp(&BigRational::one())
}

/// Digits of the residual `1 − Σ r^{−level}` in base `r`, returned as
/// `(level, count)` pairs with `1 ≤ count < r`, shallowest level first.
/// `None` when the sum already exceeds 1.
pub fn kraft_residual_digits(levels: &[i32], r: u32) -> Option<Vec<(i32, u32)>> {
    if levels.iter().any(|&l| l < 0) {
        return None;
    }
    let deepest = levels.iter().copied().max().unwrap_or(0);
    let base = BigInt::from(r);
    let full = base.pow(deepest as u32);
    let mut used = BigInt::zero();
    for &l in levels {
        used += base.pow((deepest - l) as u32);
    }
    if used > full {
        return None;
    }
    let mut rest = full - used;
    let mut digits = Vec::new();
    let mut level = deepest;
    while !rest.is_zero() {
        let digit = (&rest % &base).to_u32().expect("digit below r");
        if digit > 0 {
            digits.push((level, digit));
        }
        rest /= &base;
        level -= 1;
    }
    digits.reverse();
    Some(digits)
}

/// Lossy conversion for reporting.
pub fn to_f64(value: &BigRational) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}
