//! Arithmetic modes shared by behaviors, expressions and the LP kernel.

use std::fmt::{self, Debug, Display};
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

/// Exact rational number used throughout the exact code paths.
pub type Rational = BigRational;

/// Which arithmetic a value lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Rational,
    Double,
}

impl Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Rational => f.write_str("rational"),
            Mode::Double => f.write_str("double"),
        }
    }
}

/// Absolute tolerance for double-mode equality checks on behaviors.
pub const BEHAVIOR_TOL: f64 = 1e-12;

/// A field element usable by every generic algorithm in the crate.
///
/// Comparisons through [`Scalar::cmp_zero`] are exact for [`Rational`] and
/// tolerance-based for `f64`; the tolerance is supplied by the caller so the
/// LP kernel and behavior checks can use different thresholds.
pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + PartialOrd
    + Send
    + Sync
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + 'static
{
    const MODE: Mode;

    fn from_i64(v: i64) -> Self;
    fn from_ratio(num: i64, den: i64) -> Self;
    fn from_rational(r: &Rational) -> Self;
    /// Exact binary value of a double (rationals) or the double itself.
    fn from_f64(v: f64) -> Self;
    fn to_f64(&self) -> f64;
    /// Exact value as a rational (a double's binary expansion is exact).
    fn to_rational(&self) -> Rational;

    /// `self -= a * b`, the hot operation of elimination and pivoting.
    fn sub_mul_assign(&mut self, a: &Self, b: &Self);
    /// `self += a * b`.
    fn add_mul_assign(&mut self, a: &Self, b: &Self);

    /// Sign of `self` where magnitudes up to `tol` count as zero (ignored in
    /// exact mode).
    fn sign_tol(&self, tol: f64) -> i8;

    fn is_zero_tol(&self, tol: f64) -> bool {
        self.sign_tol(tol) == 0
    }
    fn is_positive_tol(&self, tol: f64) -> bool {
        self.sign_tol(tol) > 0
    }
    fn is_negative_tol(&self, tol: f64) -> bool {
        self.sign_tol(tol) < 0
    }

    fn abs_val(&self) -> Self {
        if self.sign_tol(0.0) < 0 {
            -self.clone()
        } else {
            self.clone()
        }
    }

    /// Textual form used by the file formats: `"num/den"` or a decimal.
    fn to_text(&self) -> String;
}

impl Scalar for f64 {
    const MODE: Mode = Mode::Double;

    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }
    fn from_rational(r: &Rational) -> Self {
        rational_to_f64(r)
    }
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn to_rational(&self) -> Rational {
        Rational::from_float(*self).unwrap_or_else(Rational::zero)
    }
    #[inline]
    fn sub_mul_assign(&mut self, a: &Self, b: &Self) {
        *self -= a * b;
    }
    #[inline]
    fn add_mul_assign(&mut self, a: &Self, b: &Self) {
        *self += a * b;
    }
    #[inline]
    fn sign_tol(&self, tol: f64) -> i8 {
        if *self > tol {
            1
        } else if *self < -tol {
            -1
        } else {
            0
        }
    }
    fn to_text(&self) -> String {
        format!("{self:?}")
    }
}

impl Scalar for Rational {
    const MODE: Mode = Mode::Rational;

    fn from_i64(v: i64) -> Self {
        Rational::from_integer(BigInt::from(v))
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        Rational::new(BigInt::from(num), BigInt::from(den))
    }
    fn from_rational(r: &Rational) -> Self {
        r.clone()
    }
    fn from_f64(v: f64) -> Self {
        Rational::from_float(v).unwrap_or_else(Rational::zero)
    }
    fn to_f64(&self) -> f64 {
        rational_to_f64(self)
    }
    fn to_rational(&self) -> Rational {
        self.clone()
    }
    #[inline]
    fn sub_mul_assign(&mut self, a: &Self, b: &Self) {
        if a.is_zero() || b.is_zero() {
            return;
        }
        *self -= a * b;
    }
    #[inline]
    fn add_mul_assign(&mut self, a: &Self, b: &Self) {
        if a.is_zero() || b.is_zero() {
            return;
        }
        *self += a * b;
    }
    #[inline]
    fn sign_tol(&self, _tol: f64) -> i8 {
        if self.is_positive() {
            1
        } else if self.is_negative() {
            -1
        } else {
            0
        }
    }
    fn to_text(&self) -> String {
        if self.denom().is_one() {
            self.numer().to_string()
        } else {
            format!("{}/{}", self.numer(), self.denom())
        }
    }
}

/// Converts an exact rational to the nearest double, robust to huge
/// numerators and denominators.
pub fn rational_to_f64(r: &Rational) -> f64 {
    if let (Some(n), Some(d)) = (r.numer().to_f64(), r.denom().to_f64()) {
        if n.is_finite() && d.is_finite() && d != 0.0 {
            return n / d;
        }
    }
    // Scale both down until they fit.
    let bits_n = r.numer().bits() as i64;
    let bits_d = r.denom().bits() as i64;
    let shift_n = (bits_n - 900).max(0) as usize;
    let shift_d = (bits_d - 900).max(0) as usize;
    let n = (r.numer() >> shift_n).to_f64().unwrap_or(0.0);
    let d = (r.denom() >> shift_d).to_f64().unwrap_or(1.0);
    n / d * 2f64.powi((shift_n as i64 - shift_d as i64) as i32)
}

/// Parses the textual form written by [`Scalar::to_text`].
pub fn parse_scalar<T: Scalar>(text: &str) -> Option<T> {
    match T::MODE {
        Mode::Rational => parse_rational(text).map(|r| T::from_rational(&r)),
        Mode::Double => text.trim().parse::<f64>().ok().map(T::from_f64),
    }
}

/// Parses `"p/q"`, `"p"` or a decimal literal (`"0.125"`, `"-2.5e-3"`) into
/// an exact rational. Decimals are converted exactly from their digits.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let t = text.trim();
    if t.is_empty() {
        return None;
    }
    if let Some((n, d)) = t.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(Rational::new(n, d));
    }
    if let Ok(n) = t.parse::<BigInt>() {
        return Some(Rational::from_integer(n));
    }
    parse_decimal(t)
}

fn parse_decimal(t: &str) -> Option<Rational> {
    let (mantissa, exponent) = match t.find(['e', 'E']) {
        Some(i) => (&t[..i], t[i + 1..].parse::<i32>().ok()?),
        None => (t, 0),
    };
    let (neg, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits: BigInt = format!("{int_part}{frac_part}0").parse::<BigInt>().ok()? / 10;
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let mut value = if scale >= 0 {
        Rational::from_integer(digits * num_traits::pow(ten, scale as usize))
    } else {
        Rational::new(digits, num_traits::pow(ten, (-scale) as usize))
    };
    if neg {
        value = -value;
    }
    Some(value)
}

/// Best rational approximation of `x` with denominator at most `max_den`
/// (continued fractions). This is the only double→rational path in the
/// crate and it is always explicit.
pub fn snap(x: f64, max_den: u64) -> Rational {
    assert!(x.is_finite(), "cannot snap a non-finite value");
    assert!(max_den >= 1);
    let neg = x < 0.0;
    let mut v = x.abs();
    let (mut p0, mut q0, mut p1, mut q1) = (0u128, 1u128, 1u128, 0u128);
    let max_den = max_den as u128;
    for _ in 0..64 {
        let a = v.floor();
        if a > 1e18 {
            break;
        }
        let a_int = a as u128;
        let p2 = a_int * p1 + p0;
        let q2 = a_int * q1 + q0;
        if q2 > max_den {
            // Best semiconvergent within the bound.
            let k = (max_den - q0) / q1;
            let (ps, qs) = (k * p1 + p0, k * q1 + q0);
            let err_semi = (ps as f64 / qs as f64 - x.abs()).abs();
            let err_conv = (p1 as f64 / q1 as f64 - x.abs()).abs();
            if k > 0 && err_semi < err_conv {
                p1 = ps;
                q1 = qs;
            }
            break;
        }
        p0 = p1;
        q0 = q1;
        p1 = p2;
        q1 = q2;
        let frac = v - a;
        if frac < 1e-15 {
            break;
        }
        v = 1.0 / frac;
    }
    let r = Rational::new(BigInt::from(p1), BigInt::from(q1));
    if neg {
        -r
    } else {
        r
    }
}

/// Convenience constructor for exact rationals.
pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::from_ratio(num, den)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_textual_forms() {
        assert_eq!(parse_rational("73/7"), Some(ratio(73, 7)));
        assert_eq!(parse_rational("-4"), Some(ratio(-4, 1)));
        assert_eq!(parse_rational("0.125"), Some(ratio(1, 8)));
        assert_eq!(parse_rational("-2.5e-1"), Some(ratio(-1, 4)));
        assert_eq!(parse_rational("1e2"), Some(ratio(100, 1)));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("abc"), None);
        assert_eq!(parse_rational(""), None);
    }

    #[test]
    fn text_round_trip() {
        for r in [ratio(267, 19), ratio(-1, 3), ratio(5, 1)] {
            assert_eq!(parse_rational(&r.to_text()), Some(r));
        }
    }

    #[test]
    fn snap_finds_small_fractions() {
        assert_eq!(snap(0.333333333333, 100), ratio(1, 3));
        assert_eq!(snap(-0.7071067811865476, 1000), ratio(-408, 577));
        assert_eq!(snap(2.0, 10), ratio(2, 1));
        assert_eq!(snap(0.0, 10), ratio(0, 1));
    }

    #[test]
    fn huge_rationals_convert() {
        let big = Rational::new(BigInt::from(3) << 2000usize, BigInt::from(1) << 2001usize);
        assert!((rational_to_f64(&big) - 1.5).abs() < 1e-12);
    }
}
