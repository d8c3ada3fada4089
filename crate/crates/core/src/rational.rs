//! Exact rational helpers shared by every module.
//!
//! All counts, weights and polynomial values are [`Rational`]s. Floats only
//! appear when a value is rendered for humans.

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Arbitrary-precision rational, always kept in lowest terms with a positive
/// denominator.
pub type Rational = num_rational::BigRational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RationalParseError {
    #[error("empty number")]
    Empty,
    #[error("invalid number `{0}`")]
    Invalid(String),
    #[error("zero denominator in `{0}`")]
    ZeroDenominator(String),
}

pub fn int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// `1 / 2^bits`.
pub fn pow2_inv(bits: u32) -> Rational {
    Rational::new(BigInt::one(), BigInt::one() << bits as usize)
}

/// Parses `a/b`, an integer, or a plain decimal (`0.25`, `-1.5e-3` is not
/// accepted) into an exact rational. No floating point is involved.
pub fn parse_rational(text: &str) -> Result<Rational, RationalParseError> {
    let s = text.trim();
    if s.is_empty() {
        return Err(RationalParseError::Empty);
    }
    let bad = || RationalParseError::Invalid(s.to_string());
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(RationalParseError::ZeroDenominator(s.to_string()));
        }
        return Ok(Rational::new(n, d));
    }
    let (negative, body) = match s.as_bytes()[0] {
        b'-' => (true, &s[1..]),
        b'+' => (false, &s[1..]),
        _ => (false, s),
    };
    let (whole, frac) = body.split_once('.').unwrap_or((body, ""));
    if (whole.is_empty() && frac.is_empty())
        || !whole.bytes().all(|b| b.is_ascii_digit())
        || !frac.bytes().all(|b| b.is_ascii_digit())
    {
        return Err(bad());
    }
    let digits = format!("{whole}{frac}");
    let mut num: BigInt = if digits.is_empty() {
        BigInt::zero()
    } else {
        digits.parse().map_err(|_| bad())?
    };
    if negative {
        num = -num;
    }
    let den = num_traits::pow(BigInt::from(10u32), frac.len());
    Ok(Rational::new(num, den))
}

/// Smallest integer `>= r`.
pub fn ceil_to_bigint(r: &Rational) -> BigInt {
    r.ceil().to_integer()
}

/// Lossy conversion for display.
pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // Very large numerators/denominators: scale both down first.
        let n = r.numer().bits() as i64;
        let d = r.denom().bits() as i64;
        let shift = (n.max(d) - 1000).max(0) as usize;
        let num = (r.numer() >> shift).to_f64().unwrap_or(0.0);
        let den = (r.denom() >> shift).to_f64().unwrap_or(f64::INFINITY);
        num / den
    })
}

/// Canonical `a/b` text (or `a` when the denominator is one).
pub fn to_text(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Largest `k / 2^bits` with `(k / 2^bits)^2 <= r`, for `r >= 0`.
pub fn sqrt_lower(r: &Rational, bits: u32) -> Rational {
    assert!(!r.is_negative(), "sqrt of a negative rational");
    // floor(sqrt(num * 4^bits / den))
    let scaled = (r.numer().magnitude() << (2 * bits as usize)) / r.denom().magnitude();
    let root: BigUint = scaled.sqrt();
    Rational::new(BigInt::from_biguint(Sign::Plus, root), BigInt::one() << bits as usize)
}

/// A closed interval `[lo, hi]` of rationals guaranteed to contain some real.
#[derive(Debug, Clone, PartialEq)]
pub struct Interval {
    pub lo: Rational,
    pub hi: Rational,
}

impl Interval {
    pub fn width(&self) -> Rational {
        &self.hi - &self.lo
    }
}

/// Enclosure of `atanh(z)` for `0 <= z <= 1/3` using `terms` series terms.
fn atanh_enclosure(z: &Rational, terms: u32) -> Interval {
    let z2 = z * z;
    let mut power = z.clone();
    let mut sum = Rational::zero();
    for j in 0..terms {
        sum += &power / int(2 * j as i64 + 1);
        power *= &z2;
    }
    // Remaining terms are bounded by z^(2J+1) / ((2J+1)(1 - z^2)).
    let tail = &power / (int(2 * terms as i64 + 1) * (Rational::one() - z2));
    Interval { lo: sum.clone(), hi: sum + tail }
}

/// Certified enclosure of the natural logarithm of `x > 0`.
pub fn ln_enclosure(x: &Rational, terms: u32) -> Interval {
    assert!(x.is_positive(), "logarithm of a non-positive rational");
    // x = 2^k * y with y in [1, 2)
    let mut k: i64 = x.numer().bits() as i64 - x.denom().bits() as i64;
    let scale = |k: i64| -> Rational {
        if k >= 0 {
            Rational::from_integer(BigInt::one() << k as usize)
        } else {
            Rational::new(BigInt::one(), BigInt::one() << (-k) as usize)
        }
    };
    let mut y = x / scale(k);
    let two = int(2);
    while y >= two {
        y /= &two;
        k += 1;
    }
    while y < Rational::one() {
        y *= &two;
        k -= 1;
    }
    let one = Rational::one();
    let z = (&y - &one) / (&y + &one);
    let ln_y = atanh_enclosure(&z, terms);
    let ln2 = atanh_enclosure(&ratio(1, 3), terms);
    let two_k = int(2 * k);
    let (ln2_for_lo, ln2_for_hi) = if k >= 0 { (&ln2.lo, &ln2.hi) } else { (&ln2.hi, &ln2.lo) };
    Interval {
        lo: &two * &ln_y.lo + &two_k * ln2_for_lo,
        hi: &two * &ln_y.hi + &two_k * ln2_for_hi,
    }
}

/// `ceil(scale * ln(x))` computed from a certified enclosure, refining the
/// enclosure until both ends agree on the ceiling. `scale` must be positive.
pub fn ceil_scaled_ln(scale: &Rational, x: &Rational) -> BigInt {
    assert!(scale.is_positive());
    let mut terms = 24;
    loop {
        let ln = ln_enclosure(x, terms);
        let lo = ceil_to_bigint(&(scale * &ln.lo));
        let hi = ceil_to_bigint(&(scale * &ln.hi));
        if lo == hi {
            return lo;
        }
        terms *= 2;
        assert!(terms < 1 << 14, "logarithm enclosure failed to converge");
    }
}

/// `ceil(a / b)` for non-negative integers given as rationals.
pub fn ceil_div(a: &Rational, b: &Rational) -> BigInt {
    ceil_to_bigint(&(a / b))
}
