//! High-precision floating point for transcendental terms.
//!
//! The working precision is `ASTPROVE_PRECISION` significant decimal digits
//! (default 30) plus guard bits.

use std::cell::RefCell;

use astro_float::{BigFloat, Consts, Radix, RoundingMode};

use crate::rational::Rational;

pub const DEFAULT_DIGITS: usize = 30;
pub const PRECISION_ENV: &str = "ASTPROVE_PRECISION";

const RM: RoundingMode = RoundingMode::ToEven;

/// Decimal digits requested through the environment, clamped to [16, 1000].
pub fn digits() -> usize {
    std::env::var(PRECISION_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .map(|d| d.clamp(16, 1000))
        .unwrap_or(DEFAULT_DIGITS)
}

/// Evaluation context: precision in bits plus the constants cache.
pub struct Hp {
    bits: usize,
    cc: RefCell<Consts>,
}

impl Default for Hp {
    fn default() -> Self {
        Hp::new()
    }
}

impl Hp {
    pub fn new() -> Self {
        Hp::with_digits(digits())
    }

    pub fn with_digits(d: usize) -> Self {
        // log2(10) ~ 3.33 bits per digit, rounded up to whole words
        let bits = ((d * 34) / 10 + 64).div_ceil(64) * 64;
        Hp { bits, cc: RefCell::new(Consts::new().expect("constants cache")) }
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn int(&self, v: i64) -> BigFloat {
        BigFloat::from_i64(v, self.bits)
    }

    pub fn f64(&self, v: f64) -> BigFloat {
        BigFloat::from_f64(v, self.bits)
    }

    pub fn rational(&self, q: &Rational) -> BigFloat {
        let n = BigFloat::parse(&q.numer().to_string(), Radix::Dec, self.bits, RM, &mut self.cc.borrow_mut());
        let d = BigFloat::parse(&q.denom().to_string(), Radix::Dec, self.bits, RM, &mut self.cc.borrow_mut());
        n.div(&d, self.bits, RM)
    }

    pub fn add(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.add(b, self.bits, RM)
    }

    pub fn sub(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.sub(b, self.bits, RM)
    }

    pub fn mul(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.mul(b, self.bits, RM)
    }

    pub fn div(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.div(b, self.bits, RM)
    }

    pub fn exp(&self, a: &BigFloat) -> BigFloat {
        a.exp(self.bits, RM, &mut self.cc.borrow_mut())
    }

    pub fn ln(&self, a: &BigFloat) -> BigFloat {
        a.ln(self.bits, RM, &mut self.cc.borrow_mut())
    }

    pub fn sqrt(&self, a: &BigFloat) -> BigFloat {
        a.sqrt(self.bits, RM)
    }

    /// `a^b` for positive `a`.
    pub fn pow(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.pow(b, self.bits, RM, &mut self.cc.borrow_mut())
    }

    /// `a^b = exp(b ln a)` computed without overflow for huge `b` and `a`
    /// close to 1, through `ln(1+x)` with `x = a - 1` small.
    pub fn pow_near_one(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        let l = self.ln(a);
        let e = self.mul(&l, b);
        self.exp(&e)
    }

    pub fn lt(&self, a: &BigFloat, b: &BigFloat) -> bool {
        a.cmp(b).is_some_and(|c| c < 0)
    }

    pub fn le(&self, a: &BigFloat, b: &BigFloat) -> bool {
        a.cmp(b).is_some_and(|c| c <= 0)
    }

    /// Nearest `f64`.
    pub fn to_f64(&self, a: &BigFloat) -> f64 {
        if a.is_zero() {
            return 0.0;
        }
        a.format(Radix::Dec, RM, &mut self.cc.borrow_mut())
            .ok()
            .and_then(|s| s.parse::<f64>().ok())
            .unwrap_or(f64::NAN)
    }

    /// The smallest `f64` not below `a`, then rounded up to `sig` significant
    /// decimal digits, so the result is never below the true value of `a`.
    pub fn to_f64_up(&self, a: &BigFloat, sig: usize) -> f64 {
        let mut f = self.to_f64(a);
        if !f.is_finite() {
            return f;
        }
        while self.lt(&self.f64(f), a) {
            f = f.next_up();
        }
        round_up_decimal(f, sig)
    }

    /// `e^{q}` for a rational `q`.
    pub fn exp_rational(&self, q: &Rational) -> BigFloat {
        let x = self.rational(q);
        self.exp(&x)
    }
}

/// Smallest decimal with `sig` significant digits that is `>= f`, as the
/// nearest `f64` (which is still `>= f` because rounding is monotone).
pub fn round_up_decimal(f: f64, sig: usize) -> f64 {
    if f == 0.0 || !f.is_finite() {
        return f;
    }
    let s = format!("{:.*e}", sig.saturating_sub(1), f);
    let g: f64 = s.parse().unwrap_or(f);
    if g >= f {
        return g;
    }
    let (mant, exp) = s.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("exponent");
    let negative = mant.starts_with('-');
    let digits: String = mant.chars().filter(|c| c.is_ascii_digit()).collect();
    let mut n: u128 = digits.parse().expect("digits");
    // moving towards +inf: larger magnitude for positives, smaller for negatives
    if negative {
        n -= 1;
    } else {
        n += 1;
    }
    let scale = exp - (digits.len() as i32 - 1);
    let text = format!("{}{}e{}", if negative { "-" } else { "" }, n, scale);
    text.parse().unwrap_or(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    #[test]
    fn exp_matches_f64() {
        let hp = Hp::with_digits(30);
        let x = hp.exp_rational(&ratio(-1, 5));
        assert!((hp.to_f64(&x) - (-0.2f64).exp()).abs() < 1e-16);
    }

    #[test]
    fn upward_rounding_never_below() {
        let hp = Hp::with_digits(40);
        for q in [ratio(1, 3), ratio(2, 7), ratio(123456789, 1000), ratio(1, 1_000_000_007)] {
            let x = hp.rational(&q);
            let up = hp.to_f64_up(&x, 15);
            assert!(hp.le(&x, &hp.f64(up)), "{q}");
            assert!(up - crate::rational::to_f64(&q) <= crate::rational::to_f64(&q) * 1e-14);
        }
    }

    #[test]
    fn decimal_round_up() {
        assert_eq!(round_up_decimal(0.123_456_789_012_345_67, 3), 0.124);
        assert_eq!(round_up_decimal(0.5, 3), 0.5);
        assert_eq!(round_up_decimal(-0.1239, 3), -0.123);
    }
}
