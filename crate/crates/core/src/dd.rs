//! Double-double arithmetic (about 32 significant digits).
//!
//! Used where a gradient must be evaluated past the cancellation limit of
//! `f64`, e.g. `1 + 2xy` at points where `2xy` is `-1` to sixteen digits.

use core::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, libm::fma(a, b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    pub fn new(hi: f64, lo: f64) -> Self {
        let (h, l) = quick_two_sum(hi, lo);
        Dd { hi: h, lo: l }
    }

    pub fn from_f64(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn mul_f64(self, b: f64) -> Dd {
        let (p, e) = two_prod(self.hi, b);
        let e = e + self.lo * b;
        let (h, l) = quick_two_sum(p, e);
        Dd { hi: h, lo: l }
    }

    /// `1 / self` by one Newton correction of the `f64` reciprocal.
    pub fn recip(self) -> Dd {
        let q = Dd::from_f64(1.0 / self.hi);
        let r = Dd::ONE - self * q;
        q + q * r
    }

    pub fn powi(self, k: u32) -> Dd {
        let mut base = self;
        let mut e = k;
        let mut acc = Dd::ONE;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            e >>= 1;
        }
        acc
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, b: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (h, l) = quick_two_sum(s, e + f);
        Dd { hi: h, lo: l }
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, b: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, b.hi);
        let e = e + (self.hi * b.lo + self.lo * b.hi);
        let (h, l) = quick_two_sum(p, e);
        Dd { hi: h, lo: l }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_cancelled_low_bits() {
        // 1 + 2xy where xy = -1/2 up to the rounding of x
        let x = -5.0e-7_f64;
        let y = 1.0e6_f64;
        let naive = 1.0 + 2.0 * x * y;
        let dd = Dd::ONE + Dd::from_f64(x).mul_f64(y).mul_f64(2.0);
        // exact value of 1 + 2*x*y for the binary x and y, computed with an fma split
        let (p, e) = two_prod(x, y);
        let exact = (1.0 + 2.0 * p) + 2.0 * e;
        assert_eq!(dd.to_f64(), exact);
        assert!(naive == 0.0 || (naive - exact).abs() <= 2.3e-16);
    }

    #[test]
    fn arithmetic_identities() {
        let a = Dd::new(1.0, 1e-20);
        let b = Dd::from_f64(3.0);
        let c = a * b - b;
        assert!((c.to_f64() - 3e-20).abs() < 1e-35);
        assert_eq!(Dd::from_f64(2.0).powi(10).to_f64(), 1024.0);
        let third = Dd::from_f64(3.0).recip();
        let err = Dd::ONE - third * Dd::from_f64(3.0);
        assert!(err.to_f64().abs() < 1e-31);
    }
}
