//! Double-double arithmetic: an unevaluated sum of two f64 giving ~106
//! significand bits. The parameter recursion multiplies hundreds of factors
//! of the form (1 - p/L)^(N-1) with N close to L, which is exactly where
//! f64 alone starts shedding digits.
//!
//! Algorithms are the classical error-free transformations (Dekker/Knuth
//! two-sum, FMA-based two-product) plus Newton steps for division, square
//! root and logarithm, and a range-reduced Taylor series for exp.

use std::cmp::Ordering;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

pub const LN2: Dd = Dd { hi: 0.6931471805599453, lo: 2.3190468138462996e-17 };

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    pub fn new(hi: f64, lo: f64) -> Dd {
        let (s, e) = quick_two_sum(hi, lo);
        Dd { hi: s, lo: e }
    }

    pub fn from_f64(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    /// Exact embedding of a u64 (splits at 2^32).
    pub fn from_u64(x: u64) -> Dd {
        let hi32 = (x >> 32) as f64 * 4294967296.0;
        let lo32 = (x & 0xffff_ffff) as f64;
        Dd::from_f64(hi32) + Dd::from_f64(lo32)
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn abs(self) -> Dd {
        if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) {
            -self
        } else {
            self
        }
    }

    pub fn sqrt(self) -> Dd {
        if self.hi == 0.0 {
            return Dd::ZERO;
        }
        debug_assert!(self.hi > 0.0, "sqrt of negative double-double");
        let y = self.hi.sqrt();
        // One Newton step in dd: y + (a - y^2) / (2y).
        let yd = Dd::from_f64(y);
        yd + (self - yd * yd) / (yd + yd)
    }

    pub fn recip(self) -> Dd {
        Dd::ONE / self
    }

    pub fn ldexp(self, k: i32) -> Dd {
        fn scale(x: f64, k: i32) -> f64 {
            // k stays small here (|k| < 1100); powi on 2.0 is exact.
            x * 2f64.powi(k)
        }
        Dd { hi: scale(self.hi, k), lo: scale(self.lo, k) }
    }

    pub fn exp(self) -> Dd {
        if self.hi > 709.0 {
            return Dd::from_f64(f64::INFINITY);
        }
        if self.hi < -745.0 {
            return Dd::ZERO;
        }
        let k = (self.hi / LN2.hi).round();
        let r = self - LN2 * Dd::from_f64(k);
        // |r| <= ln2/2; Taylor to below 2^-110.
        let mut sum = Dd::ONE + r;
        let mut term = r;
        let mut n = 2.0f64;
        loop {
            term = term * r / Dd::from_f64(n);
            sum = sum + term;
            if term.hi.abs() < 1e-35 || n > 30.0 {
                break;
            }
            n += 1.0;
        }
        sum.ldexp(k as i32)
    }

    pub fn ln(self) -> Dd {
        debug_assert!(self.hi > 0.0, "ln of non-positive double-double");
        // Newton on y: y <- y + a*exp(-y) - 1, seeded from f64.
        let mut y = Dd::from_f64(self.hi.ln());
        for _ in 0..2 {
            y = y + self * (-y).exp() - Dd::ONE;
        }
        y
    }

    /// ln(1 + x), accurate for small |x| because 1 + x is formed in dd.
    pub fn ln_1p(self) -> Dd {
        let a = Dd::ONE + self;
        let mut y = Dd::from_f64(self.hi.ln_1p());
        for _ in 0..2 {
            y = y + a * (-y).exp() - Dd::ONE;
        }
        y
    }

    pub fn powf(self, e: Dd) -> Dd {
        (e * self.ln()).exp()
    }

    pub fn powi(self, mut e: u32) -> Dd {
        let mut base = self;
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

impl std::ops::Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }
}

impl std::ops::Add for Dd {
    type Output = Dd;
    fn add(self, rhs: Dd) -> Dd {
        let (s1, s2) = two_sum(self.hi, rhs.hi);
        let (t1, t2) = two_sum(self.lo, rhs.lo);
        let (s1, s2) = quick_two_sum(s1, s2 + t1);
        let (hi, lo) = quick_two_sum(s1, s2 + t2);
        Dd { hi, lo }
    }
}

impl std::ops::Sub for Dd {
    type Output = Dd;
    fn sub(self, rhs: Dd) -> Dd {
        self + (-rhs)
    }
}

impl std::ops::Mul for Dd {
    type Output = Dd;
    fn mul(self, rhs: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, rhs.hi);
        let e = e + (self.hi * rhs.lo + self.lo * rhs.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

impl std::ops::Div for Dd {
    type Output = Dd;
    fn div(self, rhs: Dd) -> Dd {
        let q1 = self.hi / rhs.hi;
        let r = self - rhs * Dd::from_f64(q1);
        let q2 = r.hi / rhs.hi;
        let r = r - rhs * Dd::from_f64(q2);
        let q3 = r.hi / rhs.hi;
        let (s, e) = quick_two_sum(q1, q2);
        Dd::new(s, e + q3)
    }
}

impl PartialOrd for Dd {
    fn partial_cmp(&self, other: &Dd) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi) {
            Some(Ordering::Equal) => self.lo.partial_cmp(&other.lo),
            ord => ord,
        }
    }
}
