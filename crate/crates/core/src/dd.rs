//! Double-double arithmetic.
//!
//! A value is the unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`, giving
//! roughly 106 bits of significand. Exponential-polynomial convolution
//! produces partial-fraction coefficients of order `1/(a-b)^k` that cancel
//! almost completely when rates are close, so coefficients and evaluation
//! are carried at this precision and rounded to `f64` at the end.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct Dd {
    pub hi: f64,
    pub lo: f64,
}

const LN2: Dd = Dd {
    hi: std::f64::consts::LN_2,
    lo: 2.319_046_813_846_299_6e-17,
};

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

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    #[inline]
    pub fn new(hi: f64, lo: f64) -> Self {
        let (hi, lo) = quick_two_sum(hi, lo);
        Self::finite_or_bare(hi, lo)
    }

    #[inline]
    pub fn from_f64(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    /// Exact product of two doubles.
    #[inline]
    pub fn prod(a: f64, b: f64) -> Self {
        let (p, e) = two_prod(a, b);
        Self::finite_or_bare(p, e)
    }

    /// Exact difference of two doubles.
    #[inline]
    pub fn diff(a: f64, b: f64) -> Self {
        let (s, e) = two_sum(a, -b);
        Self::finite_or_bare(s, e)
    }

    #[inline]
    fn finite_or_bare(hi: f64, lo: f64) -> Self {
        if hi.is_finite() {
            Dd { hi, lo }
        } else {
            Dd { hi, lo: 0.0 }
        }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.hi == 0.0
    }

    /// Multiply by an exact power of two.
    #[inline]
    fn scale_pow2(self, k: i32) -> Self {
        Dd {
            hi: ldexp(self.hi, k),
            lo: ldexp(self.lo, k),
        }
    }

    pub fn powi(self, mut n: u32) -> Self {
        let mut base = self;
        let mut acc = Dd::ONE;
        while n > 0 {
            if n & 1 == 1 {
                acc = acc * base;
            }
            n >>= 1;
            if n > 0 {
                base = base * base;
            }
        }
        acc
    }

    pub fn recip(self) -> Self {
        Dd::ONE / self
    }

    /// `e^x` to double-double accuracy. Underflows to zero below `-745.2`.
    pub fn exp(self) -> Self {
        if self.hi < -745.2 {
            return Dd::ZERO;
        }
        if self.hi > 709.8 {
            return Dd::from_f64(f64::INFINITY);
        }
        if self.hi == 0.0 {
            return Dd::ONE;
        }
        let k = (self.hi / LN2.hi).round();
        let r = (self - LN2 * Dd::from_f64(k)).scale_pow2(-10);

        // expm1(r) by Taylor series, |r| <= ln2/2048
        let mut term = r;
        let mut sum = r;
        for i in 2..=20 {
            term = term * r / Dd::from_f64(i as f64);
            sum = sum + term;
            if term.hi.abs() <= 1e-34 * sum.hi.abs() {
                break;
            }
        }
        // (1 + s)^2 - 1 = s * (s + 2), repeated to undo the 2^-10 scaling
        for _ in 0..10 {
            sum = sum * (sum + Dd::from_f64(2.0));
        }
        (sum + Dd::ONE).scale_pow2(k as i32)
    }
}

fn ldexp(x: f64, k: i32) -> f64 {
    // split so intermediate powers of two stay normal
    if k > 1000 {
        x * 2f64.powi(1000) * 2f64.powi(k - 1000)
    } else if k < -1000 {
        x * 2f64.powi(-1000) * 2f64.powi(k + 1000)
    } else {
        x * 2f64.powi(k)
    }
}

impl From<f64> for Dd {
    fn from(x: f64) -> Self {
        Dd::from_f64(x)
    }
}

impl Neg for Dd {
    type Output = Dd;
    #[inline]
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Add for Dd {
    type Output = Dd;
    #[inline]
    fn add(self, rhs: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, rhs.hi);
        if !s.is_finite() {
            return Dd::from_f64(s);
        }
        let (t, f) = two_sum(self.lo, rhs.lo);
        let e = e + t;
        let (s, e) = quick_two_sum(s, e);
        let e = e + f;
        let (hi, lo) = quick_two_sum(s, e);
        Dd { hi, lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    #[inline]
    fn sub(self, rhs: Dd) -> Dd {
        self + (-rhs)
    }
}

impl Mul for Dd {
    type Output = Dd;
    #[inline]
    fn mul(self, rhs: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, rhs.hi);
        if !p.is_finite() {
            return Dd::from_f64(p);
        }
        let e = e + (self.hi * rhs.lo + self.lo * rhs.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, rhs: Dd) -> Dd {
        let q1 = self.hi / rhs.hi;
        if !q1.is_finite() {
            return Dd::from_f64(q1);
        }
        let r = self - rhs * Dd::from_f64(q1);
        let q2 = r.hi / rhs.hi;
        let r = r - rhs * Dd::from_f64(q2);
        let q3 = r.hi / rhs.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + Dd::from_f64(q3)
    }
}

/// `n!` for `n` in `0..=limit`, in double-double.
pub(crate) fn factorial_table(limit: usize) -> Vec<Dd> {
    let mut table = Vec::with_capacity(limit + 1);
    let mut acc = Dd::ONE;
    table.push(acc);
    for i in 1..=limit {
        acc = acc * Dd::from_f64(i as f64);
        table.push(acc);
    }
    table
}

/// Binomial coefficient `C(n, k)` via the multiplicative formula.
pub(crate) fn binomial(n: u32, k: u32) -> Dd {
    let k = k.min(n - k);
    let mut acc = Dd::ONE;
    for i in 0..k {
        acc = acc * Dd::from_f64((n - i) as f64) / Dd::from_f64((i + 1) as f64);
    }
    acc
}
