//! Exponential polynomials `f(t) = Σ c·t^k·e^{-λt}` and their one-sided
//! convolution `(f*g)(t) = ∫₀ᵗ f(s)·g(t-s) ds`.
//!
//! The family is closed under convolution. Each pair of terms is convolved
//! in the Laplace domain, where `t^m e^{-at}` maps to `m!/(s+a)^{m+1}`; the
//! product of two such transforms is split into partial fractions and mapped
//! back term by term. Coefficients are kept in double-double precision
//! because the partial-fraction weights grow like `1/(a-b)^{m+n+1}` and
//! cancel when evaluated.
//!
//! That cancellation is unbounded as `t·|a-b| → 0`, so every convolution
//! result also carries a truncated expansion about the midpoint of its
//! rates, built from the operands' expansions without partial fractions.
//! Evaluation switches to it at small times.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dd::{binomial, factorial_table, Dd};
use crate::quadrature;

/// Largest power allowed in any term, including convolution results.
pub const MAX_POWER: u32 = 64;

/// Rates `a`, `b` are treated as equal when `|a-b| <= CONFLUENCE_REL·max(a, b)`.
pub const CONFLUENCE_REL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExpPolyError {
    #[error("term {index}: rate must be finite and nonnegative, got {rate}")]
    InvalidRate { index: usize, rate: f64 },
    #[error("term {index}: coefficient must be finite, got {coef}")]
    InvalidCoefficient { index: usize, coef: f64 },
    #[error("power {power} exceeds the supported maximum {MAX_POWER}")]
    PowerTooLarge { power: u32 },
    #[error("unit_power requires k >= 1")]
    ZeroFold,
    #[error("time must be nonnegative, got {0}")]
    NegativeTime(f64),
    #[error("quadrature did not converge: error estimate {estimate:e} after {intervals} subintervals")]
    QuadratureFailed { estimate: f64, intervals: usize },
}

/// Coefficients kept in a small-time expansion.
const LOCAL_LEN: usize = MAX_POWER as usize + 72;

/// An expansion with scale `s` is used for `t <= LOCAL_REACH·s`. Its
/// truncation error there is below `8^72/72!`.
const LOCAL_REACH: f64 = 8.0;

fn factorials() -> &'static [Dd] {
    static TABLE: OnceLock<Vec<Dd>> = OnceLock::new();
    TABLE.get_or_init(|| factorial_table(LOCAL_LEN.max(2 * MAX_POWER as usize + 2)))
}

/// One term `coef·t^power·e^{-rate·t}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    coef: Dd,
    pub power: u32,
    pub rate: f64,
}

impl Term {
    /// Coefficient rounded to `f64`.
    pub fn coef(&self) -> f64 {
        self.coef.to_f64()
    }
}

/// A canonical exponential polynomial: terms sorted by `(rate, power)`, no
/// repeated `(rate, power)` pair and no zero coefficient.
///
/// Equality and JSON cover the terms only. The small-time expansion of a
/// convolution result is not serialized; a deserialized value evaluates
/// from its terms alone.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<TermRepr>", into = "Vec<TermRepr>")]
pub struct ExpPoly {
    terms: Vec<Term>,
    local: Option<Local>,
}

impl PartialEq for ExpPoly {
    fn eq(&self, other: &Self) -> bool {
        self.terms == other.terms
    }
}

/// `e^{-center·t}·Σ_n coefs[n]·x^n/n!` with `x = t/scale`.
#[derive(Debug, Clone)]
struct Local {
    center: f64,
    scale: f64,
    coefs: Vec<Dd>,
}

impl Local {
    fn covers(&self, tau: f64) -> bool {
        tau <= LOCAL_REACH * self.scale
    }

    /// `f(t)·p!/t^p`; `coefs[n]` must vanish for `n < p`.
    fn eval_ratio(&self, tau: f64, p: usize) -> Dd {
        let x = Dd::from_f64(tau) / Dd::from_f64(self.scale);
        let n = self.coefs.len();
        if n <= p {
            return Dd::ZERO;
        }
        let mut acc = self.coefs[n - 1];
        for k in (p + 1..n).rev() {
            acc = self.coefs[k - 1] + acc * x / Dd::from_f64(k as f64);
        }
        let decay = if self.center == 0.0 {
            Dd::ONE
        } else {
            (-Dd::prod(self.center, tau)).exp()
        };
        acc * decay * Dd::from_f64(self.scale).recip().powi(p as u32)
    }

    /// The same function expanded about `center` with scale `scale`, where
    /// `scale <= self.scale` and `|self.center - center|·scale <= 1`.
    fn recentred(&self, center: f64, scale: f64) -> Vec<Dd> {
        if center == self.center && scale == self.scale {
            return self.coefs.clone();
        }
        let fact = factorials();
        let ratio = Dd::from_f64(scale) / Dd::from_f64(self.scale);
        let mut r_pow = Dd::ONE;
        // plain power-series coefficients in x = t/scale
        let plain: Vec<Dd> = self
            .coefs
            .iter()
            .enumerate()
            .map(|(n, &b)| {
                let a = b * r_pow / fact[n];
                r_pow = r_pow * ratio;
                a
            })
            .collect();
        // e^{-(self.center - center)·t} = Σ y^m/m! · x^m
        let y = -(Dd::diff(self.center, center) * Dd::from_f64(scale));
        let len = plain.len();
        let mut shift = Vec::with_capacity(len);
        let mut term = Dd::ONE;
        for m in 0..len {
            shift.push(term);
            term = term * y / Dd::from_f64((m + 1) as f64);
        }
        (0..len)
            .map(|n| {
                let c = (0..=n)
                    .filter(|&i| !plain[i].is_zero())
                    .fold(Dd::ZERO, |acc, i| acc + plain[i] * shift[n - i]);
                c * fact[n]
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TermRepr {
    coef: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    coef_lo: f64,
    power: u32,
    rate: f64,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

impl TryFrom<Vec<TermRepr>> for ExpPoly {
    type Error = ExpPolyError;

    fn try_from(repr: Vec<TermRepr>) -> Result<Self, Self::Error> {
        let raw = repr
            .into_iter()
            .map(|t| (Dd::new(t.coef, t.coef_lo), t.power, t.rate))
            .collect();
        ExpPoly::from_dd_terms(raw)
    }
}

impl From<ExpPoly> for Vec<TermRepr> {
    fn from(p: ExpPoly) -> Self {
        p.terms
            .iter()
            .map(|t| TermRepr {
                coef: t.coef.hi,
                coef_lo: t.coef.lo,
                power: t.power,
                rate: t.rate,
            })
            .collect()
    }
}

impl ExpPoly {
    /// Build from `(coef, power, rate)` triples, merging and sorting into
    /// canonical form.
    pub fn new<I>(terms: I) -> Result<Self, ExpPolyError>
    where
        I: IntoIterator<Item = (f64, u32, f64)>,
    {
        let raw = terms
            .into_iter()
            .map(|(c, k, r)| (Dd::from_f64(c), k, r))
            .collect();
        Self::from_dd_terms(raw)
    }

    pub fn zero() -> Self {
        ExpPoly::default()
    }

    /// The constant function `c`.
    pub fn constant(c: f64) -> Self {
        Self::new([(c, 0, 0.0)]).expect("finite constant")
    }

    /// `e^{-rate·t}`.
    pub fn exponential(rate: f64) -> Result<Self, ExpPolyError> {
        Self::new([(1.0, 0, rate)])
    }

    fn from_dd_terms(mut raw: Vec<(Dd, u32, f64)>) -> Result<Self, ExpPolyError> {
        for (index, &(c, k, r)) in raw.iter().enumerate() {
            if !r.is_finite() || r < 0.0 {
                return Err(ExpPolyError::InvalidRate { index, rate: r });
            }
            if !c.hi.is_finite() {
                return Err(ExpPolyError::InvalidCoefficient {
                    index,
                    coef: c.hi,
                });
            }
            if k > MAX_POWER {
                return Err(ExpPolyError::PowerTooLarge { power: k });
            }
        }
        // -0.0 and 0.0 must land in the same bucket
        for t in raw.iter_mut() {
            t.2 += 0.0;
        }
        // coefficient order is part of the key so the summation order, and
        // therefore the rounding, does not depend on input order
        raw.sort_by(|a, b| {
            a.2.total_cmp(&b.2)
                .then(a.1.cmp(&b.1))
                .then(a.0.hi.total_cmp(&b.0.hi))
                .then(a.0.lo.total_cmp(&b.0.lo))
        });
        let mut terms: Vec<Term> = Vec::with_capacity(raw.len());
        for (coef, power, rate) in raw {
            match terms.last_mut() {
                Some(last) if last.rate == rate && last.power == power => {
                    last.coef = last.coef + coef;
                }
                _ => terms.push(Term { coef, power, rate }),
            }
        }
        terms.retain(|t| !t.coef.is_zero());
        Ok(ExpPoly { terms, local: None })
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_rate(&self) -> f64 {
        self.terms.iter().map(|t| t.rate).fold(0.0, f64::max)
    }

    pub fn max_power(&self) -> u32 {
        self.terms.iter().map(|t| t.power).max().unwrap_or(0)
    }

    /// Value at zero: the sum of the power-0 coefficients.
    pub fn at_zero(&self) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.power == 0)
            .fold(Dd::ZERO, |acc, t| acc + t.coef)
            .to_f64()
    }

    pub fn scale(&self, factor: f64) -> ExpPoly {
        let f = Dd::from_f64(factor);
        let raw = self.terms.iter().map(|t| (t.coef * f, t.power, t.rate)).collect();
        let mut out = Self::from_dd_terms(raw).expect("scaling keeps terms valid");
        if !out.is_zero() {
            out.local = self.local.as_ref().map(|l| Local {
                coefs: l.coefs.iter().map(|&c| c * f).collect(),
                ..l.clone()
            });
        }
        out
    }

    /// Largest time at which the small-time expansion is used, if there is
    /// one.
    #[cfg(test)]
    pub(crate) fn expansion_reach(&self) -> Option<f64> {
        self.local.as_ref().map(|l| LOCAL_REACH * l.scale)
    }

    fn rate_span(&self) -> Option<(f64, f64)> {
        let lo = self.terms.iter().map(|t| t.rate).fold(f64::INFINITY, f64::min);
        let hi = self.terms.iter().map(|t| t.rate).fold(f64::NEG_INFINITY, f64::max);
        (lo <= hi).then_some((lo, hi))
    }

    /// Expansion coefficients about `center` with scale `scale`.
    fn expansion(&self, center: f64, scale: f64) -> Vec<Dd> {
        if let Some(local) = &self.local {
            return local.recentred(center, scale);
        }
        let fact = factorials();
        let s = Dd::from_f64(scale);
        let mut out = vec![Dd::ZERO; LOCAL_LEN];
        for term in &self.terms {
            let p = term.power as usize;
            // c·t^p·e^{-(rate-center)t} = c·s^p·x^p·Σ y^i/i!·x^i
            let y = -(Dd::diff(term.rate, center) * s);
            let mut a = term.coef * s.powi(term.power);
            for (i, slot) in out.iter_mut().enumerate().skip(p) {
                *slot = *slot + a * fact[i];
                a = a * y / Dd::from_f64((i + 1 - p) as f64);
            }
        }
        out
    }

    /// Evaluate at `tau >= 0`. Terms sharing a rate are summed by Horner's
    /// rule before the exponential is applied; large `rate·tau` underflows
    /// to zero.
    pub fn eval(&self, tau: f64) -> Result<f64, ExpPolyError> {
        if tau < 0.0 || tau.is_nan() {
            return Err(ExpPolyError::NegativeTime(tau));
        }
        Ok(self.eval_dd(tau).to_f64())
    }

    pub(crate) fn eval_dd(&self, tau: f64) -> Dd {
        match &self.local {
            Some(local) if local.covers(tau) => local.eval_ratio(tau, 0),
            _ => self.closed_form(tau, 0),
        }
    }

    /// `f(τ)·p!/τ^p`, continuous at `τ = 0` when the expansion or the terms
    /// show that `f` vanishes to order `p` there.
    pub(crate) fn eval_ratio(&self, tau: f64, p: u32) -> Dd {
        if let Some(local) = self.local.as_ref().filter(|l| l.covers(tau)) {
            return local.eval_ratio(tau, p as usize);
        }
        let fact = factorials()[p as usize];
        if self.terms.iter().all(|t| t.power >= p) {
            return self.closed_form(tau, p) * fact;
        }
        if tau == 0.0 {
            return Dd::from_f64(f64::NAN);
        }
        self.closed_form(tau, 0) * fact / Dd::from_f64(tau).powi(p)
    }

    /// Closed-form `f(τ)/τ^shift`; every power must be at least `shift`.
    fn closed_form(&self, tau: f64, shift: u32) -> Dd {
        let t = Dd::from_f64(tau);
        let mut total = Dd::ZERO;
        let mut i = 0;
        while i < self.terms.len() {
            let rate = self.terms[i].rate;
            let mut j = i;
            while j < self.terms.len() && self.terms[j].rate == rate {
                j += 1;
            }
            // terms[i..j] share `rate`, powers ascending
            let group = &self.terms[i..j];
            let mut acc = Dd::ZERO;
            let mut prev_power = group[group.len() - 1].power;
            for term in group.iter().rev() {
                acc = acc * t.powi(prev_power - term.power) + term.coef;
                prev_power = term.power;
            }
            acc = acc * t.powi(prev_power - shift);
            let decay = if rate == 0.0 {
                Dd::ONE
            } else {
                (-Dd::prod(rate, tau)).exp()
            };
            if !decay.is_zero() {
                total = total + acc * decay;
            }
            i = j;
        }
        total
    }

    /// Plain `f64` evaluation, term by term. Used by the quadrature oracle so
    /// it shares no arithmetic with the closed-form path.
    pub fn eval_naive(&self, tau: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coef() * tau.powi(t.power as i32) * (-t.rate * tau).exp())
            .sum()
    }
}

/// Closed-form convolution `(f*g)(t) = ∫₀ᵗ f(s)·g(t-s) ds`.
pub fn convolve(f: &ExpPoly, g: &ExpPoly) -> Result<ExpPoly, ExpPolyError> {
    let mut raw = Vec::with_capacity(f.terms.len() * g.terms.len() * 4);
    for tf in &f.terms {
        for tg in &g.terms {
            convolve_terms(tf, tg, &mut raw)?;
        }
    }
    let mut out = ExpPoly::from_dd_terms(raw)?;
    out.local = match out.rate_span() {
        Some((lo, hi)) if lo < hi => Some(convolve_expansions(f, g, 0.5 * (lo + hi), 2.0 / (hi - lo))),
        _ => None,
    }
    // extreme scales can overflow the expansion; the closed form still holds
    .filter(|l| l.coefs.iter().all(|c| c.hi.is_finite()));
    Ok(out)
}

/// With `f = e^{-ct}ΣF_n x^n/n!` and `g` alike, `f*g = e^{-ct}ΣH_n x^n/n!`
/// where `H_{a+b+1} = s·F_a·G_b`, since `x^a/a! * x^b/b! = s·x^{a+b+1}/(a+b+1)!`.
fn convolve_expansions(f: &ExpPoly, g: &ExpPoly, center: f64, scale: f64) -> Local {
    let fe = f.expansion(center, scale);
    let ge = g.expansion(center, scale);
    let len = fe.len().min(ge.len());
    let s = Dd::from_f64(scale);
    let mut coefs = vec![Dd::ZERO; len];
    for (a, &fa) in fe.iter().enumerate().take(len - 1) {
        if fa.is_zero() {
            continue;
        }
        let fa = fa * s;
        for (b, &gb) in ge.iter().enumerate().take(len - 1 - a) {
            coefs[a + b + 1] = coefs[a + b + 1] + fa * gb;
        }
    }
    Local { center, scale, coefs }
}

fn rates_confluent(a: f64, b: f64) -> bool {
    (a - b).abs() <= CONFLUENCE_REL * a.max(b).max(1e-30)
}

fn convolve_terms(x: &Term, y: &Term, out: &mut Vec<(Dd, u32, f64)>) -> Result<(), ExpPolyError> {
    let fact = factorials();
    let (m, n) = (x.power, y.power);
    if m + n + 1 > MAX_POWER {
        return Err(ExpPolyError::PowerTooLarge { power: m + n + 1 });
    }
    // Laplace numerator c_x·c_y·m!·n!; the factorial product is formed first
    // so the result is symmetric in (x, y)
    let weight = (x.coef * y.coef) * (fact[m as usize] * fact[n as usize]);

    if rates_confluent(x.rate, y.rate) {
        // m!n!/(s+a)^{m+n+2}  ->  m!n!/(m+n+1)! · t^{m+n+1} e^{-at}
        let rate = if x.rate == y.rate {
            x.rate
        } else {
            0.5 * (x.rate + y.rate)
        };
        let power = m + n + 1;
        out.push((weight / fact[power as usize], power, rate));
        return Ok(());
    }
    partial_fraction_side(x.rate, y.rate, m + 1, n + 1, weight, out);
    partial_fraction_side(y.rate, x.rate, n + 1, m + 1, weight, out);
    Ok(())
}

/// Contribution of the `(s+own)^{-p}` poles in
/// `weight / ((s+own)^p (s+other)^q)`.
///
/// The coefficient of `1/(s+own)^{p-i}` is
/// `(-1)^i C(q+i-1, i) / (other-own)^{q+i}`, and `1/(s+own)^j` inverts to
/// `t^{j-1} e^{-own·t} / (j-1)!`.
fn partial_fraction_side(
    own: f64,
    other: f64,
    p: u32,
    q: u32,
    weight: Dd,
    out: &mut Vec<(Dd, u32, f64)>,
) {
    let fact = factorials();
    let inv_gap = Dd::diff(other, own).recip();
    let mut inv_gap_pow = inv_gap.powi(q);
    for i in 0..p {
        let mut coef = binomial(q + i - 1, i) * inv_gap_pow;
        if i % 2 == 1 {
            coef = -coef;
        }
        let power = p - i - 1;
        out.push((weight * coef / fact[power as usize], power, own));
        inv_gap_pow = inv_gap_pow * inv_gap;
    }
}

/// `t^{k-1}/(k-1)!`, the k-fold self-convolution of the constant 1.
pub fn unit_power(k: u32) -> Result<ExpPoly, ExpPolyError> {
    if k == 0 {
        return Err(ExpPolyError::ZeroFold);
    }
    let power = k - 1;
    if power > MAX_POWER {
        return Err(ExpPolyError::PowerTooLarge { power });
    }
    let coef = factorials()[power as usize].recip();
    ExpPoly::from_dd_terms(vec![(coef, power, 0.0)])
}

/// Adaptive-quadrature value of `∫₀ᵗ f(s)·g(t-s) ds`, with estimated
/// relative error at most `rel_tol`. Integrals that cancel to nearly zero
/// may fail to converge.
pub fn numeric_convolve(f: &ExpPoly, g: &ExpPoly, tau: f64, rel_tol: f64) -> Result<f64, ExpPolyError> {
    if tau < 0.0 || tau.is_nan() {
        return Err(ExpPolyError::NegativeTime(tau));
    }
    if tau == 0.0 {
        return Ok(0.0);
    }
    let integrand = |s: f64| f.eval_naive(s) * g.eval_naive(tau - s);
    quadrature::integrate(integrand, 0.0, tau, 0.0, rel_tol).map_err(|e| ExpPolyError::QuadratureFailed {
        estimate: e.estimate,
        intervals: e.intervals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const A: f64 = 4.3553e-5;
    const B: f64 = 2.7482e-5;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn canonical_form_merges_and_sorts() {
        let p = ExpPoly::new([(2.0, 1, 0.5), (1.0, 0, 0.5), (3.0, 0, 0.1), (-1.0, 0, 0.5)]).unwrap();
        let view: Vec<_> = p.terms().iter().map(|t| (t.coef(), t.power, t.rate)).collect();
        assert_eq!(view, vec![(3.0, 0, 0.1), (2.0, 1, 0.5)]);
    }

    #[test]
    fn negative_rate_rejected() {
        assert_eq!(
            ExpPoly::new([(1.0, 0, -1e-5)]),
            Err(ExpPolyError::InvalidRate { index: 0, rate: -1e-5 })
        );
    }

    #[test]
    fn at_zero_sums_power_zero_coefficients() {
        let p = ExpPoly::new([(0.25, 0, 1.0), (0.75, 0, 2.0), (5.0, 2, 1.0)]).unwrap();
        assert_eq!(p.at_zero(), 1.0);
        assert_eq!(p.eval(0.0).unwrap(), 1.0);
    }

    #[test]
    fn distinct_exponentials_convolve_to_scaled_difference() {
        let f = ExpPoly::exponential(A).unwrap();
        let g = ExpPoly::exponential(B).unwrap();
        let h = convolve(&f, &g).unwrap();
        for tau in [1.0, 100.0, 5e4, 9.1208e4, 2e5] {
            let expect = (-B * tau).exp() * -(-(A - B) * tau).exp_m1() / (A - B);
            assert!(close(h.eval(tau).unwrap(), expect, 1e-12), "tau={tau}");
        }
    }

    #[test]
    fn confluent_exponentials_give_t_exp() {
        let f = ExpPoly::exponential(A).unwrap();
        let h = convolve(&f, &f).unwrap();
        assert_eq!(h, ExpPoly::new([(1.0, 1, A)]).unwrap());
    }

    #[test]
    fn constants_convolve_to_ramp() {
        let one = ExpPoly::constant(1.0);
        let h = convolve(&one, &one).unwrap();
        assert_eq!(h, ExpPoly::new([(1.0, 1, 0.0)]).unwrap());
    }

    #[test]
    fn hand_integrated_case() {
        // ∫₀¹ s e^{-s} e^{-2(1-s)} ds = e^{-2}; closed form t e^{-t} - e^{-t} + e^{-2t}
        let f = ExpPoly::new([(1.0, 1, 1.0)]).unwrap();
        let g = ExpPoly::exponential(2.0).unwrap();
        let h = convolve(&f, &g).unwrap();
        let expect = ExpPoly::new([(1.0, 1, 1.0), (-1.0, 0, 1.0), (1.0, 0, 2.0)]).unwrap();
        for (got, want) in h.terms().iter().zip(expect.terms()) {
            assert_eq!((got.power, got.rate), (want.power, want.rate));
            assert!(close(got.coef(), want.coef(), 1e-15));
        }
        assert!(close(h.eval(1.0).unwrap(), (-2.0f64).exp(), 1e-15));
        let q = numeric_convolve(&f, &g, 1.0, 1e-14).unwrap();
        assert!(close(q, (-2.0f64).exp(), 1e-12));
    }

    #[test]
    fn unit_powers() {
        assert_eq!(unit_power(1).unwrap(), ExpPoly::constant(1.0));
        assert_eq!(unit_power(2).unwrap(), ExpPoly::new([(1.0, 1, 0.0)]).unwrap());
        assert_eq!(unit_power(0), Err(ExpPolyError::ZeroFold));

        let one = ExpPoly::constant(1.0);
        let mut folded = one.clone();
        for _ in 0..3 {
            folded = convolve(&folded, &one).unwrap();
        }
        let k4 = unit_power(4).unwrap();
        assert_eq!(k4.terms().len(), 1);
        assert_eq!(k4.terms()[0].power, 3);
        assert!(close(k4.terms()[0].coef(), 1.0 / 6.0, 1e-16));
        assert_eq!(folded, k4);
    }

    #[test]
    fn eval_points() {
        let f = ExpPoly::exponential(B).unwrap();
        assert_eq!(f.eval(0.0).unwrap(), 1.0);
        let g = ExpPoly::new([(1.0, 1, A)]).unwrap();
        assert!(close(g.eval(1.0 / A).unwrap(), (-1.0f64).exp() / A, 1e-15));
        assert_eq!(f.eval(-1.0), Err(ExpPolyError::NegativeTime(-1.0)));
    }

    #[test]
    fn large_decay_underflows_to_zero() {
        let f = ExpPoly::new([(3.0, 2, 1.0)]).unwrap();
        assert_eq!(f.eval(2000.0).unwrap(), 0.0);
    }

    #[test]
    fn power_cap_enforced() {
        let f = ExpPoly::new([(1.0, 40, 1.0)]).unwrap();
        assert_eq!(
            convolve(&f, &f),
            Err(ExpPolyError::PowerTooLarge { power: 81 })
        );
    }

    #[test]
    fn near_confluent_rates_agree_with_confluent_formula() {
        // a - b = 1e-12·b falls under the confluence threshold
        let b = 3e-5;
        let a = b * (1.0 + 1e-12);
        let h = convolve(&ExpPoly::exponential(a).unwrap(), &ExpPoly::exponential(b).unwrap()).unwrap();
        let tau = 5e4;
        let exact = tau * (-b * tau).exp();
        assert!(close(h.eval(tau).unwrap(), exact, 1e-4));

        // just outside the threshold the partial-fraction branch is still accurate
        let a = b * (1.0 + 1e-7);
        let h = convolve(&ExpPoly::exponential(a).unwrap(), &ExpPoly::exponential(b).unwrap()).unwrap();
        assert_eq!(h.terms().len(), 2);
        assert!(close(h.eval(tau).unwrap(), exact, 1e-4));
        let q = numeric_convolve(
            &ExpPoly::exponential(a).unwrap(),
            &ExpPoly::exponential(b).unwrap(),
            tau,
            1e-14,
        )
        .unwrap();
        assert!(close(h.eval(tau).unwrap(), q, 1e-10));
    }

    #[test]
    fn nested_convolution_at_small_time() {
        let f = ExpPoly::new([
            (0.5499468731465034, 2, 0.00034353912950977147),
            (1.133493869767541, 1, 0.000349000714613862),
            (1.502934066163654, 2, 0.0008365393608683769),
        ])
        .unwrap();
        let g = ExpPoly::new([(1.357441726768693, 1, 0.0007492133266249443), (1.4945878719472843, 2, 0.0009871343429456866)])
            .unwrap();
        let h = ExpPoly::new([(1.8184421834579474, 1, 0.00029224859673972675), (0.28916403969116883, 2, 0.0007102384931359371)])
            .unwrap();
        let tau = 5.726_020_761_076_533;
        // 40-digit nested quadrature
        let want = 2_280.815_925_324_799_6;
        let left = convolve(&convolve(&f, &g).unwrap(), &h).unwrap();
        let right = convolve(&f, &convolve(&g, &h).unwrap()).unwrap();
        for p in [left, right] {
            assert!(close(p.eval(tau).unwrap(), want, 1e-14));
        }
    }

    #[test]
    fn expansion_survives_scaling() {
        let h = convolve(&ExpPoly::exponential(A).unwrap(), &ExpPoly::exponential(B).unwrap()).unwrap();
        let tau = 3.0;
        assert!(close(h.scale(-2.5).eval(tau).unwrap(), -2.5 * h.eval(tau).unwrap(), 1e-15));
    }

    #[test]
    fn numeric_convolve_of_ones() {
        let one = ExpPoly::constant(1.0);
        let v = numeric_convolve(&one, &one, 5.0, 1e-12).unwrap();
        assert!((v - 5.0).abs() < 1e-12 * 6.0);
    }

    #[test]
    fn debug_json_lists_terms() {
        let f = ExpPoly::exponential(A).unwrap();
        let json = serde_json::to_string(&f).unwrap();
        assert_eq!(json, r#"[{"coef":1.0,"power":0,"rate":0.000043553}]"#);
        let back: ExpPoly = serde_json::from_str(&json).unwrap();
        assert_eq!(back, f);

        let h = convolve(&f, &ExpPoly::exponential(B).unwrap()).unwrap();
        let back: ExpPoly = serde_json::from_str(&serde_json::to_string(&h).unwrap()).unwrap();
        assert_eq!(back, h);
    }
}
