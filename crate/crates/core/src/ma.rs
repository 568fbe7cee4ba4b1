//! Moving-average (MA) reliability.
//!
//! For `k` components run in sequence, the MA reliability at total execution
//! time `τ` is the average of `f₁(t₁)·…·f_k(t_k)` over every split
//! `t₁ + … + t_k = τ`:
//!
//! ```text
//! MA(τ) = (f₁ * f₂ * … * f_k)(τ) / (1 * 1 * … * 1)(τ)
//! ```
//!
//! The denominator is the volume of the split simplex, `τ^{k-1}/(k-1)!`.
//! Near `τ = 0`, where both vanish, the ratio comes from the numerator's
//! small-time expansion, so `MA(0) = 1` exactly.
//! The discrete variant replaces integrals by sums over sampled vectors.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expconv::{convolve, unit_power, ExpPoly, ExpPolyError};

/// Components must equal 1 at time zero within this tolerance.
pub const UNIT_AT_ZERO_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaError {
    #[error("moving average needs at least one component")]
    Empty,
    #[error("component {index} has value {value} at time zero; reliability functions must start at 1")]
    NotUnitAtZero { index: usize, value: f64 },
    #[error("vector {index} is empty")]
    EmptyVector { index: usize },
    #[error("denominator does not match the component count {k}")]
    Inconsistent { k: usize },
    #[error(transparent)]
    Algebra(#[from] ExpPolyError),
}

/// `MA(τ) = numerator(τ) / denominator(τ)` for a fixed list of component
/// reliabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MaRepr", into = "MaRepr")]
pub struct MaFunction {
    components: Vec<ExpPoly>,
    numerator: ExpPoly,
    denominator: ExpPoly,
}

#[derive(Serialize, Deserialize)]
struct MaRepr {
    k: usize,
    components: Vec<ExpPoly>,
    numerator: ExpPoly,
    denominator: ExpPoly,
}

impl TryFrom<MaRepr> for MaFunction {
    type Error = MaError;

    fn try_from(r: MaRepr) -> Result<Self, MaError> {
        if r.k != r.components.len() || r.denominator != unit_power(r.k as u32)? {
            return Err(MaError::Inconsistent { k: r.k });
        }
        // rebuilt rather than trusted, so the small-time expansion exists
        let ma = ma_continuous(&r.components)?;
        if ma.numerator != r.numerator {
            return Err(MaError::Inconsistent { k: r.k });
        }
        Ok(ma)
    }
}

impl From<MaFunction> for MaRepr {
    fn from(m: MaFunction) -> Self {
        MaRepr {
            k: m.components.len(),
            components: m.components,
            numerator: m.numerator,
            denominator: m.denominator,
        }
    }
}

fn check_components(components: &[ExpPoly]) -> Result<(), MaError> {
    if components.is_empty() {
        return Err(MaError::Empty);
    }
    for (index, c) in components.iter().enumerate() {
        let value = c.at_zero();
        if (value - 1.0).abs() > UNIT_AT_ZERO_TOL {
            return Err(MaError::NotUnitAtZero { index, value });
        }
    }
    Ok(())
}

/// Build the continuous MA of `components`, folding the convolution left
/// to right.
pub fn ma_continuous(components: &[ExpPoly]) -> Result<MaFunction, MaError> {
    check_components(components)?;
    let mut numerator = components[0].clone();
    for c in &components[1..] {
        numerator = convolve(&numerator, c)?;
    }
    let denominator = unit_power(components.len() as u32)?;
    Ok(MaFunction {
        components: components.to_vec(),
        numerator,
        denominator,
    })
}

impl MaFunction {
    /// Number of composed components.
    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[ExpPoly] {
        &self.components
    }

    pub fn numerator(&self) -> &ExpPoly {
        &self.numerator
    }

    pub fn denominator(&self) -> &ExpPoly {
        &self.denominator
    }

    /// MA at `tau >= 0`; NaN for negative `tau`.
    pub fn value(&self, tau: f64) -> f64 {
        if tau < 0.0 || tau.is_nan() {
            return f64::NAN;
        }
        let p = self.k() as u32 - 1;
        self.numerator.eval_ratio(tau, p).to_f64()
    }
}

/// Discrete MA of sampled reliability vectors: the full convolution of all
/// vectors divided elementwise by the full convolution of all-ones vectors
/// of the same lengths. The output has `Σ len - (count - 1)` entries.
pub fn ma_discrete(vectors: &[Vec<f64>]) -> Result<Vec<f64>, MaError> {
    let first = vectors.first().ok_or(MaError::Empty)?;
    if let Some(index) = vectors.iter().position(|v| v.is_empty()) {
        return Err(MaError::EmptyVector { index });
    }
    let mut sums = first.clone();
    let mut counts: Vec<u64> = vec![1; first.len()];
    for v in &vectors[1..] {
        let mut next = vec![0.0; sums.len() + v.len() - 1];
        let mut next_counts = vec![0u64; next.len()];
        for (i, (&s, &c)) in sums.iter().zip(&counts).enumerate() {
            for (j, &x) in v.iter().enumerate() {
                next[i + j] += s * x;
                next_counts[i + j] += c;
            }
        }
        sums = next;
        counts = next_counts;
    }
    Ok(sums
        .into_iter()
        .zip(counts)
        .map(|(s, c)| s / c as f64)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expconv::numeric_convolve;

    const A: f64 = 4.3553e-5;
    const B: f64 = 2.7482e-5;

    fn exps(rates: &[f64]) -> Vec<ExpPoly> {
        rates.iter().map(|&r| ExpPoly::exponential(r).unwrap()).collect()
    }

    fn two_component_reference(tau: f64) -> f64 {
        // (e^{-Bτ} - e^{-Aτ}) / ((A-B)τ), cancellation-free
        (-B * tau).exp() * -(-(A - B) * tau).exp_m1() / ((A - B) * tau)
    }

    #[test]
    fn fixture_rates_match_closed_ratio() {
        let ma = ma_continuous(&exps(&[A, B])).unwrap();
        for tau in [1e-3, 1.0, 178.0, 5e4, 91208.0, 3e5] {
            let got = ma.value(tau);
            let want = two_component_reference(tau);
            assert!(((got - want) / want).abs() < 1e-12, "tau={tau}: {got} vs {want}");
        }
        assert_eq!(ma.value(0.0), 1.0);
    }

    #[test]
    fn value_at_fifty_thousand() {
        let ma = ma_continuous(&exps(&[A, B])).unwrap();
        // (e^{-1.3741} - e^{-2.17765}) / 0.80355, 40-digit reference
        let want = 0.173_927_899_015_247_8;
        assert!((ma.value(5e4) - want).abs() < 1e-15);
    }

    #[test]
    fn single_component_is_identity() {
        let ma = ma_continuous(&exps(&[A])).unwrap();
        for tau in [0.0, 10.0, 5e4] {
            let want = (-A * tau).exp();
            assert!((ma.value(tau) - want).abs() <= 1e-15 * want);
        }
    }

    #[test]
    fn three_components_match_quadrature() {
        let rates = [A, B, 3.1e-5];
        let c = exps(&rates);
        let ma = ma_continuous(&c).unwrap();
        for tau in [500.0, 2e4, 9e4] {
            // ((f1*f2)*f3)(τ) by nested quadrature, then / (τ²/2)
            let inner = |s: f64| numeric_convolve(&c[0], &c[1], s, 1e-15).unwrap();
            let outer = crate::quadrature::integrate(|s| inner(s) * c[2].eval_naive(tau - s), 0.0, tau, 0.0, 1e-14).unwrap();
            let want = outer / (tau * tau / 2.0);
            assert!(((ma.value(tau) - want) / want).abs() < 1e-9, "tau={tau}");
        }
    }

    #[test]
    fn expansion_hand_over_is_continuous() {
        let ma = ma_continuous(&exps(&[A, B, 1e-4])).unwrap();
        let edge = ma.numerator().expansion_reach().unwrap();
        let below = ma.value(edge);
        let above = ma.value(edge.next_up());
        assert!((below - above).abs() < 1e-15, "{below} {above}");
        assert!(ma.value(1e-30) <= 1.0);
        assert_eq!(ma.value(0.0), 1.0);
    }

    #[test]
    fn many_close_rates_stay_accurate_near_zero() {
        // eight rates within 1e-6 of each other: the closed form loses every
        // digit at small τ, the ratio must stay near e^{-mean·τ}
        let rates: Vec<f64> = (0..8).map(|i| 1e-3 + i as f64 * 1.3e-7).collect();
        let ma = ma_continuous(&exps(&rates)).unwrap();
        let mean = rates.iter().sum::<f64>() / 8.0;
        for tau in [0.0, 1e-6, 1.0, 100.0, 2000.0] {
            let want = (-mean * tau).exp();
            assert!(((ma.value(tau) - want) / want).abs() < 1e-6, "tau={tau}: {}", ma.value(tau));
        }
        assert_eq!(ma.value(0.0), 1.0);
    }

    #[test]
    fn decays_to_zero() {
        let ma = ma_continuous(&exps(&[A, B])).unwrap();
        assert!(ma.value(1e8) < 1e-200);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert_eq!(ma_continuous(&[]), Err(MaError::Empty));
        let half = ExpPoly::new([(0.5, 0, 1e-5)]).unwrap();
        assert_eq!(
            ma_continuous(&[ExpPoly::exponential(A).unwrap(), half]),
            Err(MaError::NotUnitAtZero { index: 1, value: 0.5 })
        );
    }

    #[test]
    fn discrete_two_vectors() {
        let out = ma_discrete(&[vec![0.9, 0.8, 0.7], vec![0.95, 0.85]]).unwrap();
        assert_eq!(out, vec![0.855, 0.7625, 0.6725, 0.595]);
    }

    #[test]
    fn discrete_identity_and_ones() {
        assert_eq!(ma_discrete(&[vec![0.3, 0.2]]).unwrap(), vec![0.3, 0.2]);
        assert_eq!(
            ma_discrete(&[vec![1.0; 3], vec![1.0; 2]]).unwrap(),
            vec![1.0; 4]
        );
    }

    #[test]
    fn discrete_errors() {
        assert_eq!(ma_discrete(&[]), Err(MaError::Empty));
        assert_eq!(
            ma_discrete(&[vec![1.0], vec![]]),
            Err(MaError::EmptyVector { index: 1 })
        );
    }

    #[test]
    fn serde_round_trip_preserves_values() {
        let ma = ma_continuous(&exps(&[A, B, 3.1e-5])).unwrap();
        let json = serde_json::to_string(&ma).unwrap();
        let back: MaFunction = serde_json::from_str(&json).unwrap();
        assert_eq!(back, ma);
    }
}
