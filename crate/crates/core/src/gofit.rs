//! Goel–Okumoto NHPP: `μ(τ) = v0·(1 - e^{-bτ})`, fitted by maximum likelihood.
//!
//! With failure times `t₁ < … < t_n` observed up to `T`, the profile score
//! for `b` is
//!
//! ```text
//! n/b - Σ tᵢ - n·T·e^{-bT} / (1 - e^{-bT}) = 0,     v0 = n / (1 - e^{-bT}).
//! ```
//!
//! Substituting `x = bT` and `uᵢ = tᵢ/T` gives the dimensionless form
//! `n·h(x) = Σ uᵢ` with `h(x) = 1/x - 1/(eˣ - 1)`. `h` falls from 1/2 at
//! `x → 0` to 0, so a positive root exists exactly when the mean of the `uᵢ`
//! is below 1/2, that is when failures thin out over the test.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datasets::FailureDataset;
use crate::expconv::ExpPoly;

/// Lower end of the bracket for `x = bT`.
pub const MIN_BT: f64 = 1e-12;

/// Fits with `bT` below this are flagged as near-homogeneous: the intensity
/// drops by less than about 10% over the whole test.
pub const NEAR_HOMOGENEOUS_BT: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("v0 must be finite and positive, got {0}")]
    InvalidScale(f64),
    #[error("b must be finite and positive, got {0}")]
    InvalidRate(f64),
    #[error("end_of_test must be finite and positive, got {0}")]
    InvalidEndOfTest(f64),
    #[error("time must be nonnegative, got {0}")]
    NegativeTime(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("failure-free component: unfittable")]
    FailureFree,
    #[error("at least 2 failures are needed to fit, got {n}")]
    TooFewFailures { n: usize },
    #[error(
        "no root in bracket: mean failure time is {mean_ratio:.4} of end_of_test (needs < 0.5); \
         data is near-homogeneous or shows growing intensity"
    )]
    NearHomogeneous { mean_ratio: f64 },
    #[error("no sign change found for the score up to bT = {upper:e}")]
    NoRoot { upper: f64 },
}

/// Fitted Goel–Okumoto parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoModel {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub component_id: Option<String>,
    /// Expected total failures.
    pub v0: f64,
    /// Per-failure detection rate, per CPU second.
    pub b: f64,
    /// End of the test the model was fitted on.
    pub end_of_test: f64,
}

/// `1 - e^{-x}` without cancellation for small `x`.
#[inline]
pub fn one_minus_exp_neg(x: f64) -> f64 {
    -(-x).exp_m1()
}

impl GoModel {
    pub fn new(v0: f64, b: f64, end_of_test: f64) -> Result<Self, ModelError> {
        let m = GoModel {
            component_id: None,
            v0,
            b,
            end_of_test,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn with_component_id(mut self, id: impl Into<String>) -> Self {
        self.component_id = Some(id.into());
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.v0.is_finite() && self.v0 > 0.0) {
            return Err(ModelError::InvalidScale(self.v0));
        }
        if !(self.b.is_finite() && self.b > 0.0) {
            return Err(ModelError::InvalidRate(self.b));
        }
        if !(self.end_of_test.is_finite() && self.end_of_test > 0.0) {
            return Err(ModelError::InvalidEndOfTest(self.end_of_test));
        }
        Ok(())
    }

    /// Expected failures by `tau`.
    pub fn mean_value(&self, tau: f64) -> Result<f64, ModelError> {
        check_time(tau)?;
        Ok(self.mu(tau))
    }

    /// Failure intensity `λ(τ) = v0·b·e^{-bτ}`.
    pub fn intensity(&self, tau: f64) -> Result<f64, ModelError> {
        check_time(tau)?;
        Ok(self.v0 * self.b * (-self.b * tau).exp())
    }

    pub(crate) fn mu(&self, tau: f64) -> f64 {
        self.v0 * one_minus_exp_neg(self.b * tau)
    }

    /// The unconditional reliability `e^{-bτ}`.
    pub fn unconditional_reliability(&self) -> ExpPoly {
        ExpPoly::exponential(self.b).expect("validated rate")
    }

    /// `bT` below [`NEAR_HOMOGENEOUS_BT`].
    pub fn is_near_homogeneous(&self) -> bool {
        self.b * self.end_of_test < NEAR_HOMOGENEOUS_BT
    }
}

fn check_time(tau: f64) -> Result<(), ModelError> {
    if tau >= 0.0 {
        Ok(())
    } else {
        Err(ModelError::NegativeTime(tau))
    }
}

/// `h(x) = 1/x - 1/(eˣ - 1)`.
fn h(x: f64) -> f64 {
    if x < 1e-4 {
        // 1/2 - x/12 + x³/720
        0.5 - x / 12.0 + x * x * x / 720.0
    } else {
        1.0 / x - 1.0 / x.exp_m1()
    }
}

struct Normalized {
    n: f64,
    sum_u: f64,
}

fn normalize(data: &FailureDataset) -> Normalized {
    let t_end = data.end_of_test();
    Normalized {
        n: data.len() as f64,
        sum_u: data.times().iter().map(|t| t / t_end).sum(),
    }
}

/// Profile score divided by `T`, at rate `b`. Zero at the MLE.
pub fn score(data: &FailureDataset, b: f64) -> f64 {
    let Normalized { n, sum_u } = normalize(data);
    n * h(b * data.end_of_test()) - sum_u
}

/// Maximum-likelihood Goel–Okumoto fit.
///
/// The root of the score is bracketed in `x = bT` between [`MIN_BT`] and an
/// upper end doubled from 1 until the score turns negative, then bisected
/// down to adjacent floating-point values.
pub fn fit_go(data: &FailureDataset) -> Result<GoModel, FitError> {
    match data.len() {
        0 => return Err(FitError::FailureFree),
        1 => return Err(FitError::TooFewFailures { n: 1 }),
        _ => {}
    }
    let Normalized { n, sum_u } = normalize(data);
    let g = |x: f64| n * h(x) - sum_u;

    let mut lo = MIN_BT;
    if g(lo) <= 0.0 {
        return Err(FitError::NearHomogeneous {
            mean_ratio: sum_u / n,
        });
    }
    let mut hi = 1.0;
    let mut doublings = 0;
    while g(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 1100 || !hi.is_finite() {
            return Err(FitError::NoRoot { upper: hi });
        }
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = if g(lo).abs() <= g(hi).abs() { lo } else { hi };
    let t_end = data.end_of_test();
    Ok(GoModel {
        component_id: data.component_id().map(str::to_string),
        v0: n / one_minus_exp_neg(x),
        b: x / t_end,
        end_of_test: t_end,
    })
}
