//! Synthetic Goel–Okumoto failure data.
//!
//! The failure count up to `T` is Poisson with mean `μ(T)`, and given the
//! count the failure times are i.i.d. with CDF `μ(t)/μ(T)`, which inverts in
//! closed form:
//!
//! ```text
//! t = -ln(1 - u·(1 - e^{-bT})) / b
//! ```
//!
//! Randomness comes from ChaCha8 seeded with a `u64`, so a seed produces the
//! same dataset on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datasets::FailureDataset;
use crate::gofit::{one_minus_exp_neg, GoModel, ModelError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid simulation parameters: {0}")]
    Invalid(#[from] ModelError),
    #[error("expected failure count {0} is too large to simulate")]
    TooLarge(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    pub v0: f64,
    pub b: f64,
    pub end_of_test: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub component_id: Option<String>,
}

impl SimSpec {
    pub fn new(v0: f64, b: f64, end_of_test: f64, seed: u64) -> Self {
        SimSpec {
            v0,
            b,
            end_of_test,
            seed,
            component_id: None,
        }
    }

    pub fn model(&self) -> Result<GoModel, ModelError> {
        GoModel::new(self.v0, self.b, self.end_of_test)
    }
}

/// Upper limit on the expected count, to keep allocations bounded.
const MAX_EXPECTED: f64 = 1e8;

pub fn generate(spec: &SimSpec) -> Result<FailureDataset, SimError> {
    spec.model()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let found_by_end = one_minus_exp_neg(spec.b * spec.end_of_test);
    let expected = spec.v0 * found_by_end;
    if expected > MAX_EXPECTED {
        return Err(SimError::TooLarge(expected));
    }
    let count = if expected > 0.0 {
        Poisson::new(expected)
            .expect("mean is finite and positive")
            .sample(&mut rng) as usize
    } else {
        0
    };

    let draw = |rng: &mut ChaCha8Rng| {
        // 1 - u lies in (0, 1], so every time is strictly positive
        let w = 1.0 - rng.random::<f64>();
        (-(-w * found_by_end).ln_1p() / spec.b).min(spec.end_of_test)
    };
    let mut times: Vec<f64> = (0..count).map(|_| draw(&mut rng)).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    // ties have probability ~0 but would break strict ordering
    while times.len() < count {
        let t = draw(&mut rng);
        if let Err(pos) = times.binary_search_by(|x| x.total_cmp(&t)) {
            times.insert(pos, t);
        }
    }
    Ok(FailureDataset::new(spec.component_id.clone(), times, spec.end_of_test)
        .expect("generated times are positive, sorted and within the test"))
}
