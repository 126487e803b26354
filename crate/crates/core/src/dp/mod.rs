//! ε-differential privacy: the Laplace mechanism for real-valued queries and
//! a two-sided geometric mechanism for integer counts.
//!
//! Sampling uses double-precision floats. Floating-point Laplace samplers
//! leak through the low-order bits of their outputs; that attack class is
//! out of scope here.

use rand::{CryptoRng, Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::rng;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum DpError {
    #[error("epsilon must be positive and finite, got {0}")]
    Epsilon(f64),
    #[error("sensitivity must be non-negative and finite, got {0}")]
    Sensitivity(f64),
    #[error("Laplace scale must be positive and finite, got {0}")]
    Scale(f64),
}

/// Privacy budget `ε` and L1 sensitivity `Δf` of the query.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DpParams {
    epsilon: f64,
    sensitivity: f64,
}

impl DpParams {
    pub fn new(epsilon: f64, sensitivity: f64) -> Result<Self, DpError> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(DpError::Epsilon(epsilon));
        }
        if !(sensitivity.is_finite() && sensitivity >= 0.0) {
            return Err(DpError::Sensitivity(sensitivity));
        }
        Ok(Self { epsilon, sensitivity })
    }

    /// Counting queries change by at most one between neighbouring databases.
    pub fn counting(epsilon: f64) -> Result<Self, DpError> {
        Self::new(epsilon, 1.0)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn sensitivity(&self) -> f64 {
        self.sensitivity
    }

    /// Laplace scale `Δf / ε`.
    pub fn scale(&self) -> f64 {
        self.sensitivity / self.epsilon
    }

    /// Geometric ratio `e^(-ε / Δf)`; zero when `Δf = 0`.
    pub fn geometric_alpha(&self) -> f64 {
        if self.sensitivity == 0.0 {
            0.0
        } else {
            (-self.epsilon / self.sensitivity).exp()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mechanism {
    Laplace,
    Geometric,
}

/// Noised query answers plus what is needed to reproduce them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoisyRelease<T> {
    pub values: Vec<T>,
    pub mechanism: Mechanism,
    pub params: DpParams,
    /// Seed of the generator that drew the noise, when it was seeded.
    pub seed: Option<u64>,
}

/// One draw from Laplace(0, b) by inverse CDF: `-b sgn(u) ln(1 - 2|u|)` for
/// `u` uniform on the open interval `(-1/2, 1/2)`.
pub fn laplace_sample<R: RngCore + ?Sized>(b: f64, rng: &mut R) -> Result<f64, DpError> {
    if !(b.is_finite() && b > 0.0) {
        return Err(DpError::Scale(b));
    }
    let u = loop {
        let u: f64 = rng.gen::<f64>() - 0.5;
        if u != -0.5 {
            break u;
        }
    };
    Ok(-b * u.signum() * (1.0 - 2.0 * u.abs()).ln())
}

/// Adds independent Laplace(Δf/ε) noise to every component.
pub fn laplace_mechanism<R: RngCore + CryptoRng>(values: &[f64], params: DpParams, rng: &mut R) -> NoisyRelease<f64> {
    let values = if params.sensitivity == 0.0 {
        values.to_vec()
    } else {
        let b = params.scale();
        values
            .iter()
            .map(|v| v + laplace_sample(b, rng).expect("scale checked by DpParams"))
            .collect()
    };
    NoisyRelease {
        values,
        mechanism: Mechanism::Laplace,
        params,
        seed: None,
    }
}

/// Draw from the geometric distribution `P(k) = (1 - α) α^k`, `k >= 0`.
fn geometric<R: RngCore + ?Sized>(alpha: f64, rng: &mut R) -> i64 {
    if alpha <= 0.0 {
        return 0;
    }
    // 1 - gen() lies in (0, 1], so the logarithm is finite.
    let u = 1.0 - rng.gen::<f64>();
    (u.ln() / alpha.ln()).floor() as i64
}

/// Two-sided geometric noise, `P(k) ∝ α^|k|` with `α = e^(-ε/Δf)`, drawn as
/// the difference of two one-sided geometric variables.
pub fn geometric_noise<R: RngCore + ?Sized>(params: DpParams, rng: &mut R) -> i64 {
    let alpha = params.geometric_alpha();
    geometric(alpha, rng) - geometric(alpha, rng)
}

pub fn geometric_mechanism<R: RngCore + CryptoRng>(value: i64, params: DpParams, rng: &mut R) -> i64 {
    value.saturating_add(geometric_noise(params, rng))
}

/// Laplace release with noise drawn from a generator derived from `seed`.
pub fn laplace_release(values: &[f64], params: DpParams, seed: u64) -> NoisyRelease<f64> {
    let mut r = rng::derive(seed, "dp/laplace");
    NoisyRelease {
        seed: Some(seed),
        ..laplace_mechanism(values, params, &mut r)
    }
}

/// Geometric release of integer counts with noise derived from `seed`.
pub fn geometric_release(values: &[i64], params: DpParams, seed: u64) -> NoisyRelease<i64> {
    let mut r = rng::derive(seed, "dp/geometric");
    NoisyRelease {
        values: values.iter().map(|&v| geometric_mechanism(v, params, &mut r)).collect(),
        mechanism: Mechanism::Geometric,
        params,
        seed: Some(seed),
    }
}
