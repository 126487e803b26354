use serde::{Deserialize, Serialize};

use super::HeError;

/// Signed fixed-point encoding of reals as integers `round(v * 2^f)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPointParams {
    pub scale_bits: u32,
    /// Largest real magnitude accepted by [`encode`](Self::encode).
    pub magnitude_bound: f64,
}

impl Default for FixedPointParams {
    fn default() -> Self {
        Self {
            scale_bits: 16,
            magnitude_bound: (1u64 << 20) as f64,
        }
    }
}

impl FixedPointParams {
    pub fn scale(&self) -> f64 {
        (self.scale_bits as f64).exp2()
    }

    pub fn encode(&self, v: f64) -> Result<i64, HeError> {
        if !v.is_finite() || v.abs() > self.magnitude_bound {
            return Err(HeError::PlaintextOutOfRange {
                value: v.to_string(),
                bound: self.magnitude_bound.to_string(),
            });
        }
        Ok((v * self.scale()).round() as i64)
    }

    pub fn decode(&self, x: i64) -> f64 {
        x as f64 / self.scale()
    }

    /// Largest encoded integer a sum of `terms` in-range values can reach.
    pub fn max_encoded_sum(&self, terms: usize) -> f64 {
        self.magnitude_bound * self.scale() * terms as f64
    }
}
