use std::collections::HashMap;

use num_bigint::BigUint;

use super::group::GroupParams;
use super::HeError;

/// Baby-step giant-step table for discrete logs in `[-bound, bound]`.
///
/// Holds `2^table_bits` baby steps `g^j`; a search then takes at most
/// `(2 * bound + 1) / 2^table_bits` giant steps. Every result is re-encoded
/// and compared against the input before it is returned, so a failed search
/// is always reported as [`HeError::RangeExceeded`] and never as a wrong
/// integer.
#[derive(Clone, Debug)]
pub struct BsgsTable {
    bound: u64,
    table_bits: u32,
    baby: HashMap<BigUint, u64>,
    // g^bound, shifts the search window to [0, 2 * bound].
    shift: BigUint,
    // g^(-2^table_bits)
    giant: BigUint,
}

impl BsgsTable {
    pub fn new(params: &GroupParams, bound: u64, table_bits: u32) -> Self {
        assert!(table_bits < 32, "table too large");
        let steps = 1u64 << table_bits;
        let mut baby = HashMap::with_capacity(steps as usize);
        let mut cur = params.identity();
        for j in 0..steps {
            // A tiny group wraps around; keep the first index per element.
            baby.entry(cur.clone()).or_insert(j);
            cur = params.mul(&cur, params.generator());
        }
        let giant = params.inv(&params.exp_g(&BigUint::from(steps)));
        let shift = params.exp_g(&BigUint::from(bound));
        Self {
            bound,
            table_bits,
            baby,
            shift,
            giant,
        }
    }

    pub fn bound(&self) -> u64 {
        self.bound
    }

    pub fn table_bits(&self) -> u32 {
        self.table_bits
    }

    /// Finds `m` in `[-bound, bound]` with `g^m = target`.
    pub fn solve(&self, params: &GroupParams, target: &BigUint) -> Result<i64, HeError> {
        let width = 2 * self.bound + 1;
        let steps = 1u64 << self.table_bits;
        let giants = width.div_ceil(steps);
        let mut cur = params.mul(target, &self.shift);
        for i in 0..giants {
            if let Some(&j) = self.baby.get(&cur) {
                let shifted = i * steps + j;
                if shifted < width {
                    let m = shifted as i64 - self.bound as i64;
                    if self.verify(params, m, target) {
                        return Ok(m);
                    }
                }
            }
            cur = params.mul(&cur, &self.giant);
        }
        Err(HeError::RangeExceeded { bound: self.bound })
    }

    fn verify(&self, params: &GroupParams, m: i64, target: &BigUint) -> bool {
        let e = BigUint::from(m.unsigned_abs());
        let g_abs = params.exp_g(&e);
        let encoded = if m < 0 { params.inv(&g_abs) } else { g_abs };
        &encoded == target
    }
}
