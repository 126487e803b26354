use std::sync::Arc;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::One;
use rand::{CryptoRng, RngCore};

use super::PsiError;
use crate::he::{GroupParams, HeError};

/// `f_e(x) = x^e mod p` on the prime-order subgroup.
///
/// Keys commute (`f_a(f_b(x)) = f_b(f_a(x))`) and, with `gcd(e, q) = 1`, each
/// one is a bijection on the subgroup.
#[derive(Clone)]
pub struct CommutativeKey {
    params: Arc<GroupParams>,
    e: BigUint,
}

impl std::fmt::Debug for CommutativeKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CommutativeKey").finish_non_exhaustive()
    }
}

impl CommutativeKey {
    pub fn generate<R: RngCore + CryptoRng>(params: Arc<GroupParams>, rng: &mut R) -> Self {
        let e = params.random_scalar(rng);
        Self { params, e }
    }

    pub fn from_exponent(params: Arc<GroupParams>, e: BigUint) -> Result<Self, PsiError> {
        if !e.gcd(params.order()).is_one() {
            return Err(PsiError::He(HeError::InvalidKey(
                "exponent must be coprime to the group order".into(),
            )));
        }
        Ok(Self { params, e })
    }

    pub fn params(&self) -> &GroupParams {
        &self.params
    }

    pub fn apply(&self, x: &BigUint) -> Result<BigUint, PsiError> {
        if !self.params.is_member(x) {
            return Err(PsiError::He(HeError::NotInSubgroup));
        }
        Ok(self.params.pow(x, &self.e))
    }

    /// The key with exponent `e^{-1} mod q`.
    pub fn inverse(&self) -> Self {
        let e = self.e.modinv(self.params.order()).expect("e is coprime to q");
        Self {
            params: self.params.clone(),
            e,
        }
    }
}
