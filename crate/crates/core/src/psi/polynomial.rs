use std::collections::HashSet;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand::{CryptoRng, RngCore};

use super::PsiError;
use crate::he::{Ciphertext, PublicKey};

/// `f(x) = a_0 + a_1 x + ... + a_n x^n = ∏ (x - s_i)` over `Z_q`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RootPolynomial {
    coeffs: Vec<BigUint>,
    q: BigUint,
}

impl RootPolynomial {
    pub fn from_roots(roots: &[BigUint], q: &BigUint) -> Result<Self, PsiError> {
        let mut seen = HashSet::with_capacity(roots.len());
        let mut coeffs = vec![BigUint::one()];
        for s in roots {
            if s >= q {
                return Err(PsiError::OutOfField(s.to_string()));
            }
            if !seen.insert(s) {
                return Err(PsiError::DuplicateRoot(s.to_string()));
            }
            // Multiply by (x - s): new[i] = old[i-1] - s * old[i].
            let neg_s = (q - s) % q;
            let mut next = vec![BigUint::zero(); coeffs.len() + 1];
            for (i, a) in coeffs.iter().enumerate() {
                next[i] = (&next[i] + a * &neg_s) % q;
                next[i + 1] = (&next[i + 1] + a) % q;
            }
            coeffs = next;
        }
        Ok(Self { coeffs, q: q.clone() })
    }

    /// Coefficients `a_0..a_n`, lowest degree first.
    pub fn coeffs(&self) -> &[BigUint] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn modulus(&self) -> &BigUint {
        &self.q
    }

    pub fn eval(&self, x: &BigUint) -> BigUint {
        let x = x % &self.q;
        self.coeffs
            .iter()
            .rev()
            .fold(BigUint::zero(), |acc, a| (acc * &x + a) % &self.q)
    }
}

/// `Enc(a_0), ..., Enc(a_n)` with each coefficient in the exponent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncPolynomial {
    coeffs: Vec<Ciphertext>,
}

impl EncPolynomial {
    pub fn encrypt<R: RngCore + CryptoRng>(pk: &PublicKey, poly: &RootPolynomial, rng: &mut R) -> Self {
        Self {
            coeffs: poly.coeffs().iter().map(|a| pk.encrypt_exponent(a, rng)).collect(),
        }
    }

    pub fn from_ciphertexts(coeffs: Vec<Ciphertext>) -> Result<Self, PsiError> {
        if coeffs.is_empty() {
            return Err(PsiError::Protocol("encrypted polynomial has no coefficients".into()));
        }
        Ok(Self { coeffs })
    }

    pub fn ciphertexts(&self) -> &[Ciphertext] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// `Enc(r f(d) + d)`.
    ///
    /// Horner's rule in ciphertext space: starting from `Enc(a_n)`, each step
    /// raises the accumulator to `d` and multiplies in the next coefficient,
    /// which costs one scalar multiplication per degree. The result is then
    /// raised to `r` and `d` is added in the exponent without encryption.
    pub fn eval(&self, pk: &PublicKey, d: &BigUint, r: &BigUint) -> Result<Ciphertext, PsiError> {
        let q = pk.params().order();
        if (r % q).is_zero() {
            return Err(PsiError::Protocol("blinding factor must be nonzero".into()));
        }
        let d = d % q;
        let mut iter = self.coeffs.iter().rev();
        let mut acc = iter.next().expect("non-empty").clone();
        for c in iter {
            acc = pk.mul_ct(&pk.pow_ct(&acc, &d)?, c)?;
        }
        let blinded = pk.pow_ct(&acc, r)?;
        Ok(pk.add_plain_exponent(&blinded, &d)?)
    }
}
