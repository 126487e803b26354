use std::fmt;

use num_bigint::BigInt;
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};

use super::bsgs::BsgsTable;
use super::elgamal::{Ciphertext, KeyPair, PublicKey};
use super::paillier::{PaillierCiphertext, PaillierKeyPair, PaillierPublicKey};
use super::{HeError, DEFAULT_RANGE_BOUND, DEFAULT_TABLE_BITS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    /// ElGamal with the plaintext in the exponent; bounded decryption.
    ExpElGamal,
    /// Composite residuosity; decrypts the whole plaintext ring.
    Paillier,
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchemeKind::ExpElGamal => "exp-elgamal",
            SchemeKind::Paillier => "paillier",
        })
    }
}

/// Public half of an additively homomorphic scheme over signed integers.
pub trait AdditiveHe: Clone + fmt::Debug {
    type Ciphertext: Clone + fmt::Debug + PartialEq;

    fn kind(&self) -> SchemeKind;

    fn encrypt<R: RngCore + CryptoRng>(&self, m: i64, rng: &mut R) -> Result<Self::Ciphertext, HeError>;

    fn add(&self, a: &Self::Ciphertext, b: &Self::Ciphertext) -> Result<Self::Ciphertext, HeError>;

    /// `k * Dec(a)`; negative `k` goes through group inversion.
    fn scalar_mul(&self, a: &Self::Ciphertext, k: i64) -> Result<Self::Ciphertext, HeError>;

    fn rerandomize<R: RngCore + CryptoRng>(&self, a: &Self::Ciphertext, rng: &mut R) -> Self::Ciphertext;

    fn public_key_bytes(&self) -> Vec<u8>;

    fn from_public_key_bytes(bytes: &[u8]) -> Result<Self, HeError>
    where
        Self: Sized;

    fn ciphertext_to_bytes(&self, ct: &Self::Ciphertext) -> Vec<u8>;

    fn ciphertext_from_bytes(&self, bytes: &[u8]) -> Result<Self::Ciphertext, HeError>;
}

/// Secret half: decryption back to integers.
pub trait AdditiveDecrypt {
    type Public: AdditiveHe;

    fn public(&self) -> &Self::Public;

    fn decrypt(&self, ct: &<Self::Public as AdditiveHe>::Ciphertext) -> Result<i64, HeError>;

    fn is_zero(&self, ct: &<Self::Public as AdditiveHe>::Ciphertext) -> Result<bool, HeError> {
        Ok(self.decrypt(ct)? == 0)
    }
}

/// Exponential ElGamal: `Enc(m) = (g^y, g^m h^y)` for `|m| <= bound`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExpElGamal {
    pk: PublicKey,
    bound: u64,
}

impl ExpElGamal {
    pub fn new(pk: PublicKey) -> Self {
        Self::with_bound(pk, DEFAULT_RANGE_BOUND)
    }

    pub fn with_bound(pk: PublicKey, bound: u64) -> Self {
        Self { pk, bound }
    }

    pub fn public_key(&self) -> &PublicKey {
        &self.pk
    }

    pub fn bound(&self) -> u64 {
        self.bound
    }
}

impl AdditiveHe for ExpElGamal {
    type Ciphertext = Ciphertext;

    fn kind(&self) -> SchemeKind {
        SchemeKind::ExpElGamal
    }

    fn encrypt<R: RngCore + CryptoRng>(&self, m: i64, rng: &mut R) -> Result<Ciphertext, HeError> {
        if m.unsigned_abs() > self.bound {
            return Err(HeError::PlaintextOutOfRange {
                value: m.to_string(),
                bound: self.bound.to_string(),
            });
        }
        Ok(self.pk.encrypt_signed_exponent(m, rng))
    }

    fn add(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext, HeError> {
        self.pk.mul_ct(a, b)
    }

    fn scalar_mul(&self, a: &Ciphertext, k: i64) -> Result<Ciphertext, HeError> {
        let k = self.pk.reduce_signed(&BigInt::from(k));
        self.pk.pow_ct(a, &k)
    }

    fn rerandomize<R: RngCore + CryptoRng>(&self, a: &Ciphertext, rng: &mut R) -> Ciphertext {
        self.pk.rerandomize(a, rng)
    }

    fn public_key_bytes(&self) -> Vec<u8> {
        self.pk.to_bytes()
    }

    fn from_public_key_bytes(bytes: &[u8]) -> Result<Self, HeError> {
        PublicKey::from_bytes(bytes).map(Self::new)
    }

    fn ciphertext_to_bytes(&self, ct: &Ciphertext) -> Vec<u8> {
        ct.to_bytes(self.pk.params().element_len())
    }

    fn ciphertext_from_bytes(&self, bytes: &[u8]) -> Result<Ciphertext, HeError> {
        self.pk.ciphertext_from_bytes(bytes)
    }
}

/// Exponential ElGamal key pair plus its discrete-log table.
#[derive(Clone, Debug)]
pub struct ExpElGamalSecret {
    keys: KeyPair,
    scheme: ExpElGamal,
    table: BsgsTable,
}

impl ExpElGamalSecret {
    pub fn new(keys: KeyPair) -> Self {
        Self::with_params(keys, DEFAULT_RANGE_BOUND, DEFAULT_TABLE_BITS)
    }

    pub fn with_params(keys: KeyPair, bound: u64, table_bits: u32) -> Self {
        let table = BsgsTable::new(keys.params(), bound, table_bits);
        let scheme = ExpElGamal::with_bound(keys.public().clone(), bound);
        Self { keys, scheme, table }
    }

    pub fn keys(&self) -> &KeyPair {
        &self.keys
    }
}

impl AdditiveDecrypt for ExpElGamalSecret {
    type Public = ExpElGamal;

    fn public(&self) -> &ExpElGamal {
        &self.scheme
    }

    fn decrypt(&self, ct: &Ciphertext) -> Result<i64, HeError> {
        let target = self.keys.decrypt_mul(ct)?;
        self.table.solve(self.keys.params(), &target)
    }

    fn is_zero(&self, ct: &Ciphertext) -> Result<bool, HeError> {
        self.keys.is_zero(ct)
    }
}

impl AdditiveHe for PaillierPublicKey {
    type Ciphertext = PaillierCiphertext;

    fn kind(&self) -> SchemeKind {
        SchemeKind::Paillier
    }

    fn encrypt<R: RngCore + CryptoRng>(&self, m: i64, rng: &mut R) -> Result<PaillierCiphertext, HeError> {
        PaillierPublicKey::encrypt(self, &BigInt::from(m), rng)
    }

    fn add(&self, a: &PaillierCiphertext, b: &PaillierCiphertext) -> Result<PaillierCiphertext, HeError> {
        PaillierPublicKey::add(self, a, b)
    }

    fn scalar_mul(&self, a: &PaillierCiphertext, k: i64) -> Result<PaillierCiphertext, HeError> {
        PaillierPublicKey::scalar_mul(self, a, &BigInt::from(k))
    }

    fn rerandomize<R: RngCore + CryptoRng>(&self, a: &PaillierCiphertext, rng: &mut R) -> PaillierCiphertext {
        PaillierPublicKey::rerandomize(self, a, rng)
    }

    fn public_key_bytes(&self) -> Vec<u8> {
        self.to_bytes()
    }

    fn from_public_key_bytes(bytes: &[u8]) -> Result<Self, HeError> {
        PaillierPublicKey::from_bytes(bytes)
    }

    fn ciphertext_to_bytes(&self, ct: &PaillierCiphertext) -> Vec<u8> {
        PaillierPublicKey::ciphertext_to_bytes(self, ct)
    }

    fn ciphertext_from_bytes(&self, bytes: &[u8]) -> Result<PaillierCiphertext, HeError> {
        PaillierPublicKey::ciphertext_from_bytes(self, bytes)
    }
}

impl AdditiveDecrypt for PaillierKeyPair {
    type Public = PaillierPublicKey;

    fn public(&self) -> &PaillierPublicKey {
        PaillierKeyPair::public(self)
    }

    fn decrypt(&self, ct: &PaillierCiphertext) -> Result<i64, HeError> {
        self.decrypt_i64(ct)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::he::{keygen, GroupParams};
    use crate::rng;

    fn elgamal() -> ExpElGamalSecret {
        let keys = keygen(&GroupParams::reference(), &mut rng::seeded(21));
        ExpElGamalSecret::new(keys)
    }

    fn sum_of<D: AdditiveDecrypt>(sk: &D, values: &[i64], seed: u64) -> i64 {
        let pk = sk.public();
        let mut r = rng::seeded(seed);
        let mut acc = pk.encrypt(0, &mut r).unwrap();
        for &v in values {
            acc = pk.add(&acc, &pk.encrypt(v, &mut r).unwrap()).unwrap();
        }
        sk.decrypt(&acc).unwrap()
    }

    #[test]
    fn exp_elgamal_small_vectors() {
        let sk = elgamal();
        assert_eq!(sum_of(&sk, &[], 1), 0);
        assert_eq!(sum_of(&sk, &[3, 4], 2), 7);
        assert_eq!(sum_of(&sk, &[2, 3, -1], 3), 4);
        let pk = sk.public();
        let mut r = rng::seeded(4);
        let five = pk.encrypt(5, &mut r).unwrap();
        assert_eq!(sk.decrypt(&pk.scalar_mul(&five, 0).unwrap()).unwrap(), 0);
        let three = pk.encrypt(3, &mut r).unwrap();
        assert_eq!(sk.decrypt(&pk.scalar_mul(&three, 4).unwrap()).unwrap(), 12);
        let minus = pk.encrypt(-5, &mut r).unwrap();
        assert!(sk.is_zero(&pk.add(&five, &minus).unwrap()).unwrap());
    }

    #[test]
    fn exp_elgamal_range_is_enforced_both_ways() {
        let sk = elgamal();
        let pk = sk.public();
        let b = pk.bound() as i64;
        let mut r = rng::seeded(5);
        assert!(matches!(
            pk.encrypt(b + 1, &mut r),
            Err(HeError::PlaintextOutOfRange { .. })
        ));
        // Sums can leave the window; decryption must refuse, not guess.
        let big = pk.encrypt(b, &mut r).unwrap();
        let ten = pk.encrypt(10, &mut r).unwrap();
        let over = pk.add(&big, &ten).unwrap();
        assert_eq!(
            sk.decrypt(&over).unwrap_err(),
            HeError::RangeExceeded { bound: pk.bound() }
        );
        assert!(!sk.is_zero(&over).unwrap());
        assert_eq!(sk.decrypt(&big).unwrap(), b);
    }

    #[test]
    fn rerandomized_ciphertexts_are_all_distinct() {
        let sk = elgamal();
        let pk = sk.public();
        let mut r = rng::seeded(6);
        let one = pk.encrypt(1, &mut r).unwrap();
        let mut seen = std::collections::HashSet::new();
        seen.insert(one.clone());
        for _ in 0..1000 {
            assert!(seen.insert(pk.rerandomize(&one, &mut r)));
        }
        let again = pk.rerandomize(&one, &mut r);
        assert_eq!(sk.decrypt(&again).unwrap(), 1);
        let zero = pk.encrypt(0, &mut r).unwrap();
        assert!(sk.is_zero(&pk.rerandomize(&zero, &mut r)).unwrap());
    }

    #[test]
    fn paillier_agrees_with_exp_elgamal() {
        let eg = elgamal();
        let pa = PaillierKeyPair::generate(256, &mut rng::seeded(7)).unwrap();
        let values = [17, -3, 250, 0, -99];
        assert_eq!(sum_of(&eg, &values, 8), 165);
        assert_eq!(sum_of(&pa, &values, 9), 165);
    }
}
