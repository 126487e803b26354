//! Composite-residuosity additive encryption with `g = n + 1`.
//!
//! `Enc(m) = (1 + m n) r^n mod n^2`, `Dec(c) = L(c^lambda mod n^2) * mu mod n`
//! with `L(u) = (u - 1) / n`. Plaintexts are signed and live in the centred
//! range `(-n/2, n/2)`.

use std::fmt;

use num_bigint::{BigInt, BigUint, RandBigInt, Sign};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::{CryptoRng, RngCore};
use sha2::{Digest, Sha256};

use super::wire::{self, Reader};
use super::{HeError, KeyFingerprint};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PaillierPublicKey {
    n: BigUint,
    n_squared: BigUint,
    fingerprint: KeyFingerprint,
}

#[derive(Clone)]
pub struct PaillierKeyPair {
    public: PaillierPublicKey,
    p: BigUint,
    q: BigUint,
    lambda: BigUint,
    mu: BigUint,
}

impl fmt::Debug for PaillierKeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PaillierKeyPair")
            .field("public", &self.public)
            .finish_non_exhaustive()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PaillierCiphertext {
    c: BigUint,
    key: KeyFingerprint,
}

impl PaillierCiphertext {
    pub fn value(&self) -> &BigUint {
        &self.c
    }
}

impl PaillierKeyPair {
    /// Generates a key with an `n` of `modulus_bits` bits (at least 256).
    pub fn generate<R: RngCore + CryptoRng>(modulus_bits: usize, rng: &mut R) -> Result<Self, HeError> {
        if modulus_bits < 256 || modulus_bits % 2 != 0 {
            return Err(HeError::InvalidKey(format!(
                "modulus must be an even bit length of at least 256, got {modulus_bits}"
            )));
        }
        loop {
            let p = glass_pumpkin::prime::from_rng(modulus_bits / 2, rng)
                .map_err(|e| HeError::InvalidKey(e.to_string()))?;
            let q = glass_pumpkin::prime::from_rng(modulus_bits / 2, rng)
                .map_err(|e| HeError::InvalidKey(e.to_string()))?;
            if p == q {
                continue;
            }
            if let Ok(keys) = Self::from_primes(&p, &q) {
                return Ok(keys);
            }
        }
    }

    pub fn from_primes(p: &BigUint, q: &BigUint) -> Result<Self, HeError> {
        let n = p * q;
        let phi = (p - 1u32) * (q - 1u32);
        if !n.gcd(&phi).is_one() {
            return Err(HeError::InvalidKey("gcd(n, phi(n)) != 1".into()));
        }
        let lambda = (p - 1u32).lcm(&(q - 1u32));
        let public = PaillierPublicKey::new(n)?;
        let u = (&public.n + 1u32).modpow(&lambda, &public.n_squared);
        let l = (u - 1u32) / &public.n;
        let mu = l
            .modinv(&public.n)
            .ok_or_else(|| HeError::InvalidKey("L(g^lambda) not invertible".into()))?;
        Ok(Self {
            public,
            p: p.clone(),
            q: q.clone(),
            lambda,
            mu,
        })
    }

    pub fn public(&self) -> &PaillierPublicKey {
        &self.public
    }

    /// The factors of `n`.
    pub fn primes(&self) -> (&BigUint, &BigUint) {
        (&self.p, &self.q)
    }

    /// Decrypts to the centred representative.
    pub fn decrypt(&self, ct: &PaillierCiphertext) -> Result<BigInt, HeError> {
        self.public.check(ct)?;
        let pk = &self.public;
        let u = ct.c.modpow(&self.lambda, &pk.n_squared);
        let l = (u - 1u32) / &pk.n;
        let m = (l * &self.mu) % &pk.n;
        Ok(pk.centre(m))
    }

    pub fn decrypt_i64(&self, ct: &PaillierCiphertext) -> Result<i64, HeError> {
        let m = self.decrypt(ct)?;
        m.to_i64().ok_or_else(|| HeError::RangeExceeded { bound: i64::MAX as u64 })
    }
}

impl PaillierPublicKey {
    pub fn new(n: BigUint) -> Result<Self, HeError> {
        if n.bits() < 128 {
            return Err(HeError::InvalidKey("modulus too small".into()));
        }
        let n_squared = &n * &n;
        let digest = Sha256::digest(n.to_bytes_be());
        Ok(Self {
            n,
            n_squared,
            fingerprint: digest[..8].try_into().expect("8 bytes"),
        })
    }

    pub fn modulus(&self) -> &BigUint {
        &self.n
    }

    pub fn fingerprint(&self) -> KeyFingerprint {
        self.fingerprint
    }

    fn check(&self, ct: &PaillierCiphertext) -> Result<(), HeError> {
        if ct.key != self.fingerprint {
            return Err(HeError::KeyMismatch);
        }
        if ct.c.is_zero() || ct.c >= self.n_squared {
            return Err(HeError::MalformedCiphertext("value outside (0, n^2)".into()));
        }
        Ok(())
    }

    fn centre(&self, m: BigUint) -> BigInt {
        let half = &self.n >> 1;
        if m > half {
            BigInt::from_biguint(Sign::Plus, m) - BigInt::from_biguint(Sign::Plus, self.n.clone())
        } else {
            BigInt::from_biguint(Sign::Plus, m)
        }
    }

    fn reduce(&self, m: &BigInt) -> Result<BigUint, HeError> {
        let n = BigInt::from_biguint(Sign::Plus, self.n.clone());
        let half: BigInt = &n >> 1usize;
        if m.magnitude() > half.magnitude() {
            return Err(HeError::PlaintextOutOfRange {
                value: m.to_string(),
                bound: half.to_string(),
            });
        }
        Ok(m.mod_floor(&n).to_biguint().expect("non-negative"))
    }

    fn random_unit<R: RngCore + CryptoRng>(&self, rng: &mut R) -> BigUint {
        loop {
            let r = rng.gen_biguint_range(&BigUint::one(), &self.n);
            if r.gcd(&self.n).is_one() {
                return r;
            }
        }
    }

    pub fn encrypt<R: RngCore + CryptoRng>(&self, m: &BigInt, rng: &mut R) -> Result<PaillierCiphertext, HeError> {
        let m = self.reduce(m)?;
        let r = self.random_unit(rng);
        let gm = (&m * &self.n + 1u32) % &self.n_squared;
        let c = (gm * r.modpow(&self.n, &self.n_squared)) % &self.n_squared;
        Ok(PaillierCiphertext {
            c,
            key: self.fingerprint,
        })
    }

    pub fn add(&self, a: &PaillierCiphertext, b: &PaillierCiphertext) -> Result<PaillierCiphertext, HeError> {
        self.check(a)?;
        self.check(b)?;
        Ok(PaillierCiphertext {
            c: (&a.c * &b.c) % &self.n_squared,
            key: self.fingerprint,
        })
    }

    pub fn scalar_mul(&self, a: &PaillierCiphertext, k: &BigInt) -> Result<PaillierCiphertext, HeError> {
        self.check(a)?;
        let base = if k.sign() == Sign::Minus {
            a.c.modinv(&self.n_squared)
                .ok_or_else(|| HeError::MalformedCiphertext("not a unit mod n^2".into()))?
        } else {
            a.c.clone()
        };
        Ok(PaillierCiphertext {
            c: base.modpow(k.magnitude(), &self.n_squared),
            key: self.fingerprint,
        })
    }

    pub fn rerandomize<R: RngCore + CryptoRng>(&self, a: &PaillierCiphertext, rng: &mut R) -> PaillierCiphertext {
        let r = self.random_unit(rng);
        PaillierCiphertext {
            c: (&a.c * r.modpow(&self.n, &self.n_squared)) % &self.n_squared,
            key: a.key,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![wire::TAG_PAILLIER_PUBLIC];
        wire::put_uint(&mut out, &self.n);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, HeError> {
        let mut r = Reader::new(bytes);
        r.tag(wire::TAG_PAILLIER_PUBLIC)?;
        let n = r.uint()?;
        r.finish()?;
        Self::new(n)
    }

    pub fn ciphertext_to_bytes(&self, ct: &PaillierCiphertext) -> Vec<u8> {
        let width = ((self.n_squared.bits() + 7) / 8) as usize;
        let raw = ct.c.to_bytes_be();
        let mut padded = vec![0u8; width.saturating_sub(raw.len())];
        padded.extend_from_slice(&raw);
        let mut out = vec![wire::TAG_PAILLIER_CIPHERTEXT];
        wire::put_bytes(&mut out, &padded);
        out
    }

    pub fn ciphertext_from_bytes(&self, bytes: &[u8]) -> Result<PaillierCiphertext, HeError> {
        let mut r = Reader::new(bytes);
        let malformed = |e: HeError| HeError::MalformedCiphertext(e.to_string());
        r.tag(wire::TAG_PAILLIER_CIPHERTEXT).map_err(malformed)?;
        let c = r.uint().map_err(malformed)?;
        r.finish().map_err(malformed)?;
        let ct = PaillierCiphertext {
            c,
            key: self.fingerprint,
        };
        self.check(&ct)?;
        if !ct.c.gcd(&self.n).is_one() {
            return Err(HeError::MalformedCiphertext("not a unit mod n".into()));
        }
        Ok(ct)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn keys() -> PaillierKeyPair {
        PaillierKeyPair::generate(256, &mut rng::seeded(11)).unwrap()
    }

    #[test]
    fn from_known_primes() {
        // 2^128 - 159 and 2^128 - 173
        let p = BigUint::parse_bytes(b"340282366920938463463374607431768211297", 10).unwrap();
        let q = BigUint::parse_bytes(b"340282366920938463463374607431768211283", 10).unwrap();
        let kp = PaillierKeyPair::from_primes(&p, &q).unwrap();
        let mut r = rng::seeded(1);
        let ct = kp.public().encrypt(&BigInt::from(-42), &mut r).unwrap();
        assert_eq!(kp.decrypt_i64(&ct).unwrap(), -42);
    }

    #[test]
    fn additive_and_scalar_homomorphism() {
        let kp = keys();
        let pk = kp.public();
        let mut r = rng::seeded(2);
        let a = pk.encrypt(&BigInt::from(1234), &mut r).unwrap();
        let b = pk.encrypt(&BigInt::from(-5000), &mut r).unwrap();
        assert_eq!(kp.decrypt_i64(&pk.add(&a, &b).unwrap()).unwrap(), -3766);
        assert_eq!(kp.decrypt_i64(&pk.scalar_mul(&a, &BigInt::from(-3)).unwrap()).unwrap(), -3702);
        let c = pk.rerandomize(&a, &mut r);
        assert_ne!(c, a);
        assert_eq!(kp.decrypt_i64(&c).unwrap(), 1234);
    }

    #[test]
    fn out_of_range_plaintext_is_rejected() {
        let kp = keys();
        let n = BigInt::from_biguint(Sign::Plus, kp.public().modulus().clone());
        let err = kp.public().encrypt(&n, &mut rng::seeded(0)).unwrap_err();
        assert!(matches!(err, HeError::PlaintextOutOfRange { .. }));
    }

    #[test]
    fn ciphertext_bytes_round_trip() {
        let kp = keys();
        let pk = kp.public();
        let ct = pk.encrypt(&BigInt::from(7), &mut rng::seeded(3)).unwrap();
        let bytes = pk.ciphertext_to_bytes(&ct);
        assert_eq!(pk.ciphertext_from_bytes(&bytes).unwrap(), ct);
        assert_eq!(PaillierPublicKey::from_bytes(&pk.to_bytes()).unwrap(), *pk);
    }
}
