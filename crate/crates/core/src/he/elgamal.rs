use std::fmt;
use std::sync::Arc;

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{One, Zero};
use rand::{CryptoRng, RngCore};
use sha2::{Digest, Sha256};

use super::group::GroupParams;
use super::wire::{self, Reader};
use super::{HeError, KeyFingerprint};

/// ElGamal secret exponent `x` in `[1, q-1]`.
#[derive(Clone, PartialEq, Eq)]
pub struct SecretKey {
    x: BigUint,
}

impl SecretKey {
    pub fn exponent(&self) -> &BigUint {
        &self.x
    }
}

impl fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SecretKey(..)")
    }
}

/// Public key `(G, q, g, h = g^x)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PublicKey {
    params: Arc<GroupParams>,
    h: BigUint,
    fingerprint: KeyFingerprint,
}

/// ElGamal ciphertext `(c1, c2) = (g^y, m * h^y)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Ciphertext {
    c1: BigUint,
    c2: BigUint,
    key: KeyFingerprint,
}

#[derive(Clone, Debug)]
pub struct KeyPair {
    secret: SecretKey,
    public: PublicKey,
}

/// Draws `x` uniformly from `[1, q-1]` and publishes `h = g^x`.
pub fn keygen<R: RngCore + CryptoRng>(params: &GroupParams, rng: &mut R) -> KeyPair {
    let x = params.random_scalar(rng);
    KeyPair::from_secret(params, x).expect("sampled exponent is in range")
}

impl KeyPair {
    /// Builds a key pair around a chosen secret exponent.
    pub fn from_secret(params: &GroupParams, x: BigUint) -> Result<Self, HeError> {
        if x.is_zero() || &x >= params.order() {
            return Err(HeError::InvalidKey("secret exponent outside [1, q-1]".into()));
        }
        let h = params.exp_g(&x);
        let public = PublicKey::from_parts(Arc::new(params.clone()), h)?;
        Ok(Self {
            secret: SecretKey { x },
            public,
        })
    }

    pub fn public(&self) -> &PublicKey {
        &self.public
    }

    pub fn secret(&self) -> &SecretKey {
        &self.secret
    }

    pub fn params(&self) -> &GroupParams {
        &self.public.params
    }

    /// `m = c2 * (c1^x)^-1`.
    pub fn decrypt_mul(&self, ct: &Ciphertext) -> Result<BigUint, HeError> {
        self.public.check_key(ct)?;
        let grp = self.params();
        let p = grp.modulus();
        if ct.c1.is_zero() || &ct.c1 >= p || ct.c2.is_zero() || &ct.c2 >= p {
            return Err(HeError::MalformedCiphertext(
                "component outside [1, p)".into(),
            ));
        }
        let shared = grp.pow(&ct.c1, &self.secret.x);
        Ok(grp.mul(&ct.c2, &grp.inv(&shared)))
    }

    /// True iff the exponent-encoded plaintext is zero, i.e. the decrypted
    /// group element is the identity. No discrete log is needed.
    pub fn is_zero(&self, ct: &Ciphertext) -> Result<bool, HeError> {
        Ok(self.decrypt_mul(ct)?.is_one())
    }
}

impl PublicKey {
    pub fn from_parts(params: Arc<GroupParams>, h: BigUint) -> Result<Self, HeError> {
        if !params.is_member(&h) || h.is_one() {
            return Err(HeError::InvalidKey("public key is not a subgroup generator".into()));
        }
        let mut hasher = Sha256::new();
        hasher.update(params.to_bytes());
        hasher.update(h.to_bytes_be());
        let fingerprint = hasher.finalize()[..8].try_into().expect("8 bytes");
        Ok(Self {
            params,
            h,
            fingerprint,
        })
    }

    pub fn params(&self) -> &GroupParams {
        &self.params
    }

    pub fn h(&self) -> &BigUint {
        &self.h
    }

    pub fn fingerprint(&self) -> KeyFingerprint {
        self.fingerprint
    }

    fn check_key(&self, ct: &Ciphertext) -> Result<(), HeError> {
        if ct.key == self.fingerprint {
            Ok(())
        } else {
            Err(HeError::KeyMismatch)
        }
    }

    fn make(&self, c1: BigUint, c2: BigUint) -> Ciphertext {
        Ciphertext {
            c1,
            c2,
            key: self.fingerprint,
        }
    }

    /// Encrypts a subgroup element with fresh randomness.
    pub fn encrypt_mul<R: RngCore + CryptoRng>(
        &self,
        m: &BigUint,
        rng: &mut R,
    ) -> Result<Ciphertext, HeError> {
        let y = self.params.random_scalar(rng);
        self.encrypt_mul_with_nonce(m, &y)
    }

    /// Encryption with caller-chosen nonce `y`.
    pub fn encrypt_mul_with_nonce(&self, m: &BigUint, y: &BigUint) -> Result<Ciphertext, HeError> {
        if !self.params.is_member(m) {
            return Err(HeError::NotInSubgroup);
        }
        Ok(self.encrypt_unchecked(m, y))
    }

    fn encrypt_unchecked(&self, m: &BigUint, y: &BigUint) -> Ciphertext {
        let grp = &self.params;
        let c1 = grp.exp_g(y);
        let c2 = grp.mul(m, &grp.pow(&self.h, y));
        self.make(c1, c2)
    }

    /// Encrypts `g^e`: exponential ElGamal without any range check.
    pub fn encrypt_exponent<R: RngCore + CryptoRng>(&self, e: &BigUint, rng: &mut R) -> Ciphertext {
        let y = self.params.random_scalar(rng);
        self.encrypt_unchecked(&self.params.exp_g(e), &y)
    }

    /// Signed exponent, reduced modulo `q`.
    pub fn encrypt_signed_exponent<R: RngCore + CryptoRng>(&self, e: i64, rng: &mut R) -> Ciphertext {
        let e = self.reduce_signed(&BigInt::from(e));
        self.encrypt_exponent(&e, rng)
    }

    pub(crate) fn reduce_signed(&self, k: &BigInt) -> BigUint {
        let q = BigInt::from_biguint(Sign::Plus, self.params.order().clone());
        let r = ((k % &q) + &q) % &q;
        r.to_biguint().expect("non-negative")
    }

    /// Component-wise product: multiplies plaintexts (adds exponents).
    pub fn mul_ct(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext, HeError> {
        self.check_key(a)?;
        self.check_key(b)?;
        let grp = &self.params;
        Ok(self.make(grp.mul(&a.c1, &b.c1), grp.mul(&a.c2, &b.c2)))
    }

    /// Raises both components to `k`: `m^k`, or `k * e` in exponent form.
    pub fn pow_ct(&self, a: &Ciphertext, k: &BigUint) -> Result<Ciphertext, HeError> {
        self.check_key(a)?;
        let grp = &self.params;
        Ok(self.make(grp.pow(&a.c1, k), grp.pow(&a.c2, k)))
    }

    /// Multiplies the plaintext by `g^e` without touching the randomness.
    pub fn add_plain_exponent(&self, a: &Ciphertext, e: &BigUint) -> Result<Ciphertext, HeError> {
        self.check_key(a)?;
        let grp = &self.params;
        Ok(self.make(a.c1.clone(), grp.mul(&a.c2, &grp.exp_g(e))))
    }

    /// Multiplies by a fresh encryption of the identity.
    pub fn rerandomize<R: RngCore + CryptoRng>(&self, a: &Ciphertext, rng: &mut R) -> Ciphertext {
        let grp = &self.params;
        let y = grp.random_scalar(rng);
        let c1 = grp.mul(&a.c1, &grp.exp_g(&y));
        let c2 = grp.mul(&a.c2, &grp.pow(&self.h, &y));
        Ciphertext {
            c1,
            c2,
            key: a.key,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![wire::TAG_ELGAMAL_PUBLIC];
        self.params.write(&mut out);
        wire::put_uint(&mut out, &self.h);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, HeError> {
        let mut r = Reader::new(bytes);
        r.tag(wire::TAG_ELGAMAL_PUBLIC)?;
        let params = GroupParams::read(&mut r)?;
        let h = r.uint()?;
        r.finish()?;
        Self::from_parts(Arc::new(params), h)
    }

    pub fn ciphertext_to_bytes(&self, ct: &Ciphertext) -> Vec<u8> {
        ct.to_bytes(self.params.element_len())
    }

    /// Decodes a ciphertext in the context of this key, checking that both
    /// components lie in the subgroup.
    pub fn ciphertext_from_bytes(&self, bytes: &[u8]) -> Result<Ciphertext, HeError> {
        let (c1, c2) = Ciphertext::decode_components(bytes)?;
        if !self.params.is_member(&c1) || !self.params.is_member(&c2) {
            return Err(HeError::MalformedCiphertext(
                "component outside the subgroup".into(),
            ));
        }
        Ok(self.make(c1, c2))
    }
}

impl Ciphertext {
    pub fn c1(&self) -> &BigUint {
        &self.c1
    }

    pub fn c2(&self) -> &BigUint {
        &self.c2
    }

    pub fn key_fingerprint(&self) -> KeyFingerprint {
        self.key
    }

    /// Tag byte, then `c1` and `c2` as length-prefixed big-endian integers
    /// padded to `width` bytes.
    pub fn to_bytes(&self, width: usize) -> Vec<u8> {
        let mut out = Vec::with_capacity(9 + 2 * width);
        out.push(wire::TAG_ELGAMAL_CIPHERTEXT);
        for c in [&self.c1, &self.c2] {
            let raw = c.to_bytes_be();
            let mut padded = vec![0u8; width.saturating_sub(raw.len())];
            padded.extend_from_slice(&raw);
            wire::put_bytes(&mut out, &padded);
        }
        out
    }

    /// Structural decode without group context.
    pub fn decode_components(bytes: &[u8]) -> Result<(BigUint, BigUint), HeError> {
        let mut r = Reader::new(bytes);
        r.tag(wire::TAG_ELGAMAL_CIPHERTEXT)
            .map_err(|e| HeError::MalformedCiphertext(e.to_string()))?;
        let c1 = r.uint().map_err(|e| HeError::MalformedCiphertext(e.to_string()))?;
        let c2 = r.uint().map_err(|e| HeError::MalformedCiphertext(e.to_string()))?;
        r.finish()
            .map_err(|e| HeError::MalformedCiphertext(e.to_string()))?;
        if c1.is_zero() || c2.is_zero() {
            return Err(HeError::MalformedCiphertext("zero component".into()));
        }
        Ok((c1, c2))
    }
}
