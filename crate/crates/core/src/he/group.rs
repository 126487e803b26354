use std::fmt;

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::wire::{self, Reader};
use super::{HeError, KeyFingerprint};

/// Which concrete group backs a [`GroupParams`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupKind {
    /// Prime-order subgroup of the multiplicative group modulo a prime.
    ModPrime,
}

// 256-bit safe prime p = 2q + 1. The quadratic residues form the subgroup of
// prime order q, generated by 4 = 2^2.
const REFERENCE_P: &str = "abd6483205ea40362e7e07a3bb2e533f02fd9323204ffed200702c8c82a252fb";
const REFERENCE_Q: &str = "55eb241902f5201b173f03d1dd97299f817ec9919027ff69003816464151297d";

/// A cyclic group `G` of prime order `q` with generator `g`.
///
/// Only validated parameters can be constructed, so every other type in this
/// module may assume `q` is prime and `g` has order exactly `q`.
#[derive(Clone, PartialEq, Eq)]
pub struct GroupParams {
    kind: GroupKind,
    p: BigUint,
    q: BigUint,
    g: BigUint,
    cofactor: BigUint,
}

impl fmt::Debug for GroupParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "GroupParams({:?}, p: {} bits, q: {} bits, g: {})",
            self.kind,
            self.p.bits(),
            self.q.bits(),
            self.g
        )
    }
}

fn is_prime(n: &BigUint) -> bool {
    let two = BigUint::from(2u8);
    if n < &two {
        return false;
    }
    // Miller-Rabin witnesses come from a fixed stream so validation stays
    // deterministic and does not need OS entropy.
    let mut rng = crate::rng::derive(0, "primality");
    glass_pumpkin::prime::check_with(n, &mut rng)
}

impl GroupParams {
    pub fn new(p: BigUint, q: BigUint, g: BigUint) -> Result<Self, HeError> {
        if !is_prime(&p) {
            return Err(HeError::InvalidGroup("modulus p is not prime".into()));
        }
        if !is_prime(&q) {
            return Err(HeError::InvalidGroup("order q is not prime".into()));
        }
        let p_minus_one = &p - 1u32;
        let (cofactor, rem) = p_minus_one.div_rem(&q);
        if !rem.is_zero() {
            return Err(HeError::InvalidGroup("q does not divide p - 1".into()));
        }
        if g <= BigUint::one() || g >= p {
            return Err(HeError::InvalidGroup("generator outside (1, p)".into()));
        }
        if !g.modpow(&q, &p).is_one() {
            return Err(HeError::InvalidGroup("generator does not have order q".into()));
        }
        Ok(Self {
            kind: GroupKind::ModPrime,
            p,
            q,
            g,
            cofactor,
        })
    }

    /// The hand-checkable group `p = 23, q = 11, g = 2`.
    pub fn tiny() -> Self {
        Self::new(23u32.into(), 11u32.into(), 2u32.into()).expect("tiny group is valid")
    }

    /// The 256-bit safe-prime group used by default.
    pub fn reference() -> Self {
        let p = BigUint::parse_bytes(REFERENCE_P.as_bytes(), 16).expect("hex");
        let q = BigUint::parse_bytes(REFERENCE_Q.as_bytes(), 16).expect("hex");
        Self::new(p, q, 4u32.into()).expect("reference group is valid")
    }

    /// Builds the quadratic-residue subgroup of a safe prime `p = 2q + 1`.
    pub fn from_safe_prime(p: BigUint) -> Result<Self, HeError> {
        if p < BigUint::from(7u8) {
            return Err(HeError::InvalidGroup("safe prime too small".into()));
        }
        let q = (&p - 1u32) >> 1;
        Self::new(p, q, 4u32.into())
    }

    pub fn kind(&self) -> GroupKind {
        self.kind
    }

    pub fn modulus(&self) -> &BigUint {
        &self.p
    }

    pub fn order(&self) -> &BigUint {
        &self.q
    }

    pub fn generator(&self) -> &BigUint {
        &self.g
    }

    pub fn identity(&self) -> BigUint {
        BigUint::one()
    }

    pub fn is_member(&self, x: &BigUint) -> bool {
        !x.is_zero() && x < &self.p && x.modpow(&self.q, &self.p).is_one()
    }

    pub fn mul(&self, a: &BigUint, b: &BigUint) -> BigUint {
        (a * b) % &self.p
    }

    pub fn pow(&self, base: &BigUint, exponent: &BigUint) -> BigUint {
        base.modpow(exponent, &self.p)
    }

    /// `g^e`, with `e` taken modulo `q`.
    pub fn exp_g(&self, exponent: &BigUint) -> BigUint {
        self.g.modpow(&(exponent % &self.q), &self.p)
    }

    /// Inverse of a subgroup element (`a^(q-1)`).
    pub fn inv(&self, a: &BigUint) -> BigUint {
        a.modpow(&(&self.q - 1u32), &self.p)
    }

    /// Uniform scalar in `[1, q-1]`.
    pub fn random_scalar<R: RngCore + CryptoRng>(&self, rng: &mut R) -> BigUint {
        rng.gen_biguint_range(&BigUint::one(), &self.q)
    }

    /// Maps arbitrary bytes into the subgroup by hashing into `Z_p*` and
    /// raising to the cofactor (squaring, for a safe prime).
    pub fn hash_to_group(&self, data: &[u8]) -> BigUint {
        let width = self.element_len() + 16;
        for counter in 0u32.. {
            let mut expanded = Vec::with_capacity(width);
            let mut block = 0u32;
            while expanded.len() < width {
                let mut h = Sha256::new();
                h.update(b"finpriv/hash-to-group/v1");
                h.update(counter.to_be_bytes());
                h.update(block.to_be_bytes());
                h.update(data);
                expanded.extend_from_slice(&h.finalize());
                block += 1;
            }
            let x = BigUint::from_bytes_be(&expanded) % &self.p;
            if x.is_zero() {
                continue;
            }
            let y = x.modpow(&self.cofactor, &self.p);
            if !y.is_one() {
                return y;
            }
        }
        unreachable!("counter space exhausted")
    }

    /// Byte width of an encoded element.
    pub fn element_len(&self) -> usize {
        ((self.p.bits() + 7) / 8) as usize
    }

    /// Fixed-width big-endian encoding of a group element.
    pub fn element_to_bytes(&self, x: &BigUint) -> Vec<u8> {
        let raw = x.to_bytes_be();
        let mut out = vec![0u8; self.element_len().saturating_sub(raw.len())];
        out.extend_from_slice(&raw);
        out
    }

    /// Inverse of [`element_to_bytes`](Self::element_to_bytes); rejects non-members.
    pub fn element_from_bytes(&self, bytes: &[u8]) -> Result<BigUint, HeError> {
        if bytes.len() != self.element_len() {
            return Err(HeError::Decode(format!(
                "group element must be {} bytes, got {}",
                self.element_len(),
                bytes.len()
            )));
        }
        let x = BigUint::from_bytes_be(bytes);
        if !self.is_member(&x) {
            return Err(HeError::NotInSubgroup);
        }
        Ok(x)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![wire::TAG_GROUP_MODP];
        wire::put_uint(&mut out, &self.p);
        wire::put_uint(&mut out, &self.q);
        wire::put_uint(&mut out, &self.g);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, HeError> {
        let mut r = Reader::new(bytes);
        let params = Self::read(&mut r)?;
        r.finish()?;
        Ok(params)
    }

    pub(crate) fn read(r: &mut Reader<'_>) -> Result<Self, HeError> {
        r.tag(wire::TAG_GROUP_MODP)?;
        let p = r.uint()?;
        let q = r.uint()?;
        let g = r.uint()?;
        Self::new(p, q, g)
    }

    pub(crate) fn write(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_bytes());
    }

    pub fn fingerprint(&self) -> KeyFingerprint {
        let digest = Sha256::digest(self.to_bytes());
        digest[..8].try_into().expect("8 bytes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_group_generator_has_order_eleven() {
        let grp = GroupParams::tiny();
        let members: Vec<u32> = (1..23u32)
            .filter(|x| grp.is_member(&BigUint::from(*x)))
            .collect();
        assert_eq!(members, vec![1, 2, 3, 4, 6, 8, 9, 12, 13, 16, 18]);
        assert_eq!(grp.exp_g(&BigUint::from(3u8)), BigUint::from(8u8));
    }

    #[test]
    fn rejects_composite_order() {
        let err = GroupParams::new(23u32.into(), 22u32.into(), 5u32.into()).unwrap_err();
        assert_eq!(err, HeError::InvalidGroup("order q is not prime".into()));
        let err = GroupParams::new(23u32.into(), 11u32.into(), 5u32.into()).unwrap_err();
        assert!(matches!(err, HeError::InvalidGroup(_)), "5 has order 22 mod 23");
        assert!(GroupParams::new(24u32.into(), 11u32.into(), 2u32.into()).is_err());
    }

    #[test]
    fn reference_group_is_a_safe_prime_group() {
        let grp = GroupParams::reference();
        assert_eq!(grp.modulus().bits(), 256);
        assert_eq!(grp.order() * 2u32 + 1u32, *grp.modulus());
        assert!(grp.is_member(grp.generator()));
    }

    #[test]
    fn hash_to_group_lands_in_subgroup() {
        let grp = GroupParams::reference();
        for id in ["alice", "bob", "", "0"] {
            let x = grp.hash_to_group(id.as_bytes());
            assert!(grp.is_member(&x));
            assert_eq!(x, grp.hash_to_group(id.as_bytes()));
        }
        let tiny = GroupParams::tiny();
        assert!(tiny.is_member(&tiny.hash_to_group(b"x")));
    }

    #[test]
    fn params_round_trip_through_bytes() {
        let grp = GroupParams::reference();
        assert_eq!(GroupParams::from_bytes(&grp.to_bytes()).unwrap(), grp);
        let x = grp.hash_to_group(b"e");
        let bytes = grp.element_to_bytes(&x);
        assert_eq!(bytes.len(), 32);
        assert_eq!(grp.element_from_bytes(&bytes).unwrap(), x);
        let mut two = vec![0u8; 32];
        two[31] = 2;
        // 2 is a quadratic non-residue modulo this p.
        assert_eq!(grp.element_from_bytes(&two), Err(HeError::NotInSubgroup));
    }
}
