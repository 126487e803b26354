//! Homomorphic encryption primitives.
//!
//! Three schemes share one group abstraction:
//!
//! * multiplicative ElGamal over a prime-order subgroup of `Z_p*`,
//! * exponential ("additive") ElGamal, which encodes `m` as `g^m` and decrypts
//!   with a bounded baby-step giant-step search,
//! * a Paillier-style composite-residuosity scheme with full-range decryption.
//!
//! Protocol code only ever talks to the additive schemes through
//! [`AdditiveHe`] and [`AdditiveDecrypt`]. The multiplicative ElGamal API is
//! used directly where group elements themselves are the plaintexts.
//!
//! Homomorphic schemes fall into three families: partially homomorphic
//! (one operation, unbounded depth; everything here), somewhat homomorphic
//! (both operations, bounded depth) and fully homomorphic (both operations,
//! unbounded depth). Only the first family is implemented.

mod additive;
mod bsgs;
mod elgamal;
mod fixed_point;
mod group;
mod paillier;
pub mod wire;

pub use additive::{AdditiveDecrypt, AdditiveHe, ExpElGamal, ExpElGamalSecret, SchemeKind};
pub use bsgs::BsgsTable;
pub use elgamal::{keygen, Ciphertext, KeyPair, PublicKey, SecretKey};
pub use fixed_point::FixedPointParams;
pub use group::{GroupKind, GroupParams};
pub use paillier::{PaillierCiphertext, PaillierKeyPair, PaillierPublicKey};

/// Default exp-ElGamal decryption bound.
pub const DEFAULT_RANGE_BOUND: u64 = 1 << 20;
/// Default number of baby steps, as a power of two.
pub const DEFAULT_TABLE_BITS: u32 = 10;

/// Short key identifier carried by ciphertexts so that mixing keys is caught.
pub type KeyFingerprint = [u8; 8];

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum HeError {
    #[error("invalid group parameters: {0}")]
    InvalidGroup(String),
    #[error("invalid key: {0}")]
    InvalidKey(String),
    #[error("value is not a member of the prime-order subgroup")]
    NotInSubgroup,
    #[error("plaintext {value} outside the supported range [-{bound}, {bound}]")]
    PlaintextOutOfRange { value: String, bound: String },
    #[error("decrypted value outside the searchable range [-{bound}, {bound}]")]
    RangeExceeded { bound: u64 },
    #[error("ciphertexts were produced under different keys")]
    KeyMismatch,
    #[error("malformed ciphertext: {0}")]
    MalformedCiphertext(String),
    #[error("malformed encoding: {0}")]
    Decode(String),
}
