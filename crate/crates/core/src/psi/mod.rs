//! Private set intersection and related two-party set protocols.
//!
//! * Polynomial-evaluation PSI: the FIU's suspect list becomes the roots of
//!   an encrypted polynomial, and a reporting entity evaluates it on its
//!   customers so that only matches decrypt to something recognisable.
//! * PSI-CA: intersection size via commutative (Pohlig-Hellman style)
//!   encryption `x -> x^e mod p`.
//! * Private greater-than: `x > y` exactly when the one-encoding of `x` and
//!   the zero-encoding of `y` share an element, so one PSI-CA run answers it.

mod commutative;
mod encoding;
mod polynomial;
mod protocol;

pub use commutative::CommutativeKey;
pub use encoding::{id_to_field, one_encoding, zero_encoding};
pub use polynomial::{EncPolynomial, RootPolynomial};
pub use protocol::{
    compare_digest, greater_than_exchange, private_greater_than, psi_ca, psi_ca_digest, psi_ca_exchange, psi_digest,
    psi_run, run_psi, PsiResult,
    COMPARE_PROTOCOL, PARTY_A, PARTY_B, PSI_CA_PROTOCOL, PSI_PROTOCOL, RE,
};

use crate::harness::HarnessError;
use crate::he::HeError;

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum PsiError {
    #[error(transparent)]
    He(#[from] HeError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error("duplicate root {0}")]
    DuplicateRoot(String),
    #[error("value {0} is not a field element")]
    OutOfField(String),
    #[error("{value} does not fit in {bits} bits (1 to 64 supported)")]
    BitWidth { value: u64, bits: u32 },
    #[error("protocol error: {0}")]
    Protocol(String),
}
