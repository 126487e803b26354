//! Privacy-preserving record linkage with keyed Bloom filters.
//!
//! Each record is split into q-grams, every gram is hashed into `k` bit
//! positions of an `l`-bit filter with a keyed MAC, and two filters are
//! compared with the Dice coefficient. Parties that share the MAC key can
//! compare encodings without exchanging names.

mod bloom;
mod hashing;
mod qgram;

pub use bloom::{encode_csv, BloomFilter, EncodedRecord};
pub use hashing::{HmacHasher, PositionHasher, TableHasher};
pub use qgram::{qgrams, QGramSet};

/// Default filter length for realistic linkage.
pub const DEFAULT_LENGTH: usize = 1000;
/// Default number of hash functions.
pub const DEFAULT_HASHES: u32 = 30;

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum PprlError {
    #[error("q-gram length must be at least 1")]
    ZeroGramLength,
    #[error("filter length and hash count must be at least 1")]
    EmptyParameters,
    #[error("filters are not comparable: {0}")]
    ParameterMismatch(String),
    #[error("fixture hasher has no position for gram {gram:?}, index {index}")]
    MissingFixturePosition { gram: String, index: u32 },
    #[error("malformed filter encoding: {0}")]
    Decode(String),
    #[error("csv input: {0}")]
    Csv(String),
}
