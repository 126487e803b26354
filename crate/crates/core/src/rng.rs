//! Seeded randomness for protocol runs.
//!
//! Every party draws from its own ChaCha20 stream derived from the run seed
//! and a domain label, so a `(scenario, seed)` pair fixes every random choice
//! made anywhere in a run.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

pub type ProtocolRng = ChaCha20Rng;

/// Stream for a whole run.
pub fn seeded(seed: u64) -> ProtocolRng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Independent stream for one party or purpose within a run.
pub fn derive(seed: u64, label: &str) -> ProtocolRng {
    let mut hasher = Sha256::new();
    hasher.update(b"finpriv/rng/v1");
    hasher.update(seed.to_be_bytes());
    hasher.update((label.len() as u64).to_be_bytes());
    hasher.update(label.as_bytes());
    ChaCha20Rng::from_seed(hasher.finalize().into())
}

/// OS-entropy stream for production use.
pub fn from_entropy() -> ProtocolRng {
    ChaCha20Rng::from_entropy()
}

/// A fresh run seed from OS entropy.
pub fn entropy_seed() -> u64 {
    use rand::RngCore;
    from_entropy().next_u64()
}
