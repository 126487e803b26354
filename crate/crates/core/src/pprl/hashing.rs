use std::collections::HashMap;

use hmac::{Hmac, Mac};
use sha2::{Digest, Sha256};

use super::PprlError;

type HmacSha256 = Hmac<Sha256>;

/// Maps `(gram, index)` to a bit position in `[0, l)`.
pub trait PositionHasher {
    /// Identifies the key so filters built under different keys are never compared.
    fn key_id(&self) -> &str;

    fn position(&self, gram: &str, index: u32, l: usize) -> Result<usize, PprlError>;
}

/// HMAC-SHA256 positions.
///
/// By default hash `i` is `HMAC(key, i ‖ gram) mod l`, with `i` as one byte
/// (a big-endian u32 once `i` exceeds 255). With double hashing enabled only
/// two MACs are taken per gram and position `i` is `h1 + i * h2 mod l`.
#[derive(Clone)]
pub struct HmacHasher {
    key: Vec<u8>,
    key_id: String,
    double_hashing: bool,
}

impl std::fmt::Debug for HmacHasher {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HmacHasher")
            .field("key_id", &self.key_id)
            .field("double_hashing", &self.double_hashing)
            .finish_non_exhaustive()
    }
}

impl HmacHasher {
    pub fn new(key: &[u8]) -> Self {
        let digest = Sha256::digest([b"finpriv/pprl/key-id/v1".as_slice(), key].concat());
        Self {
            key: key.to_vec(),
            key_id: hex::encode(&digest[..8]),
            double_hashing: false,
        }
    }

    pub fn with_double_hashing(mut self, on: bool) -> Self {
        self.double_hashing = on;
        self
    }

    fn mac(&self, prefix: &[u8], gram: &str) -> [u8; 32] {
        let mut mac = HmacSha256::new_from_slice(&self.key).expect("HMAC accepts any key length");
        mac.update(prefix);
        mac.update(gram.as_bytes());
        mac.finalize().into_bytes().into()
    }

    fn mac_mod(&self, prefix: &[u8], gram: &str, l: usize) -> usize {
        let digest = self.mac(prefix, gram);
        // Reduce the whole digest so the bias is at most l / 2^256.
        let mut acc: u128 = 0;
        for &b in &digest {
            acc = ((acc << 8) | b as u128) % l as u128;
        }
        acc as usize
    }
}

fn index_prefix(index: u32) -> Vec<u8> {
    match u8::try_from(index) {
        Ok(b) => vec![b],
        Err(_) => index.to_be_bytes().to_vec(),
    }
}

impl PositionHasher for HmacHasher {
    fn key_id(&self) -> &str {
        &self.key_id
    }

    fn position(&self, gram: &str, index: u32, l: usize) -> Result<usize, PprlError> {
        if l == 0 {
            return Err(PprlError::EmptyParameters);
        }
        if !self.double_hashing {
            return Ok(self.mac_mod(&index_prefix(index), gram, l));
        }
        let h1 = self.mac_mod(b"h1", gram, l) as u128;
        let h2 = self.mac_mod(b"h2", gram, l) as u128;
        Ok(((h1 + index as u128 * h2) % l as u128) as usize)
    }
}

/// Explicit position table, for hand-built fixtures.
#[derive(Clone, Debug, Default)]
pub struct TableHasher {
    key_id: String,
    table: HashMap<(String, u32), usize>,
}

impl TableHasher {
    pub fn new(key_id: &str) -> Self {
        Self {
            key_id: key_id.to_string(),
            table: HashMap::new(),
        }
    }

    /// Sets the positions of `gram` for hash indices `0, 1, ...`.
    pub fn with(mut self, gram: &str, positions: &[usize]) -> Self {
        for (i, &p) in positions.iter().enumerate() {
            self.table.insert((gram.to_string(), i as u32), p);
        }
        self
    }
}

impl PositionHasher for TableHasher {
    fn key_id(&self) -> &str {
        &self.key_id
    }

    fn position(&self, gram: &str, index: u32, l: usize) -> Result<usize, PprlError> {
        match self.table.get(&(gram.to_string(), index)) {
            Some(&p) if p < l => Ok(p),
            _ => Err(PprlError::MissingFixturePosition {
                gram: gram.to_string(),
                index,
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    #[test]
    fn positions_are_deterministic_and_keyed() {
        let a = HmacHasher::new(b"shared key");
        let b = HmacHasher::new(b"other key");
        assert_eq!(a.position("pe", 0, 1000).unwrap(), a.position("pe", 0, 1000).unwrap());
        assert_ne!(a.key_id(), b.key_id());
        let grams: Vec<String> = (0..100).map(|i| format!("g{i}")).collect();
        let differing = grams
            .iter()
            .filter(|g| a.position(g, 0, 1000).unwrap() != b.position(g, 0, 1000).unwrap())
            .count();
        assert!(differing >= 1);
        assert!(differing > 90, "keys should decorrelate positions, got {differing}");
    }

    fn chi_squared_p(hasher: &HmacHasher, l: usize) -> f64 {
        let n = 100_000;
        let mut counts = vec![0u64; l];
        for i in 0..n {
            counts[hasher.position(&format!("gram-{i}"), 0, l).unwrap()] += 1;
        }
        let expected = n as f64 / l as f64;
        let stat: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        1.0 - ChiSquared::new((l - 1) as f64).unwrap().cdf(stat)
    }

    #[test]
    fn positions_are_uniform() {
        let p = chi_squared_p(&HmacHasher::new(b"uniformity"), 1024);
        assert!(p > 0.001, "chi-squared p = {p}");
        let p = chi_squared_p(&HmacHasher::new(b"uniformity").with_double_hashing(true), 1000);
        assert!(p > 0.001, "chi-squared p = {p}");
    }

    #[test]
    fn double_hashing_is_an_arithmetic_progression() {
        let h = HmacHasher::new(b"k").with_double_hashing(true);
        let p: Vec<usize> = (0..3).map(|i| h.position("ab", i, 97).unwrap()).collect();
        assert_eq!((p[1] + 97 - p[0]) % 97, (p[2] + 97 - p[1]) % 97);
    }

    #[test]
    fn table_hasher_rejects_unknown_grams() {
        let t = TableHasher::new("fixture").with("pe", &[1, 6]);
        assert_eq!(t.position("pe", 1, 12).unwrap(), 6);
        assert!(t.position("pe", 1, 5).is_err());
        assert!(t.position("zz", 0, 12).is_err());
    }
}
