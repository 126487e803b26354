use std::io::Read;

use super::hashing::PositionHasher;
use super::qgram::{qgrams, QGramSet};
use super::PprlError;

const MAGIC: &[u8; 4] = b"PBF1";

/// Fixed-length bit array encoding a q-gram set under `k` keyed hashes.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BloomFilter {
    l: usize,
    k: u32,
    key_id: String,
    words: Vec<u64>,
}

impl BloomFilter {
    pub fn empty(l: usize, k: u32, key_id: &str) -> Result<Self, PprlError> {
        if l == 0 || k == 0 {
            return Err(PprlError::EmptyParameters);
        }
        Ok(Self {
            l,
            k,
            key_id: key_id.to_string(),
            words: vec![0; l.div_ceil(64)],
        })
    }

    pub fn encode<H: PositionHasher>(grams: &QGramSet, l: usize, k: u32, hasher: &H) -> Result<Self, PprlError> {
        let mut bf = Self::empty(l, k, hasher.key_id())?;
        for gram in grams.iter() {
            bf.insert(gram, hasher)?;
        }
        Ok(bf)
    }

    pub fn insert<H: PositionHasher>(&mut self, gram: &str, hasher: &H) -> Result<(), PprlError> {
        self.check_key(hasher)?;
        for i in 0..self.k {
            let p = hasher.position(gram, i, self.l)?;
            self.words[p / 64] |= 1 << (p % 64);
        }
        Ok(())
    }

    /// All `k` positions of `gram` are set. Never false for an inserted gram.
    pub fn contains<H: PositionHasher>(&self, gram: &str, hasher: &H) -> Result<bool, PprlError> {
        self.check_key(hasher)?;
        for i in 0..self.k {
            if !self.bit(hasher.position(gram, i, self.l)?) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn check_key<H: PositionHasher>(&self, hasher: &H) -> Result<(), PprlError> {
        if hasher.key_id() != self.key_id {
            return Err(PprlError::ParameterMismatch(format!(
                "filter key {} queried with key {}",
                self.key_id,
                hasher.key_id()
            )));
        }
        Ok(())
    }

    fn check_comparable(&self, other: &Self) -> Result<(), PprlError> {
        if self.l != other.l || self.k != other.k || self.key_id != other.key_id {
            return Err(PprlError::ParameterMismatch(format!(
                "(l={}, k={}, key={}) vs (l={}, k={}, key={})",
                self.l, self.k, self.key_id, other.l, other.k, other.key_id
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.l
    }

    pub fn is_empty(&self) -> bool {
        self.popcount() == 0
    }

    pub fn hash_count(&self) -> u32 {
        self.k
    }

    pub fn key_id(&self) -> &str {
        &self.key_id
    }

    pub fn bit(&self, i: usize) -> bool {
        i < self.l && self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn popcount(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn set_positions(&self) -> Vec<usize> {
        (0..self.l).filter(|&i| self.bit(i)).collect()
    }

    pub fn union(&self, other: &Self) -> Result<Self, PprlError> {
        self.check_comparable(other)?;
        let mut out = self.clone();
        for (a, b) in out.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
        Ok(out)
    }

    /// `2 |A ∧ B| / (|A| + |B|)`, defined as 1 when both filters are empty.
    pub fn dice(&self, other: &Self) -> Result<f64, PprlError> {
        self.check_comparable(other)?;
        let total = self.popcount() + other.popcount();
        if total == 0 {
            return Ok(1.0);
        }
        let common: usize = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum();
        Ok(2.0 * common as f64 / total as f64)
    }

    /// `PBF1 ‖ l:u32 ‖ k:u32 ‖ key-id length:u8 ‖ key id ‖ bits`, with bit `i`
    /// stored most-significant-first in byte `i / 8`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(13 + self.key_id.len() + self.l.div_ceil(8));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.l as u32).to_be_bytes());
        out.extend_from_slice(&self.k.to_be_bytes());
        out.push(self.key_id.len() as u8);
        out.extend_from_slice(self.key_id.as_bytes());
        let mut bits = vec![0u8; self.l.div_ceil(8)];
        for i in self.set_positions() {
            bits[i / 8] |= 0x80 >> (i % 8);
        }
        out.extend_from_slice(&bits);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PprlError> {
        let err = |m: &str| PprlError::Decode(m.to_string());
        if bytes.len() < 13 || &bytes[..4] != MAGIC {
            return Err(err("missing header"));
        }
        let l = u32::from_be_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let k = u32::from_be_bytes(bytes[8..12].try_into().unwrap());
        let id_len = bytes[12] as usize;
        let rest = &bytes[13..];
        if rest.len() < id_len {
            return Err(err("truncated key id"));
        }
        let key_id = std::str::from_utf8(&rest[..id_len]).map_err(|_| err("key id is not UTF-8"))?;
        let bits = &rest[id_len..];
        if bits.len() != l.div_ceil(8) {
            return Err(err("bit array length does not match l"));
        }
        let mut bf = Self::empty(l, k, key_id)?;
        for (byte_idx, &b) in bits.iter().enumerate() {
            for j in 0..8 {
                if b & (0x80 >> j) != 0 {
                    let i = byte_idx * 8 + j;
                    if i >= l {
                        return Err(err("padding bits set"));
                    }
                    bf.words[i / 64] |= 1 << (i % 64);
                }
            }
        }
        Ok(bf)
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.to_bytes())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncodedRecord {
    pub id: String,
    pub filter: BloomFilter,
}

/// Encodes headerless CSV rows `record-id, field, field, ...`.
///
/// Fields are trimmed and lowercased and their q-grams are united, so no gram
/// spans two fields. Empty lines and lines starting with `#` are skipped.
pub fn encode_csv<R: Read, H: PositionHasher>(
    input: R,
    q: usize,
    l: usize,
    k: u32,
    hasher: &H,
) -> Result<Vec<EncodedRecord>, PprlError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| PprlError::Csv(e.to_string()))?;
        let Some(id) = row.get(0).filter(|s| !s.is_empty()) else {
            continue;
        };
        let mut grams = qgrams("", q)?;
        for field in row.iter().skip(1) {
            grams = grams.union(&qgrams(&field.to_lowercase(), q)?);
        }
        out.push(EncodedRecord {
            id: id.to_string(),
            filter: BloomFilter::encode(&grams, l, k, hasher)?,
        });
    }
    Ok(out)
}
