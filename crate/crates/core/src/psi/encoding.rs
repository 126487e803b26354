use num_bigint::BigUint;
use sha2::{Digest, Sha256};

use super::PsiError;

/// Maps an identifier into `Z_q`.
///
/// Canonical decimal strings (no sign, no leading zeros) below `q` map to
/// their value, so small integer IDs are hand-checkable. Anything else is
/// hashed with SHA-256 and reduced mod `q`.
pub fn id_to_field(id: &str, q: &BigUint) -> BigUint {
    let canonical = !id.is_empty()
        && id.bytes().all(|b| b.is_ascii_digit())
        && (id == "0" || !id.starts_with('0'));
    if canonical {
        if let Some(v) = BigUint::parse_bytes(id.as_bytes(), 10).filter(|v| v < q) {
            return v;
        }
    }
    let mut h = Sha256::new();
    h.update(b"finpriv/id-to-field/v1");
    h.update(id.as_bytes());
    BigUint::from_bytes_be(&h.finalize()) % q
}

fn check_width(x: u64, n: u32) -> Result<(), PsiError> {
    if n == 0 || n > 64 || (n < 64 && x >> n != 0) {
        return Err(PsiError::BitWidth { value: x, bits: n });
    }
    Ok(())
}

/// Bits of `x` from most to least significant, as `'0'`/`'1'`.
fn bits(x: u64, n: u32) -> Vec<char> {
    (0..n).rev().map(|i| if x >> i & 1 == 1 { '1' } else { '0' }).collect()
}

/// `{ x_n ... x_{i+1} 1 : x_i = 0 }`, one string per zero bit of `x`.
pub fn zero_encoding(x: u64, n: u32) -> Result<Vec<String>, PsiError> {
    check_width(x, n)?;
    let b = bits(x, n);
    Ok((0..b.len())
        .filter(|&j| b[j] == '0')
        .map(|j| b[..j].iter().chain(std::iter::once(&'1')).collect())
        .collect())
}

/// `{ y_n ... y_i : y_i = 1 }`, one string per one bit of `y`.
pub fn one_encoding(y: u64, n: u32) -> Result<Vec<String>, PsiError> {
    check_width(y, n)?;
    let b = bits(y, n);
    Ok((0..b.len())
        .filter(|&j| b[j] == '1')
        .map(|j| b[..=j].iter().collect())
        .collect())
}
