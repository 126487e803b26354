//! Byte encodings shared by keys, ciphertexts and protocol payloads.
//!
//! Integers are written big-endian behind a `u32` length prefix. Every
//! top-level object starts with a one-byte tag.

use num_bigint::BigUint;

use super::HeError;

pub const TAG_GROUP_MODP: u8 = 0x01;
pub const TAG_ELGAMAL_PUBLIC: u8 = 0x11;
pub const TAG_ELGAMAL_CIPHERTEXT: u8 = 0x21;
pub const TAG_PAILLIER_PUBLIC: u8 = 0x12;
pub const TAG_PAILLIER_CIPHERTEXT: u8 = 0x22;

pub fn put_bytes(out: &mut Vec<u8>, bytes: &[u8]) {
    out.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
    out.extend_from_slice(bytes);
}

pub fn put_uint(out: &mut Vec<u8>, value: &BigUint) {
    put_bytes(out, &value.to_bytes_be());
}

/// Cursor over an encoded buffer.
pub struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf }
    }

    pub fn tag(&mut self, expected: u8) -> Result<(), HeError> {
        match self.buf.split_first() {
            Some((&t, rest)) if t == expected => {
                self.buf = rest;
                Ok(())
            }
            Some((&t, _)) => Err(HeError::Decode(format!(
                "expected tag {expected:#04x}, found {t:#04x}"
            ))),
            None => Err(HeError::Decode("empty buffer".into())),
        }
    }

    pub fn bytes(&mut self) -> Result<&'a [u8], HeError> {
        if self.buf.len() < 4 {
            return Err(HeError::Decode("truncated length prefix".into()));
        }
        let (len, rest) = self.buf.split_at(4);
        let len = u32::from_be_bytes(len.try_into().expect("4 bytes")) as usize;
        if rest.len() < len {
            return Err(HeError::Decode(format!(
                "length prefix {len} exceeds remaining {} bytes",
                rest.len()
            )));
        }
        let (body, rest) = rest.split_at(len);
        self.buf = rest;
        Ok(body)
    }

    pub fn uint(&mut self) -> Result<BigUint, HeError> {
        Ok(BigUint::from_bytes_be(self.bytes()?))
    }

    pub fn finish(self) -> Result<(), HeError> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(HeError::Decode(format!("{} trailing bytes", self.buf.len())))
        }
    }
}
