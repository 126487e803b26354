use std::fmt;

use serde::{Deserialize, Serialize};

use super::HarnessError;

/// What a payload field carries. The audit allow-lists these per protocol.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
#[repr(u8)]
pub enum FieldKind {
    PublicKey = 1,
    Ciphertext = 2,
    AccountId = 3,
    GroupElement = 4,
    /// Vector of big-endian `f64`.
    Residual = 5,
    Flag = 6,
    Count = 7,
    /// Big-endian `i64` in the clear. No honest protocol sends one.
    PlaintextInteger = 8,
}

impl FieldKind {
    pub fn from_u8(b: u8) -> Option<Self> {
        use FieldKind::*;
        [PublicKey, Ciphertext, AccountId, GroupElement, Residual, Flag, Count, PlaintextInteger]
            .into_iter()
            .find(|k| *k as u8 == b)
    }
}

impl fmt::Display for FieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("enum serializes");
        f.write_str(s.as_str().expect("string"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Field {
    pub kind: FieldKind,
    pub data: Vec<u8>,
}

/// A message body: a sequence of `kind:u8 ‖ len:u32 ‖ bytes` fields.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Payload {
    fields: Vec<Field>,
}

impl Payload {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, kind: FieldKind, data: Vec<u8>) -> &mut Self {
        self.fields.push(Field { kind, data });
        self
    }

    pub fn with(mut self, kind: FieldKind, data: Vec<u8>) -> Self {
        self.push(kind, data);
        self
    }

    pub fn fields(&self) -> &[Field] {
        &self.fields
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for f in &self.fields {
            out.push(f.kind as u8);
            out.extend_from_slice(&(f.data.len() as u32).to_be_bytes());
            out.extend_from_slice(&f.data);
        }
        out
    }

    pub fn decode(mut bytes: &[u8]) -> Result<Self, HarnessError> {
        let mut fields = Vec::new();
        while !bytes.is_empty() {
            if bytes.len() < 5 {
                return Err(HarnessError::Payload("truncated field header".into()));
            }
            let kind = FieldKind::from_u8(bytes[0])
                .ok_or_else(|| HarnessError::Payload(format!("unknown field kind {}", bytes[0])))?;
            let len = u32::from_be_bytes(bytes[1..5].try_into().unwrap()) as usize;
            let rest = &bytes[5..];
            if rest.len() < len {
                return Err(HarnessError::Payload("truncated field body".into()));
            }
            fields.push(Field {
                kind,
                data: rest[..len].to_vec(),
            });
            bytes = &rest[len..];
        }
        Ok(Self { fields })
    }

    /// Walks the fields in order, checking kinds as it goes.
    pub fn reader(&self) -> PayloadReader<'_> {
        PayloadReader {
            fields: &self.fields,
            pos: 0,
        }
    }
}

pub struct PayloadReader<'a> {
    fields: &'a [Field],
    pos: usize,
}

impl<'a> PayloadReader<'a> {
    pub fn next(&mut self, kind: FieldKind) -> Result<&'a [u8], HarnessError> {
        match self.fields.get(self.pos) {
            Some(f) if f.kind == kind => {
                self.pos += 1;
                Ok(&f.data)
            }
            Some(f) => Err(HarnessError::Payload(format!("expected {kind} field, found {}", f.kind))),
            None => Err(HarnessError::Payload(format!("expected {kind} field, found end of payload"))),
        }
    }

    /// Takes consecutive fields of `kind` until another kind or the end.
    pub fn all(&mut self, kind: FieldKind) -> Vec<&'a [u8]> {
        let mut out = Vec::new();
        while let Some(f) = self.fields.get(self.pos).filter(|f| f.kind == kind) {
            out.push(f.data.as_slice());
            self.pos += 1;
        }
        out
    }

    pub fn finish(&self) -> Result<(), HarnessError> {
        if self.pos != self.fields.len() {
            return Err(HarnessError::Payload("unexpected trailing fields".into()));
        }
        Ok(())
    }
}

pub fn encode_reals(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_be_bytes()).collect()
}

pub fn decode_reals(bytes: &[u8]) -> Result<Vec<f64>, HarnessError> {
    if bytes.len() % 8 != 0 {
        return Err(HarnessError::Payload("real vector length not a multiple of 8".into()));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_be_bytes(c.try_into().unwrap()))
        .collect())
}

pub fn decode_flag(bytes: &[u8]) -> Result<bool, HarnessError> {
    match bytes {
        [0] => Ok(false),
        [1] => Ok(true),
        _ => Err(HarnessError::Payload("flag must be one byte, 0 or 1".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reader_checks_kinds() {
        let p = Payload::new()
            .with(FieldKind::PublicKey, vec![1, 2])
            .with(FieldKind::Ciphertext, vec![3])
            .with(FieldKind::Ciphertext, vec![4]);
        let mut r = p.reader();
        assert!(r.next(FieldKind::Ciphertext).is_err());
        assert_eq!(r.next(FieldKind::PublicKey).unwrap(), &[1, 2]);
        assert_eq!(r.all(FieldKind::Ciphertext).len(), 2);
        r.finish().unwrap();
        assert_eq!(FieldKind::Residual.to_string(), "residual");
    }

    #[test]
    fn decode_rejects_garbage() {
        assert!(Payload::decode(&[9, 0, 0, 0, 0]).is_err());
        assert!(Payload::decode(&[1, 0, 0, 0, 5, 1]).is_err());
        assert!(Payload::decode(&[1, 0]).is_err());
    }

    proptest! {
        #[test]
        fn encode_decode_round_trip(fields in proptest::collection::vec((1u8..=8, proptest::collection::vec(any::<u8>(), 0..40)), 0..6)) {
            let mut p = Payload::new();
            for (k, d) in fields {
                p.push(FieldKind::from_u8(k).unwrap(), d);
            }
            prop_assert_eq!(Payload::decode(&p.encode()).unwrap(), p);
        }

        #[test]
        fn reals_round_trip(v in proptest::collection::vec(any::<f64>().prop_filter("not nan", |x| !x.is_nan()), 0..10)) {
            prop_assert_eq!(decode_reals(&encode_reals(&v)).unwrap(), v);
        }
    }
}
