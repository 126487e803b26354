use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use aho_corasick::AhoCorasick;
use serde::Serialize;

use super::payload::{FieldKind, Payload};
use super::transcript::Transcript;
use crate::he::{GroupParams, PaillierPublicKey, PublicKey};

/// Patterns shorter than this are not searched for in raw payload bytes:
/// at transcript sizes of a few megabytes a 4-byte pattern matches random
/// ciphertext bytes by chance far too often. Short values are still covered
/// by the field-kind allow-list.
pub const MIN_PATTERN_LEN: usize = 6;

/// A value that must never appear in any message body.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProtectedValue {
    pub label: String,
    patterns: Vec<(Encoding, Vec<u8>)>,
    /// Field kinds in which the value may legitimately appear.
    exempt: BTreeSet<FieldKind>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Encoding {
    Raw,
    FixedWidth,
    Decimal,
    Hex,
}

impl fmt::Display for Encoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Encoding::Raw => "raw bytes",
            Encoding::FixedWidth => "fixed-width binary",
            Encoding::Decimal => "decimal string",
            Encoding::Hex => "hex string",
        })
    }
}

impl ProtectedValue {
    fn build(label: &str, mut patterns: Vec<(Encoding, Vec<u8>)>) -> Self {
        patterns.sort();
        patterns.dedup();
        Self {
            label: label.into(),
            patterns,
            exempt: BTreeSet::new(),
        }
    }

    /// An identifier or name, searched for verbatim and as lowercase hex.
    pub fn text(label: &str, value: &str) -> Self {
        Self::build(
            label,
            vec![
                (Encoding::Raw, value.as_bytes().to_vec()),
                (Encoding::Hex, hex::encode(value).into_bytes()),
            ],
        )
    }

    /// An integer, as 8-byte big- and little-endian, decimal text and hex text.
    pub fn integer(label: &str, value: i64) -> Self {
        let be = value.to_be_bytes();
        Self::build(
            label,
            vec![
                (Encoding::FixedWidth, be.to_vec()),
                (Encoding::FixedWidth, value.to_le_bytes().to_vec()),
                (Encoding::Decimal, value.to_string().into_bytes()),
                (Encoding::Hex, hex::encode(be).into_bytes()),
            ],
        )
    }

    /// A real, as IEEE-754 bytes in both byte orders and its shortest decimal form.
    pub fn real(label: &str, value: f64) -> Self {
        Self::build(
            label,
            vec![
                (Encoding::FixedWidth, value.to_be_bytes().to_vec()),
                (Encoding::FixedWidth, value.to_le_bytes().to_vec()),
                (Encoding::Decimal, value.to_string().into_bytes()),
                (Encoding::Hex, hex::encode(value.to_be_bytes()).into_bytes()),
            ],
        )
    }

    pub fn exempt_in(mut self, kind: FieldKind) -> Self {
        self.exempt.insert(kind);
        self
    }

    fn searchable(&self) -> impl Iterator<Item = &(Encoding, Vec<u8>)> {
        self.patterns.iter().filter(|(_, p)| p.len() >= MIN_PATTERN_LEN)
    }
}

/// Keys and groups used to check that ciphertexts and group elements are well formed.
#[derive(Clone, Debug, Default)]
pub struct Validators {
    pub elgamal: Option<PublicKey>,
    pub paillier: Option<PaillierPublicKey>,
    pub group: Option<GroupParams>,
}

#[derive(Clone, Debug, Default)]
pub struct AuditPolicy {
    pub protocol: String,
    pub allowed: BTreeSet<FieldKind>,
    pub protected: Vec<ProtectedValue>,
    pub validators: Validators,
}

impl AuditPolicy {
    pub fn new(protocol: &str, allowed: &[FieldKind]) -> Self {
        Self {
            protocol: protocol.into(),
            allowed: allowed.iter().copied().collect(),
            ..Self::default()
        }
    }

    pub fn protect(mut self, values: impl IntoIterator<Item = ProtectedValue>) -> Self {
        self.protected.extend(values);
        self
    }

    pub fn validate_with(mut self, validators: Validators) -> Self {
        self.validators = validators;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ViolationKind {
    UnparseablePayload { reason: String },
    WrongProtocol { found: String },
    ForbiddenField { kind: FieldKind },
    MalformedCiphertext { reason: String },
    NotAGroupElement,
    RoundOrder { previous: u32 },
    ProtectedValue { label: String, encoding: Encoding, offset: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub message: usize,
    pub round: u32,
    pub sender: String,
    pub receiver: String,
    #[serde(flatten)]
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "message {} (round {}, {} -> {}): ",
            self.message, self.round, self.sender, self.receiver
        )?;
        match &self.kind {
            ViolationKind::UnparseablePayload { reason } => write!(f, "unparseable payload: {reason}"),
            ViolationKind::WrongProtocol { found } => write!(f, "message tagged {found}"),
            ViolationKind::ForbiddenField { kind } => write!(f, "field of kind {kind} is not allowed"),
            ViolationKind::MalformedCiphertext { reason } => write!(f, "malformed ciphertext: {reason}"),
            ViolationKind::NotAGroupElement => write!(f, "group element outside the subgroup"),
            ViolationKind::RoundOrder { previous } => write!(f, "sent after a message of round {previous}"),
            ViolationKind::ProtectedValue { label, encoding, offset } => {
                write!(f, "protected value {label} found as {encoding} at byte {offset}")
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct AuditReport {
    pub messages: usize,
    pub violations: Vec<Violation>,
    /// Protected encodings too short to search for in raw bytes.
    pub unsearched_patterns: usize,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn first_violation_round(&self) -> Option<u32> {
        self.violations.iter().map(|v| v.round).min()
    }
}

fn check_ciphertext(v: &Validators, data: &[u8]) -> Result<(), String> {
    use crate::he::wire::{TAG_ELGAMAL_CIPHERTEXT, TAG_PAILLIER_CIPHERTEXT};
    match data.first() {
        Some(&TAG_ELGAMAL_CIPHERTEXT) => match &v.elgamal {
            Some(pk) => pk.ciphertext_from_bytes(data).map(|_| ()).map_err(|e| e.to_string()),
            None => Err("ElGamal ciphertext but no ElGamal key in the policy".into()),
        },
        Some(&TAG_PAILLIER_CIPHERTEXT) => match &v.paillier {
            Some(pk) => pk.ciphertext_from_bytes(data).map(|_| ()).map_err(|e| e.to_string()),
            None => Err("Paillier ciphertext but no Paillier key in the policy".into()),
        },
        Some(t) => Err(format!("unknown ciphertext tag {t:#04x}")),
        None => Err("empty ciphertext field".into()),
    }
}

/// Checks every message of `transcript` against `policy`.
pub fn audit(transcript: &Transcript, policy: &AuditPolicy) -> AuditReport {
    let mut report = AuditReport {
        messages: transcript.len(),
        ..AuditReport::default()
    };
    report.unsearched_patterns = policy
        .protected
        .iter()
        .flat_map(|p| &p.patterns)
        .filter(|(_, b)| b.len() < MIN_PATTERN_LEN)
        .count();
    // One automaton over every searchable pattern; `owners[k]` says which
    // protected value and encoding pattern `k` came from.
    let mut owners = Vec::new();
    let mut patterns = Vec::new();
    for (v, pv) in policy.protected.iter().enumerate() {
        for (encoding, pattern) in pv.searchable() {
            owners.push((v, *encoding));
            patterns.push(pattern.as_slice());
        }
    }
    let matcher = AhoCorasick::new(&patterns).expect("protected patterns form a valid automaton");
    let mut last_round = 0;
    for (i, m) in transcript.messages().iter().enumerate() {
        let mut flag = |kind| {
            report.violations.push(Violation {
                message: i,
                round: m.round,
                sender: m.sender.clone(),
                receiver: m.receiver.clone(),
                kind,
            })
        };
        if m.round < last_round {
            flag(ViolationKind::RoundOrder { previous: last_round });
        }
        last_round = last_round.max(m.round);
        if m.protocol != policy.protocol {
            flag(ViolationKind::WrongProtocol {
                found: m.protocol.clone(),
            });
        }
        let payload = match Payload::decode(&m.payload) {
            Ok(p) => p,
            Err(e) => {
                flag(ViolationKind::UnparseablePayload { reason: e.to_string() });
                continue;
            }
        };
        // Byte offset of each field's data within the raw payload.
        let mut offset = 0;
        for field in payload.fields() {
            let start = offset + 5;
            offset = start + field.data.len();
            if !policy.allowed.contains(&field.kind) {
                flag(ViolationKind::ForbiddenField { kind: field.kind });
            }
            match field.kind {
                FieldKind::Ciphertext => {
                    if let Err(reason) = check_ciphertext(&policy.validators, &field.data) {
                        flag(ViolationKind::MalformedCiphertext { reason });
                    }
                }
                FieldKind::GroupElement => {
                    if let Some(g) = &policy.validators.group {
                        if g.element_from_bytes(&field.data).is_err() {
                            flag(ViolationKind::NotAGroupElement);
                        }
                    }
                }
                _ => {}
            }
            if patterns.is_empty() {
                continue;
            }
            let mut hits = BTreeMap::new();
            for hit in matcher.find_overlapping_iter(&field.data) {
                hits.entry(hit.pattern().as_usize()).or_insert(hit.start());
            }
            for (k, at) in hits {
                let (v, encoding) = owners[k];
                let pv = &policy.protected[v];
                if !pv.exempt.contains(&field.kind) {
                    flag(ViolationKind::ProtectedValue {
                        label: pv.label.clone(),
                        encoding,
                        offset: start + at,
                    });
                }
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::Bus;

    fn transcript(payloads: &[Payload]) -> Transcript {
        let mut bus = Bus::new("t", 0, String::new());
        for p in payloads {
            bus.send("a", "b", p).unwrap();
            bus.barrier();
        }
        bus.finish().unwrap()
    }

    #[test]
    fn forbidden_kinds_are_reported_with_their_round() {
        let t = transcript(&[
            Payload::new().with(FieldKind::Flag, vec![1]),
            Payload::new().with(FieldKind::PlaintextInteger, 3i64.to_be_bytes().to_vec()),
        ]);
        let report = audit(&t, &AuditPolicy::new("t", &[FieldKind::Flag]));
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.first_violation_round(), Some(1));
        assert!(report.violations[0].to_string().contains("plaintext-integer"));
    }

    #[test]
    fn planted_values_are_found_in_every_encoding() {
        let id = 1234567890123i64;
        let plants: Vec<Vec<u8>> = vec![
            id.to_be_bytes().to_vec(),
            id.to_le_bytes().to_vec(),
            id.to_string().into_bytes(),
            hex::encode(id.to_be_bytes()).into_bytes(),
        ];
        let policy = AuditPolicy::new("t", &[FieldKind::AccountId])
            .protect([ProtectedValue::integer("spl entry", id)]);
        for plant in plants {
            let mut data = vec![7u8; 11];
            data.extend_from_slice(&plant);
            data.extend_from_slice(&[9u8; 5]);
            let t = transcript(&[Payload::new().with(FieldKind::AccountId, data)]);
            let report = audit(&t, &policy);
            assert!(!report.passed(), "missed {plant:?}");
            match &report.violations[0].kind {
                ViolationKind::ProtectedValue { offset, .. } => assert_eq!(*offset, 16),
                other => panic!("unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn exemptions_and_short_patterns() {
        let t = transcript(&[Payload::new().with(FieldKind::AccountId, b"acct-00017".to_vec())]);
        let strict = AuditPolicy::new("t", &[FieldKind::AccountId])
            .protect([ProtectedValue::text("seed", "acct-00017")]);
        assert!(!audit(&t, &strict).passed());
        let scoped = AuditPolicy::new("t", &[FieldKind::AccountId])
            .protect([ProtectedValue::text("seed", "acct-00017").exempt_in(FieldKind::AccountId)]);
        assert!(audit(&t, &scoped).passed());
        let short = AuditPolicy::new("t", &[FieldKind::AccountId]).protect([ProtectedValue::text("seed", "a1")]);
        let report = audit(&t, &short);
        assert!(report.passed());
        assert_eq!(report.unsearched_patterns, 2);
    }

    #[test]
    fn ciphertexts_are_validated() {
        let keys = crate::he::keygen(&GroupParams::reference(), &mut crate::rng::seeded(1));
        let ct = keys.public().encrypt_signed_exponent(1, &mut crate::rng::seeded(2));
        let good = ct.to_bytes(keys.params().element_len());
        // Same c1, but c2 = 2 lies outside the subgroup.
        let mut bad = good[..37].to_vec();
        crate::he::wire::put_bytes(&mut bad, &keys.params().element_to_bytes(&2u32.into()));
        let t = transcript(&[
            Payload::new().with(FieldKind::Ciphertext, good),
            Payload::new().with(FieldKind::Ciphertext, bad),
        ]);
        let policy = AuditPolicy::new("t", &[FieldKind::Ciphertext]).validate_with(Validators {
            elgamal: Some(keys.public().clone()),
            ..Validators::default()
        });
        let report = audit(&t, &policy);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].round, 1);
    }
}
