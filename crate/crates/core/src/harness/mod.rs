//! Deterministic multi-party execution: message bus, transcripts, privacy
//! audit and replay.
//!
//! Every protocol in this crate runs its parties against a [`Bus`]. The bus
//! records the exact bytes of every message, so a finished run can be audited
//! for plaintext leaks and replayed from its seed.

mod audit;
mod bus;
mod payload;
mod runner;
mod transcript;

pub use audit::{
    audit, AuditPolicy, AuditReport, Encoding, ProtectedValue, Validators, Violation, ViolationKind,
    MIN_PATTERN_LEN,
};
pub use bus::Bus;
pub use payload::{decode_flag, decode_reals, encode_reals, Field, FieldKind, Payload, PayloadReader};
pub use runner::{audit_policy, replay, run_protocol, ProtocolInput, ProtocolOutput, RunError};
pub use transcript::{Message, Transcript, TranscriptHeader, TRANSCRIPT_FORMAT, TRANSCRIPT_VERSION};

/// Party id of the financial intelligence unit, which holds decryption keys.
pub const FIU: &str = "fiu";

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Fiu,
    ReportingEntity,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Party {
    pub id: String,
    pub role: Role,
}

impl Party {
    pub fn fiu() -> Self {
        Self {
            id: FIU.into(),
            role: Role::Fiu,
        }
    }

    pub fn reporting_entity(id: &str) -> Self {
        Self {
            id: id.into(),
            role: Role::ReportingEntity,
        }
    }
}

/// SHA-256 of the JSON form of a protocol input, hex encoded. Transcripts
/// carry it so a replay against different input is refused up front.
pub fn input_digest<T: serde::Serialize>(input: &T) -> String {
    use sha2::{Digest, Sha256};
    let json = serde_json::to_vec(input).expect("protocol inputs serialize");
    hex::encode(Sha256::digest(json))
}

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum HarnessError {
    #[error("malformed payload: {0}")]
    Payload(String),
    #[error("round {round}: {receiver} expected a message from {sender}, none was delivered")]
    NoMessage { round: u32, sender: String, receiver: String },
    #[error("transcript ends after {recorded} messages but the replay continues")]
    IncompleteReplay { recorded: usize },
    #[error("replay does not match the recording: {0}")]
    ReplayMismatch(String),
    #[error("transcript: {0}")]
    Transcript(String),
    #[error("i/o: {0}")]
    Io(String),
}
