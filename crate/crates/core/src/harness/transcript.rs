use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::HarnessError;

pub const TRANSCRIPT_FORMAT: &str = "finpriv-transcript";
pub const TRANSCRIPT_VERSION: u32 = 1;

/// Identifies the run a transcript belongs to.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptHeader {
    pub format: String,
    pub version: u32,
    pub protocol: String,
    pub seed: u64,
    /// SHA-256 of the canonical protocol input, hex.
    pub input_digest: String,
}

/// One message exactly as it crossed a party boundary.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub round: u32,
    pub sender: String,
    pub receiver: String,
    pub protocol: String,
    #[serde(with = "hex::serde")]
    pub payload: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transcript {
    pub header: TranscriptHeader,
    messages: Vec<Message>,
}

impl Transcript {
    pub fn new(protocol: &str, seed: u64, input_digest: String) -> Self {
        Self {
            header: TranscriptHeader {
                format: TRANSCRIPT_FORMAT.into(),
                version: TRANSCRIPT_VERSION,
                protocol: protocol.into(),
                seed,
                input_digest,
            },
            messages: Vec::new(),
        }
    }

    pub(crate) fn append(&mut self, m: Message) {
        self.messages.push(m);
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn rounds(&self) -> u32 {
        self.messages.last().map_or(0, |m| m.round + 1)
    }

    /// Drops every message from index `n` on; used to build truncated copies.
    pub fn truncated(&self, n: usize) -> Self {
        Self {
            header: self.header.clone(),
            messages: self.messages[..n.min(self.messages.len())].to_vec(),
        }
    }

    /// Total payload bytes.
    pub fn payload_bytes(&self) -> usize {
        self.messages.iter().map(|m| m.payload.len()).sum()
    }

    /// JSON lines: the header, then one message per line with hex payloads.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<(), HarnessError> {
        let io = |e: std::io::Error| HarnessError::Io(e.to_string());
        serde_json::to_writer(&mut out, &self.header).map_err(|e| HarnessError::Io(e.to_string()))?;
        out.write_all(b"\n").map_err(io)?;
        for m in &self.messages {
            serde_json::to_writer(&mut out, m).map_err(|e| HarnessError::Io(e.to_string()))?;
            out.write_all(b"\n").map_err(io)?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("JSON is UTF-8")
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self, HarnessError> {
        let mut lines = input.lines();
        let bad = |n: usize, e: &dyn std::fmt::Display| HarnessError::Transcript(format!("line {n}: {e}"));
        let first = lines
            .next()
            .ok_or_else(|| HarnessError::Transcript("empty transcript".into()))?
            .map_err(|e| bad(1, &e))?;
        let header: TranscriptHeader = serde_json::from_str(&first).map_err(|e| bad(1, &e))?;
        if header.format != TRANSCRIPT_FORMAT || header.version != TRANSCRIPT_VERSION {
            return Err(HarnessError::Transcript(format!(
                "unsupported transcript {} v{}",
                header.format, header.version
            )));
        }
        let mut messages = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| bad(i + 2, &e))?;
            if line.trim().is_empty() {
                continue;
            }
            messages.push(serde_json::from_str(&line).map_err(|e| bad(i + 2, &e))?);
        }
        Ok(Self { header, messages })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_round_trip() {
        let mut t = Transcript::new("psi", 7, "ab".into());
        t.append(Message {
            round: 0,
            sender: "fiu".into(),
            receiver: "re".into(),
            protocol: "psi".into(),
            payload: vec![0, 1, 255],
        });
        let text = t.to_jsonl();
        assert!(text.lines().nth(1).unwrap().contains("\"payload\":\"0001ff\""));
        assert_eq!(Transcript::read_jsonl(text.as_bytes()).unwrap(), t);
        assert_eq!(t.rounds(), 1);
        assert!(Transcript::read_jsonl("".as_bytes()).is_err());
        assert!(Transcript::read_jsonl("{\"format\":\"x\",\"version\":1,\"protocol\":\"p\",\"seed\":0,\"input_digest\":\"\"}".as_bytes()).is_err());
    }
}
