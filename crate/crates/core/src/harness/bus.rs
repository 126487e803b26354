use std::collections::{BTreeMap, VecDeque};

use super::payload::Payload;
use super::transcript::{Message, Transcript};
use super::HarnessError;

/// In-process network with lockstep rounds.
///
/// Messages sent during round `k` become receivable only after
/// [`barrier`](Bus::barrier) closes the round, and are then delivered FIFO per
/// (sender, receiver) pair. Every send is appended to the transcript with the
/// exact payload bytes. In replay mode each send is also compared against the
/// recorded transcript.
#[derive(Debug)]
pub struct Bus {
    round: u32,
    pending: Vec<Message>,
    queues: BTreeMap<(String, String), VecDeque<Vec<u8>>>,
    transcript: Transcript,
    expected: Option<Transcript>,
}

impl Bus {
    pub fn new(protocol: &str, seed: u64, input_digest: String) -> Self {
        Self {
            round: 0,
            pending: Vec::new(),
            queues: BTreeMap::new(),
            transcript: Transcript::new(protocol, seed, input_digest),
            expected: None,
        }
    }

    /// A bus that checks every message against `recorded`.
    pub fn replaying(recorded: Transcript) -> Self {
        let h = &recorded.header;
        let mut bus = Self::new(&h.protocol, h.seed, h.input_digest.clone());
        bus.expected = Some(recorded);
        bus
    }

    pub fn protocol(&self) -> &str {
        &self.transcript.header.protocol
    }

    pub fn seed(&self) -> u64 {
        self.transcript.header.seed
    }

    pub fn round(&self) -> u32 {
        self.round
    }

    pub fn send(&mut self, sender: &str, receiver: &str, payload: &Payload) -> Result<(), HarnessError> {
        let msg = Message {
            round: self.round,
            sender: sender.into(),
            receiver: receiver.into(),
            protocol: self.transcript.header.protocol.clone(),
            payload: payload.encode(),
        };
        if let Some(expected) = &self.expected {
            let index = self.transcript.len();
            match expected.messages().get(index) {
                None => {
                    return Err(HarnessError::IncompleteReplay {
                        recorded: expected.len(),
                    })
                }
                Some(e) if *e != msg => {
                    return Err(HarnessError::ReplayMismatch(format!(
                        "message {index} (round {}, {} -> {}) differs from the recording",
                        msg.round, msg.sender, msg.receiver
                    )))
                }
                Some(_) => {}
            }
        }
        self.transcript.append(msg.clone());
        self.pending.push(msg);
        Ok(())
    }

    /// Closes the current round and makes its messages receivable.
    pub fn barrier(&mut self) {
        for m in self.pending.drain(..) {
            self.queues
                .entry((m.sender, m.receiver))
                .or_default()
                .push_back(m.payload);
        }
        self.round += 1;
    }

    pub fn recv(&mut self, receiver: &str, sender: &str) -> Result<Payload, HarnessError> {
        let bytes = self
            .queues
            .get_mut(&(sender.to_string(), receiver.to_string()))
            .and_then(VecDeque::pop_front)
            .ok_or_else(|| HarnessError::NoMessage {
                round: self.round,
                sender: sender.into(),
                receiver: receiver.into(),
            })?;
        Payload::decode(&bytes)
    }

    /// Drains everything delivered to `receiver`, ordered by sender id.
    pub fn recv_all(&mut self, receiver: &str) -> Result<Vec<(String, Payload)>, HarnessError> {
        let mut out = Vec::new();
        for ((s, r), q) in self.queues.iter_mut() {
            if r == receiver {
                while let Some(bytes) = q.pop_front() {
                    out.push((s.clone(), Payload::decode(&bytes)?));
                }
            }
        }
        Ok(out)
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    /// Ends the run. A replay must have consumed the whole recording.
    pub fn finish(self) -> Result<Transcript, HarnessError> {
        if let Some(expected) = &self.expected {
            if expected.len() != self.transcript.len() {
                return Err(HarnessError::ReplayMismatch(format!(
                    "recording has {} messages, the replay produced {}",
                    expected.len(),
                    self.transcript.len()
                )));
            }
        }
        Ok(self.transcript)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::FieldKind;

    fn msg(b: u8) -> Payload {
        Payload::new().with(FieldKind::Flag, vec![b])
    }

    #[test]
    fn messages_wait_for_the_barrier_and_stay_fifo() {
        let mut bus = Bus::new("t", 0, String::new());
        bus.send("a", "b", &msg(0)).unwrap();
        bus.send("a", "b", &msg(1)).unwrap();
        bus.send("c", "b", &msg(1)).unwrap();
        assert!(matches!(bus.recv("b", "a"), Err(HarnessError::NoMessage { .. })));
        bus.barrier();
        assert_eq!(bus.recv("b", "a").unwrap(), msg(0));
        let rest = bus.recv_all("b").unwrap();
        assert_eq!(rest, vec![("a".into(), msg(1)), ("c".into(), msg(1))]);
        let t = bus.finish().unwrap();
        assert_eq!(t.len(), 3);
        assert!(t.messages().iter().all(|m| m.round == 0));
    }

    #[test]
    fn replay_detects_divergence_and_truncation() {
        let mut bus = Bus::new("t", 3, "d".into());
        bus.send("a", "b", &msg(0)).unwrap();
        bus.barrier();
        bus.send("b", "a", &msg(1)).unwrap();
        let recorded = bus.finish().unwrap();

        let mut replay = Bus::replaying(recorded.clone());
        replay.send("a", "b", &msg(0)).unwrap();
        replay.barrier();
        assert!(matches!(replay.send("b", "a", &msg(0)), Err(HarnessError::ReplayMismatch(_))));

        let mut short = Bus::replaying(recorded.truncated(1));
        short.send("a", "b", &msg(0)).unwrap();
        short.barrier();
        assert_eq!(
            short.send("b", "a", &msg(1)).unwrap_err(),
            HarnessError::IncompleteReplay { recorded: 1 }
        );

        let mut early = Bus::replaying(recorded);
        early.send("a", "b", &msg(0)).unwrap();
        assert!(matches!(early.finish(), Err(HarnessError::ReplayMismatch(_))));
    }
}
