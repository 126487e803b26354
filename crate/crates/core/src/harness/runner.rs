use std::sync::Arc;

use serde::Serialize;

use super::{AuditPolicy, Bus, FieldKind, HarnessError, Payload, ProtectedValue, Transcript, Validators};
use crate::fedlearn::{self, FedError, LabelSet, PartyDataset, TrainConfig, TrainResult};
use crate::fintracer::{self, FinTracerError, FinTracerResult, Scenario};
use crate::he::{GroupParams, PublicKey};
use crate::psi::{self, PsiError, PsiResult};

/// Everything one protocol run needs.
#[derive(Clone, Debug)]
pub enum ProtocolInput {
    Psi { spl: Vec<String>, customers: Vec<String> },
    PsiCa { a: Vec<String>, b: Vec<String> },
    Compare { x: u64, y: u64, bits: u32 },
    FinTracer(Scenario),
    FedLr {
        parties: Vec<PartyDataset>,
        labels: LabelSet,
        config: TrainConfig,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "protocol", content = "result", rename_all = "kebab-case")]
pub enum ProtocolOutput {
    Psi(PsiResult),
    PsiCa(usize),
    Compare(bool),
    #[serde(rename = "fintracer")]
    FinTracer(FinTracerResult),
    #[serde(rename = "fedlr")]
    FedLr(TrainResult),
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum RunError {
    #[error(transparent)]
    Psi(#[from] PsiError),
    #[error(transparent)]
    FinTracer(#[from] FinTracerError),
    #[error(transparent)]
    FedLr(#[from] FedError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
}

impl ProtocolInput {
    pub fn protocol(&self) -> &'static str {
        match self {
            ProtocolInput::Psi { .. } => psi::PSI_PROTOCOL,
            ProtocolInput::PsiCa { .. } => psi::PSI_CA_PROTOCOL,
            ProtocolInput::Compare { .. } => psi::COMPARE_PROTOCOL,
            ProtocolInput::FinTracer(_) => fintracer::FINTRACER_PROTOCOL,
            ProtocolInput::FedLr { .. } => fedlearn::FEDLR_PROTOCOL,
        }
    }

    fn digest(&self, group: &GroupParams, seed: u64) -> Result<String, RunError> {
        Ok(match self {
            ProtocolInput::Psi { spl, customers } => psi::psi_digest(group, spl, customers),
            ProtocolInput::PsiCa { a, b } => psi::psi_ca_digest(group, a, b),
            ProtocolInput::Compare { x, y, bits } => psi::compare_digest(group, *x, *y, *bits),
            ProtocolInput::FinTracer(s) => fintracer::scenario_digest(s),
            ProtocolInput::FedLr {
                parties,
                labels,
                config,
            } => fedlearn::run_digest(parties, labels, &seeded(config, seed)),
        })
    }
}

fn seeded(config: &TrainConfig, seed: u64) -> TrainConfig {
    TrainConfig {
        seed,
        ..config.clone()
    }
}

fn execute(bus: &mut Bus, group: &GroupParams, input: &ProtocolInput) -> Result<ProtocolOutput, RunError> {
    Ok(match input {
        ProtocolInput::Psi { spl, customers } => ProtocolOutput::Psi(psi::run_psi(bus, group, spl, customers)?),
        ProtocolInput::PsiCa { a, b } => ProtocolOutput::PsiCa(psi::psi_ca_exchange(
            bus,
            &Arc::new(group.clone()),
            psi::PARTY_A,
            psi::PARTY_B,
            a,
            b,
        )?),
        ProtocolInput::Compare { x, y, bits } => {
            ProtocolOutput::Compare(psi::greater_than_exchange(bus, &Arc::new(group.clone()), *x, *y, *bits)?)
        }
        ProtocolInput::FinTracer(s) => ProtocolOutput::FinTracer(fintracer::run_fintracer(bus, group, &s.validate()?)?),
        ProtocolInput::FedLr {
            parties,
            labels,
            config,
        } => ProtocolOutput::FedLr(fedlearn::run_fedlr(bus, parties, labels, &seeded(config, bus.seed()))?),
    })
}

/// Runs `input` in the reference group; `(input, seed)` fixes the result
/// and every transcript byte. For federated training `seed` replaces the
/// configured one.
pub fn run_protocol(input: &ProtocolInput, seed: u64) -> Result<(ProtocolOutput, Transcript), RunError> {
    let group = GroupParams::reference();
    let mut bus = Bus::new(input.protocol(), seed, input.digest(&group, seed)?);
    let out = execute(&mut bus, &group, input)?;
    Ok((out, bus.finish()?))
}

/// Re-executes `input` against a recorded transcript, checking every message.
pub fn replay(transcript: &Transcript, input: &ProtocolInput) -> Result<ProtocolOutput, RunError> {
    let group = GroupParams::reference();
    let h = &transcript.header;
    if h.protocol != input.protocol() {
        return Err(HarnessError::ReplayMismatch(format!(
            "transcript is for {}, input is for {}",
            h.protocol,
            input.protocol()
        ))
        .into());
    }
    if h.input_digest != input.digest(&group, h.seed)? {
        return Err(HarnessError::ReplayMismatch("transcript was recorded for different inputs".into()).into());
    }
    let mut bus = Bus::replaying(transcript.clone());
    let out = execute(&mut bus, &group, input)?;
    bus.finish()?;
    Ok(out)
}

fn first_elgamal_key(transcript: &Transcript) -> Option<PublicKey> {
    let m = transcript.messages().first()?;
    let p = Payload::decode(&m.payload).ok()?;
    let bytes = p.reader().next(FieldKind::PublicKey).ok()?.to_vec();
    PublicKey::from_bytes(&bytes).ok()
}

fn texts<'a>(label: &'a str, items: &'a [String]) -> impl Iterator<Item = ProtectedValue> + 'a {
    items.iter().map(move |s| ProtectedValue::text(label, s))
}

/// The allow-list and protected values for `input`'s protocol.
pub fn audit_policy(input: &ProtocolInput, transcript: &Transcript) -> Result<AuditPolicy, RunError> {
    let group = GroupParams::reference();
    Ok(match input {
        ProtocolInput::Psi { spl, customers } => {
            AuditPolicy::new(psi::PSI_PROTOCOL, &[FieldKind::PublicKey, FieldKind::Ciphertext])
                .protect(texts("SPL entry", spl).chain(texts("customer", customers)))
                .validate_with(Validators {
                    elgamal: first_elgamal_key(transcript),
                    ..Validators::default()
                })
        }
        ProtocolInput::PsiCa { a, b } => AuditPolicy::new(psi::PSI_CA_PROTOCOL, &[FieldKind::GroupElement])
            .protect(texts("item of a", a).chain(texts("item of b", b)))
            .validate_with(Validators {
                group: Some(group),
                ..Validators::default()
            }),
        ProtocolInput::Compare { x, y, .. } => {
            let (xi, yi) = (i64::try_from(*x), i64::try_from(*y));
            AuditPolicy::new(psi::COMPARE_PROTOCOL, &[FieldKind::GroupElement])
                .protect(
                    [xi.ok().map(|v| ProtectedValue::integer("x", v)), yi.ok().map(|v| ProtectedValue::integer("y", v))]
                        .into_iter()
                        .flatten(),
                )
                .validate_with(Validators {
                    group: Some(group),
                    ..Validators::default()
                })
        }
        ProtocolInput::FinTracer(s) => fintracer::audit_policy(&s.validate()?, transcript),
        ProtocolInput::FedLr { parties, labels, .. } => fedlearn::audit_policy(parties, labels, transcript),
    })
}
