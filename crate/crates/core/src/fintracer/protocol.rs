use std::collections::{BTreeMap, BTreeSet};

use rand::{CryptoRng, RngCore};
use serde::Serialize;

use super::scenario::{AccountRef, Institution, Network, RevealMode, Scenario};
use super::FinTracerError;
use crate::dp::{geometric_noise, DpParams};
use crate::harness::{input_digest, AuditPolicy, Bus, FieldKind, Payload, ProtectedValue, Transcript, Validators, FIU};
use crate::he::{
    keygen, AdditiveDecrypt, AdditiveHe, Ciphertext, ExpElGamal, ExpElGamalSecret, GroupParams, PublicKey,
    DEFAULT_RANGE_BOUND, DEFAULT_TABLE_BITS,
};
use crate::rng;

pub const FINTRACER_PROTOCOL: &str = "fintracer";

/// One institution's encrypted tags, keyed by account.
#[derive(Clone, Debug, PartialEq)]
pub struct TagVector {
    pub institution: String,
    pub tags: BTreeMap<String, Ciphertext>,
}

/// The ciphertexts one institution sends another in a round: one per cross
/// edge, carrying the (rerandomized) tag of the edge's source account.
#[derive(Clone, Debug, PartialEq)]
pub struct PartialMapping {
    pub sender: String,
    pub receiver: String,
    /// `(source account, destination account, tag)`.
    pub entries: Vec<(String, String, Ciphertext)>,
}

impl PartialMapping {
    pub fn to_payload(&self, pk: &PublicKey) -> Payload {
        let mut p = Payload::new();
        for (src, dst, ct) in &self.entries {
            p.push(FieldKind::AccountId, src.as_bytes().to_vec());
            p.push(FieldKind::AccountId, dst.as_bytes().to_vec());
            p.push(FieldKind::Ciphertext, pk.ciphertext_to_bytes(ct));
        }
        p
    }

    pub fn from_payload(sender: &str, receiver: &str, p: &Payload, pk: &PublicKey) -> Result<Self, FinTracerError> {
        let mut r = p.reader();
        let mut entries = Vec::new();
        while entries.len() * 3 < p.len() {
            let src = account_id(r.next(FieldKind::AccountId)?)?;
            let dst = account_id(r.next(FieldKind::AccountId)?)?;
            let ct = pk.ciphertext_from_bytes(r.next(FieldKind::Ciphertext)?)?;
            entries.push((src, dst, ct));
        }
        r.finish()?;
        Ok(Self {
            sender: sender.into(),
            receiver: receiver.into(),
            entries,
        })
    }
}

fn account_id(bytes: &[u8]) -> Result<String, FinTracerError> {
    String::from_utf8(bytes.to_vec()).map_err(|_| FinTracerError::Protocol("account id is not UTF-8".into()))
}

/// `Enc(1)` for seed accounts and `Enc(0)` for the rest, each with fresh randomness.
pub fn init_tags<R: RngCore + CryptoRng>(
    inst: &Institution,
    seeds: &BTreeSet<AccountRef>,
    scheme: &ExpElGamal,
    rng: &mut R,
) -> Result<TagVector, FinTracerError> {
    let mut tags = BTreeMap::new();
    for a in &inst.accounts {
        let m = i64::from(seeds.contains(&(inst.id.clone(), a.clone())));
        tags.insert(a.clone(), scheme.encrypt(m, rng)?);
    }
    Ok(TagVector {
        institution: inst.id.clone(),
        tags,
    })
}

/// One mapping per receiving institution.
pub fn build_partial_mappings<R: RngCore + CryptoRng>(
    inst: &Institution,
    tags: &TagVector,
    scheme: &ExpElGamal,
    rng: &mut R,
) -> Result<Vec<PartialMapping>, FinTracerError> {
    let mut out = Vec::new();
    for receiver in inst.receivers() {
        let mut entries = Vec::new();
        for (src, (dst_inst, dst)) in &inst.outgoing {
            if dst_inst != receiver {
                continue;
            }
            let tag = tags.tags.get(src).ok_or_else(|| FinTracerError::UnknownAccount {
                institution: inst.id.clone(),
                account: src.clone(),
            })?;
            entries.push((src.clone(), dst.clone(), scheme.rerandomize(tag, rng)));
        }
        out.push(PartialMapping {
            sender: inst.id.clone(),
            receiver: receiver.into(),
            entries,
        });
    }
    Ok(out)
}

/// `t'(v) = t(v) + Σ P(u -> v)` over the incoming mappings.
pub fn aggregate(
    inst: &Institution,
    tags: &TagVector,
    incoming: &[PartialMapping],
    scheme: &ExpElGamal,
) -> Result<TagVector, FinTracerError> {
    let mut next = tags.clone();
    for m in incoming {
        for (src, dst, ct) in &m.entries {
            let known = inst
                .incoming
                .iter()
                .any(|((si, sa), da)| *si == m.sender && sa == src && da == dst);
            if !known {
                return Err(FinTracerError::UnknownEdge {
                    src: (m.sender.clone(), src.clone()),
                    dst: (inst.id.clone(), dst.clone()),
                });
            }
            let t = next.tags.get_mut(dst).expect("incoming edges end at tagged accounts");
            *t = scheme.add(t, ct)?;
        }
    }
    Ok(next)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum RevealedValue {
    Count(i64),
    Reached(bool),
}

impl RevealedValue {
    pub fn count(&self) -> Option<i64> {
        match self {
            RevealedValue::Count(c) => Some(*c),
            RevealedValue::Reached(_) => None,
        }
    }

    pub fn reached(&self) -> bool {
        match self {
            RevealedValue::Count(c) => *c != 0,
            RevealedValue::Reached(b) => *b,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RevealedTag {
    pub institution: String,
    pub account: String,
    pub value: RevealedValue,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FinTracerResult {
    pub iterations: u32,
    pub mode: RevealMode,
    /// Epsilon of the geometric noise added to exact counts, if any.
    pub dp_epsilon: Option<f64>,
    pub tags: Vec<RevealedTag>,
}

impl FinTracerResult {
    pub fn counts(&self) -> Vec<i64> {
        self.tags.iter().filter_map(|t| t.value.count()).collect()
    }

    pub fn get(&self, institution: &str, account: &str) -> Option<RevealedValue> {
        self.tags
            .iter()
            .find(|t| t.institution == institution && t.account == account)
            .map(|t| t.value)
    }
}

/// FIU-side decryption. Exact mode solves bounded discrete logs; nonzero mode
/// only compares against the identity. With `dp`, two-sided geometric noise
/// of sensitivity one is added to each exact count.
pub fn reveal<R: RngCore + CryptoRng>(
    sk: &ExpElGamalSecret,
    tags: &[TagVector],
    mode: RevealMode,
    dp: Option<(DpParams, &mut R)>,
) -> Result<Vec<RevealedTag>, FinTracerError> {
    let mut dp = dp;
    let mut out = Vec::new();
    for tv in tags {
        for (account, ct) in &tv.tags {
            let value = match mode {
                RevealMode::Exact => {
                    let mut c = sk.decrypt(ct).map_err(|e| FinTracerError::Reveal {
                        institution: tv.institution.clone(),
                        account: account.clone(),
                        source: e,
                    })?;
                    if let Some((params, rng)) = dp.as_mut() {
                        c = c.saturating_add(geometric_noise(*params, *rng));
                    }
                    RevealedValue::Count(c)
                }
                RevealMode::Nonzero => RevealedValue::Reached(!sk.is_zero(ct)?),
            };
            out.push(RevealedTag {
                institution: tv.institution.clone(),
                account: account.clone(),
                value,
            });
        }
    }
    Ok(out)
}

fn party_rng(seed: u64, party: &str) -> rng::ProtocolRng {
    rng::derive(seed, &format!("{FINTRACER_PROTOCOL}/{party}"))
}

/// Runs the whole protocol over `bus`.
///
/// Round 0 distributes the FIU's key, rounds `1..=K` propagate tags along
/// cross edges, and round `K + 1` sends every tag to the FIU for reveal.
pub fn run_fintracer(bus: &mut Bus, group: &GroupParams, net: &Network) -> Result<FinTracerResult, FinTracerError> {
    let seed = bus.seed();
    let mut fiu_rng = party_rng(seed, FIU);
    let keys = keygen(group, &mut fiu_rng);
    let sk = ExpElGamalSecret::with_params(keys, DEFAULT_RANGE_BOUND, DEFAULT_TABLE_BITS);
    let key_msg = Payload::new().with(FieldKind::PublicKey, sk.public().public_key().to_bytes());
    for inst in &net.institutions {
        bus.send(FIU, &inst.id, &key_msg)?;
    }
    bus.barrier();

    let mut schemes = Vec::new();
    let mut rngs = Vec::new();
    let mut state = Vec::new();
    for inst in &net.institutions {
        let msg = bus.recv(&inst.id, FIU)?;
        let mut r = msg.reader();
        let pk = PublicKey::from_bytes(r.next(FieldKind::PublicKey)?)?;
        r.finish()?;
        let scheme = ExpElGamal::with_bound(pk, DEFAULT_RANGE_BOUND);
        let mut rng = party_rng(seed, &inst.id);
        state.push(init_tags(inst, &net.seeds, &scheme, &mut rng)?);
        schemes.push(scheme);
        rngs.push(rng);
    }

    for _ in 0..net.iterations {
        for (i, inst) in net.institutions.iter().enumerate() {
            for m in build_partial_mappings(inst, &state[i], &schemes[i], &mut rngs[i])? {
                bus.send(&m.sender, &m.receiver, &m.to_payload(schemes[i].public_key()))?;
            }
        }
        bus.barrier();
        for (i, inst) in net.institutions.iter().enumerate() {
            let incoming = bus
                .recv_all(&inst.id)?
                .into_iter()
                .map(|(sender, p)| PartialMapping::from_payload(&sender, &inst.id, &p, schemes[i].public_key()))
                .collect::<Result<Vec<_>, _>>()?;
            state[i] = aggregate(inst, &state[i], &incoming, &schemes[i])?;
        }
    }

    for (i, inst) in net.institutions.iter().enumerate() {
        let mut p = Payload::new();
        for a in &inst.accounts {
            p.push(FieldKind::AccountId, a.as_bytes().to_vec());
            p.push(FieldKind::Ciphertext, schemes[i].ciphertext_to_bytes(&state[i].tags[a]));
        }
        bus.send(&inst.id, FIU, &p)?;
    }
    bus.barrier();

    let mut received = Vec::new();
    for inst in &net.institutions {
        let msg = bus.recv(FIU, &inst.id)?;
        let mut r = msg.reader();
        let mut tags = BTreeMap::new();
        for _ in 0..msg.len() / 2 {
            let a = account_id(r.next(FieldKind::AccountId)?)?;
            tags.insert(a, sk.public().ciphertext_from_bytes(r.next(FieldKind::Ciphertext)?)?);
        }
        r.finish()?;
        received.push(TagVector {
            institution: inst.id.clone(),
            tags,
        });
    }
    let dp = match net.dp {
        Some(spec) => Some((DpParams::counting(spec.epsilon)?, &mut fiu_rng)),
        None => None,
    };
    let revealed = reveal(&sk, &received, net.reveal, dp)?;
    // Report in network order rather than per-institution key order.
    let tags = net
        .accounts()
        .into_iter()
        .map(|(inst, acct)| {
            revealed
                .iter()
                .find(|t| t.institution == inst && t.account == acct)
                .cloned()
                .expect("every tagged account is revealed")
        })
        .collect();
    Ok(FinTracerResult {
        iterations: net.iterations,
        mode: net.reveal,
        dp_epsilon: net.dp.map(|d| d.epsilon),
        tags,
    })
}

pub fn scenario_digest(scenario: &Scenario) -> String {
    input_digest(scenario)
}

pub fn run(scenario: &Scenario, group: &GroupParams, seed: u64) -> Result<(FinTracerResult, Transcript), FinTracerError> {
    let net = scenario.validate()?;
    let mut bus = Bus::new(FINTRACER_PROTOCOL, seed, scenario_digest(scenario));
    let result = run_fintracer(&mut bus, group, &net)?;
    Ok((result, bus.finish()?))
}

/// Re-executes a recorded run and checks every message against the recording.
pub fn replay(transcript: &Transcript, scenario: &Scenario, group: &GroupParams) -> Result<FinTracerResult, FinTracerError> {
    let net = scenario.validate()?;
    let h = &transcript.header;
    if h.protocol != FINTRACER_PROTOCOL || h.input_digest != scenario_digest(scenario) {
        return Err(crate::harness::HarnessError::ReplayMismatch(
            "transcript was recorded for a different protocol or scenario".into(),
        )
        .into());
    }
    let mut bus = Bus::replaying(transcript.clone());
    let result = run_fintracer(&mut bus, group, &net)?;
    bus.finish()?;
    Ok(result)
}

/// Inter-party messages may hold only keys, ciphertexts and account ids;
/// seed accounts may appear only as edge endpoints.
pub fn audit_policy(net: &Network, transcript: &Transcript) -> AuditPolicy {
    let pk = transcript
        .messages()
        .first()
        .and_then(|m| Payload::decode(&m.payload).ok())
        .and_then(|p| p.reader().next(FieldKind::PublicKey).ok().map(<[u8]>::to_vec))
        .and_then(|b| PublicKey::from_bytes(&b).ok());
    AuditPolicy::new(
        FINTRACER_PROTOCOL,
        &[FieldKind::PublicKey, FieldKind::Ciphertext, FieldKind::AccountId],
    )
    .protect(
        net.seeds
            .iter()
            .map(|(_, a)| ProtectedValue::text("seed account", a).exempt_in(FieldKind::AccountId)),
    )
    .validate_with(Validators {
        elgamal: pk,
        ..Validators::default()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fintracer::ndis_scenario;
    use crate::harness::audit;

    fn counts(k: u32) -> Vec<i64> {
        let mut s = ndis_scenario();
        s.iterations = k;
        run(&s, &GroupParams::reference(), 1).unwrap().0.counts()
    }

    #[test]
    fn worked_example_iterations() {
        assert_eq!(counts(0), vec![1, 0, 0, 0, 0, 0]);
        assert_eq!(counts(1), vec![1, 1, 1, 0, 0, 0]);
        assert_eq!(counts(2), vec![1, 2, 2, 1, 1, 0]);
        assert_eq!(counts(3), vec![1, 3, 3, 3, 3, 2]);
    }

    #[test]
    fn nonzero_reveal_and_audit() {
        let mut s = ndis_scenario();
        s.reveal = RevealMode::Nonzero;
        let grp = GroupParams::reference();
        let (r, t) = run(&s, &grp, 5).unwrap();
        assert!(r.tags.iter().all(|t| t.value == RevealedValue::Reached(true)));
        // 4 key messages, 3 rounds of 3 mappings, 4 reveals.
        assert_eq!(t.len(), 4 + 3 * 3 + 4);
        assert_eq!(t.rounds(), 5);
        let report = audit(&t, &audit_policy(&s.validate().unwrap(), &t));
        assert!(report.passed(), "{:?}", report.violations);
    }

    #[test]
    fn no_seeds_means_nothing_reached() {
        let mut s = ndis_scenario();
        s.seeds = crate::fintracer::SeedSpec::Accounts(vec![]);
        s.reveal = RevealMode::Nonzero;
        let (r, _) = run(&s, &GroupParams::reference(), 1).unwrap();
        assert!(r.tags.iter().all(|t| !t.value.reached()));
    }

    #[test]
    fn forwarded_tags_are_rerandomized() {
        let grp = GroupParams::reference();
        let keys = keygen(&grp, &mut rng::seeded(1));
        let sk = ExpElGamalSecret::new(keys);
        let net = ndis_scenario().validate().unwrap();
        let a = net.institution("A").unwrap();
        let mut r = rng::seeded(2);
        let tags = init_tags(a, &net.seeds, sk.public(), &mut r).unwrap();
        let maps = build_partial_mappings(a, &tags, sk.public(), &mut r).unwrap();
        assert_eq!(maps.len(), 1);
        assert_eq!(maps[0].receiver, "B");
        let stored = &tags.tags["a1"];
        for (src, _, ct) in &maps[0].entries {
            assert_eq!(src, "a1");
            assert_ne!(ct, stored);
            assert_eq!(sk.decrypt(ct).unwrap(), 1);
        }
        let d = net.institution("D").unwrap();
        let d_tags = init_tags(d, &net.seeds, sk.public(), &mut r).unwrap();
        assert!(build_partial_mappings(d, &d_tags, sk.public(), &mut r).unwrap().is_empty());
        assert_eq!(aggregate(d, &d_tags, &[], sk.public()).unwrap(), d_tags);
    }

    #[test]
    fn dp_noise_changes_exact_counts_only_by_integers() {
        let mut s = ndis_scenario();
        s.dp = Some(crate::fintracer::DpSpec { epsilon: 0.5 });
        let (r, _) = run(&s, &GroupParams::reference(), 3).unwrap();
        assert_eq!(r.dp_epsilon, Some(0.5));
        assert_eq!(r.counts().len(), 6);
        let (again, _) = run(&s, &GroupParams::reference(), 3).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn replay_checks() {
        let grp = GroupParams::reference();
        let s = ndis_scenario();
        let (r, t) = run(&s, &grp, 8).unwrap();
        assert_eq!(replay(&t, &s, &grp).unwrap(), r);
        assert!(matches!(
            replay(&t.truncated(t.len() - 1), &s, &grp),
            Err(FinTracerError::Harness(crate::harness::HarnessError::IncompleteReplay { .. }))
        ));
        let mut other = s.clone();
        other.iterations = 2;
        assert!(matches!(
            replay(&t, &other, &grp),
            Err(FinTracerError::Harness(crate::harness::HarnessError::ReplayMismatch(_)))
        ));
    }
}
