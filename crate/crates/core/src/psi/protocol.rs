use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use num_bigint::BigUint;
use rand::seq::SliceRandom;
use serde_json::json;

use super::commutative::CommutativeKey;
use super::encoding::{id_to_field, one_encoding, zero_encoding};
use super::polynomial::{EncPolynomial, RootPolynomial};
use super::PsiError;
use crate::harness::{input_digest, Bus, FieldKind, Payload, Transcript, FIU};
use crate::he::{keygen, GroupParams, PublicKey};
use crate::rng;

pub const PSI_PROTOCOL: &str = "psi";
pub const PSI_CA_PROTOCOL: &str = "psi-ca";
pub const COMPARE_PROTOCOL: &str = "compare";

pub const RE: &str = "re";
pub const PARTY_A: &str = "a";
pub const PARTY_B: &str = "b";

#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize)]
pub struct PsiResult {
    /// SPL entries held by the reporting entity, in SPL order.
    pub matches: Vec<String>,
    /// Number of evaluated ciphertexts the FIU received.
    pub evaluated: usize,
}

/// Keeps the first identifier for each distinct field element.
fn distinct_fields(ids: &[String], q: &BigUint) -> Vec<(String, BigUint)> {
    let mut seen = HashSet::new();
    ids.iter()
        .map(|id| (id.clone(), id_to_field(id, q)))
        .filter(|(_, f)| seen.insert(f.clone()))
        .collect()
}

/// Polynomial-evaluation PSI: the FIU learns which SPL entries the
/// reporting entity holds, and nothing about the RE's other customers.
///
/// 1. FIU encrypts the coefficients of `∏ (x - s_i)` and sends them with its
///    public key.
/// 2. RE returns `Enc(r f(d) + d)` for every customer `d`, each with a fresh
///    nonzero `r`, rerandomized and shuffled.
/// 3. FIU decrypts to `g^(r f(d) + d)` and matches against `{ g^(s_i) }`.
pub fn run_psi(bus: &mut Bus, group: &GroupParams, spl: &[String], customers: &[String]) -> Result<PsiResult, PsiError> {
    let seed = bus.seed();
    let q = group.order();

    // FIU: encrypt the root polynomial.
    let mut fiu_rng = rng::derive(seed, "psi/fiu");
    let keys = keygen(group, &mut fiu_rng);
    let spl_fields = distinct_fields(spl, q);
    let roots: Vec<BigUint> = spl_fields.iter().map(|(_, f)| f.clone()).collect();
    let poly = RootPolynomial::from_roots(&roots, q)?;
    let enc = EncPolynomial::encrypt(keys.public(), &poly, &mut fiu_rng);
    let mut query = Payload::new().with(FieldKind::PublicKey, keys.public().to_bytes());
    for c in enc.ciphertexts() {
        query.push(FieldKind::Ciphertext, keys.public().ciphertext_to_bytes(c));
    }
    bus.send(FIU, RE, &query)?;
    bus.barrier();

    // RE: evaluate at every customer.
    let mut re_rng = rng::derive(seed, "psi/re");
    let msg = bus.recv(RE, FIU)?;
    let mut reader = msg.reader();
    let pk = PublicKey::from_bytes(reader.next(FieldKind::PublicKey)?)?;
    let coeffs = reader
        .all(FieldKind::Ciphertext)
        .into_iter()
        .map(|b| pk.ciphertext_from_bytes(b))
        .collect::<Result<Vec<_>, _>>()?;
    reader.finish()?;
    let enc = EncPolynomial::from_ciphertexts(coeffs)?;
    let re_q = pk.params().order().clone();
    let mut evaluated = Vec::new();
    for (_, d) in distinct_fields(customers, &re_q) {
        let r = pk.params().random_scalar(&mut re_rng);
        let ct = enc.eval(&pk, &d, &r)?;
        evaluated.push(pk.rerandomize(&ct, &mut re_rng));
    }
    evaluated.shuffle(&mut re_rng);
    let mut reply = Payload::new();
    for c in &evaluated {
        reply.push(FieldKind::Ciphertext, pk.ciphertext_to_bytes(c));
    }
    bus.send(RE, FIU, &reply)?;
    bus.barrier();

    // FIU: decrypt and match group elements, no discrete logs needed.
    let lookup: HashMap<BigUint, &BigUint> = spl_fields.iter().map(|(_, f)| (group.exp_g(f), f)).collect();
    let msg = bus.recv(FIU, RE)?;
    let mut reader = msg.reader();
    let mut hits = HashSet::new();
    let outputs = reader.all(FieldKind::Ciphertext);
    reader.finish()?;
    for bytes in &outputs {
        let ct = keys.public().ciphertext_from_bytes(bytes)?;
        if let Some(f) = lookup.get(&keys.decrypt_mul(&ct)?) {
            hits.insert((*f).clone());
        }
    }
    let matches = spl_fields
        .into_iter()
        .filter(|(_, f)| hits.contains(f))
        .map(|(id, _)| id)
        .collect();
    Ok(PsiResult {
        matches,
        evaluated: outputs.len(),
    })
}

fn element_payload(group: &GroupParams, elems: &[BigUint]) -> Payload {
    let mut p = Payload::new();
    for e in elems {
        p.push(FieldKind::GroupElement, group.element_to_bytes(e));
    }
    p
}

fn read_elements(group: &GroupParams, p: &Payload) -> Result<Vec<BigUint>, PsiError> {
    let mut reader = p.reader();
    let out = reader
        .all(FieldKind::GroupElement)
        .into_iter()
        .map(|b| group.element_from_bytes(b))
        .collect::<Result<Vec<_>, _>>()?;
    reader.finish()?;
    Ok(out)
}

fn encrypt_shuffled<R: rand::RngCore + rand::CryptoRng>(
    key: &CommutativeKey,
    elems: &[BigUint],
    rng: &mut R,
) -> Result<Vec<BigUint>, PsiError> {
    let mut out = elems.iter().map(|x| key.apply(x)).collect::<Result<Vec<_>, _>>()?;
    out.shuffle(rng);
    Ok(out)
}

/// Double-encryption PSI-CA between `a` and `b`; only `a` learns the count.
///
/// Both sides hash their items into the group and encrypt with their own
/// commutative key. `b` re-encrypts `a`'s items and returns them shuffled, so
/// `a` can count matches against `f_a(f_b(S_b))` without linking them to items.
pub fn psi_ca_exchange(
    bus: &mut Bus,
    group: &Arc<GroupParams>,
    a: &str,
    b: &str,
    set_a: &[String],
    set_b: &[String],
) -> Result<usize, PsiError> {
    let seed = bus.seed();
    let hash_all = |set: &[String]| {
        let mut seen = HashSet::new();
        set.iter()
            .filter(|s| seen.insert(*s))
            .map(|s| group.hash_to_group(s.as_bytes()))
            .collect::<Vec<_>>()
    };
    let mut rng_a = rng::derive(seed, &format!("{}/{a}", bus.protocol()));
    let mut rng_b = rng::derive(seed, &format!("{}/{b}", bus.protocol()));
    let key_a = CommutativeKey::generate(group.clone(), &mut rng_a);
    let key_b = CommutativeKey::generate(group.clone(), &mut rng_b);

    let once_a = encrypt_shuffled(&key_a, &hash_all(set_a), &mut rng_a)?;
    bus.send(a, b, &element_payload(group, &once_a))?;
    let once_b = encrypt_shuffled(&key_b, &hash_all(set_b), &mut rng_b)?;
    bus.send(b, a, &element_payload(group, &once_b))?;
    bus.barrier();

    let from_a = read_elements(group, &bus.recv(b, a)?)?;
    let twice_a = encrypt_shuffled(&key_b, &from_a, &mut rng_b)?;
    bus.send(b, a, &element_payload(group, &twice_a))?;
    bus.barrier();

    let from_b = read_elements(group, &bus.recv(a, b)?)?;
    let twice_b: HashSet<BigUint> = from_b.iter().map(|x| key_a.apply(x)).collect::<Result<_, _>>()?;
    let twice_a = read_elements(group, &bus.recv(a, b)?)?;
    Ok(twice_a.iter().filter(|x| twice_b.contains(*x)).count())
}

/// Private `x > y`: `a` holds `x`, `b` holds `y`, and `a` learns whether the
/// one-encoding of `x` meets the zero-encoding of `y`.
pub fn greater_than_exchange(bus: &mut Bus, group: &Arc<GroupParams>, x: u64, y: u64, bits: u32) -> Result<bool, PsiError> {
    let ones = one_encoding(x, bits)?;
    let zeros = zero_encoding(y, bits)?;
    Ok(psi_ca_exchange(bus, group, PARTY_A, PARTY_B, &ones, &zeros)? > 0)
}

fn group_hex(group: &GroupParams) -> String {
    hex::encode(group.to_bytes())
}

pub fn psi_digest(group: &GroupParams, spl: &[String], customers: &[String]) -> String {
    input_digest(&json!({ "group": group_hex(group), "spl": spl, "customers": customers }))
}

pub fn psi_ca_digest(group: &GroupParams, set_a: &[String], set_b: &[String]) -> String {
    input_digest(&json!({ "group": group_hex(group), "a": set_a, "b": set_b }))
}

pub fn compare_digest(group: &GroupParams, x: u64, y: u64, bits: u32) -> String {
    input_digest(&json!({ "group": group_hex(group), "x": x, "y": y, "bits": bits }))
}

pub fn psi_run(group: &GroupParams, spl: &[String], customers: &[String], seed: u64) -> Result<(PsiResult, Transcript), PsiError> {
    let mut bus = Bus::new(PSI_PROTOCOL, seed, psi_digest(group, spl, customers));
    let result = run_psi(&mut bus, group, spl, customers)?;
    Ok((result, bus.finish()?))
}

pub fn psi_ca(group: &Arc<GroupParams>, set_a: &[String], set_b: &[String], seed: u64) -> Result<(usize, Transcript), PsiError> {
    let mut bus = Bus::new(PSI_CA_PROTOCOL, seed, psi_ca_digest(group, set_a, set_b));
    let n = psi_ca_exchange(&mut bus, group, PARTY_A, PARTY_B, set_a, set_b)?;
    Ok((n, bus.finish()?))
}

pub fn private_greater_than(
    group: &Arc<GroupParams>,
    x: u64,
    y: u64,
    bits: u32,
    seed: u64,
) -> Result<(bool, Transcript), PsiError> {
    let mut bus = Bus::new(COMPARE_PROTOCOL, seed, compare_digest(group, x, y, bits));
    let gt = greater_than_exchange(&mut bus, group, x, y, bits)?;
    Ok((gt, bus.finish()?))
}
