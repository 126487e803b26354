use std::collections::BTreeSet;

use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};

use super::data::{LabelSet, PartyDataset, WeightsPartition};
use super::FedError;
use crate::harness::{
    decode_flag, decode_reals, encode_reals, input_digest, AuditPolicy, Bus, FieldKind, Payload, ProtectedValue,
    Transcript, Validators, FIU,
};
use crate::he::{
    keygen, AdditiveDecrypt, AdditiveHe, ExpElGamalSecret, FixedPointParams, GroupParams, PaillierKeyPair,
    PaillierPublicKey, PublicKey, SchemeKind,
};
use crate::rng;

pub const FEDLR_PROTOCOL: &str = "fedlr";

/// Loss increases in a row that abort training.
pub const DIVERGENCE_PATIENCE: usize = 5;

fn default_max_iterations() -> u32 {
    10_000
}

fn default_tolerance() -> f64 {
    1e-6
}

fn default_scheme() -> SchemeKind {
    SchemeKind::Paillier
}

fn default_key_bits() -> usize {
    1024
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: u32,
    /// Stop once no weight moves by this much in an iteration.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_scheme")]
    pub scheme: SchemeKind,
    /// Paillier modulus size; ignored for exp-ElGamal.
    #[serde(default = "default_key_bits")]
    pub key_bits: usize,
    #[serde(default)]
    pub fixed_point: FixedPointParams,
    /// Keep the full weight vector after every iteration in the result.
    #[serde(default)]
    pub record_trajectory: bool,
}

impl TrainConfig {
    pub fn new(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            max_iterations: default_max_iterations(),
            tolerance: default_tolerance(),
            seed: 0,
            scheme: default_scheme(),
            key_bits: default_key_bits(),
            fixed_point: FixedPointParams::default(),
            record_trajectory: false,
        }
    }

    pub fn validate(&self) -> Result<(), FedError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(FedError::Config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if !(self.tolerance > 0.0) {
            return Err(FedError::Config(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if self.max_iterations == 0 {
            return Err(FedError::Config("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainResult {
    pub weights: Vec<WeightsPartition>,
    /// Mean squared error of the model entering each iteration.
    pub loss: Vec<f64>,
    pub iterations: u32,
    pub converged: bool,
    /// Concatenated weights at the start and after each iteration, when requested.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub trajectory: Vec<Vec<f64>>,
}

impl TrainResult {
    /// All parties' weights in party order.
    pub fn concatenated(&self) -> Vec<f64> {
        self.weights.iter().flat_map(|w| w.weights.iter().copied()).collect()
    }

    /// Whether no loss exceeds its predecessor by more than `slack`.
    pub fn loss_non_increasing(&self, slack: f64) -> bool {
        self.loss.windows(2).all(|w| w[1] <= w[0] + slack)
    }
}

/// Adds this party's fixed-point encoded predictions to the running sums.
pub fn add_partial<H: AdditiveHe, R: RngCore + CryptoRng>(
    pk: &H,
    fp: &FixedPointParams,
    running: Option<Vec<H::Ciphertext>>,
    partial: &[f64],
    rng: &mut R,
) -> Result<Vec<H::Ciphertext>, FedError> {
    let own = partial
        .iter()
        .map(|v| Ok(pk.encrypt(fp.encode(*v)?, rng)?))
        .collect::<Result<Vec<_>, FedError>>()?;
    match running {
        None => Ok(own),
        Some(acc) => {
            if acc.len() != own.len() {
                return Err(FedError::Dimension(format!(
                    "running sum has {} entries, partial predictions {}",
                    acc.len(),
                    own.len()
                )));
            }
            acc.iter().zip(&own).map(|(a, b)| Ok(pk.add(a, b)?)).collect()
        }
    }
}

/// Chains [`add_partial`] over every party's predictions in order.
pub fn encrypted_round_robin<H: AdditiveHe, R: RngCore + CryptoRng>(
    pk: &H,
    fp: &FixedPointParams,
    partials: &[Vec<f64>],
    rng: &mut R,
) -> Result<Vec<H::Ciphertext>, FedError> {
    let mut running = None;
    for p in partials {
        running = Some(add_partial(pk, fp, running, p, rng)?);
    }
    running.ok_or_else(|| FedError::Config("no parties".into()))
}

/// `E = Dec(total) - Y`, decoded from fixed point.
pub fn residual<D: AdditiveDecrypt>(
    sk: &D,
    fp: &FixedPointParams,
    total: &[<D::Public as AdditiveHe>::Ciphertext],
    labels: &LabelSet,
) -> Result<Vec<f64>, FedError> {
    if total.len() != labels.len() {
        return Err(FedError::Dimension(format!(
            "{} predictions for {} labels",
            total.len(),
            labels.len()
        )));
    }
    total
        .iter()
        .zip(&labels.values)
        .map(|(c, y)| Ok(fp.decode(sk.decrypt(c)?) - y))
        .collect()
}

fn check_inputs(parties: &[PartyDataset], labels: &LabelSet, cfg: &TrainConfig) -> Result<(), FedError> {
    cfg.validate()?;
    if parties.is_empty() {
        return Err(FedError::Config("no parties".into()));
    }
    let mut ids = BTreeSet::new();
    for p in parties {
        if p.party == FIU || !ids.insert(p.party.as_str()) {
            return Err(FedError::Config(format!("party id {:?} is reserved or repeated", p.party)));
        }
        if p.rows() != labels.len() {
            return Err(FedError::Dimension(format!(
                "party {} has {} rows but there are {} labels",
                p.party,
                p.rows(),
                labels.len()
            )));
        }
    }
    if labels.is_empty() {
        return Err(FedError::Data("no training rows".into()));
    }
    Ok(())
}

fn ciphertext_payload<H: AdditiveHe>(pk: &H, cts: &[H::Ciphertext]) -> Payload {
    let mut p = Payload::new();
    for c in cts {
        p.push(FieldKind::Ciphertext, pk.ciphertext_to_bytes(c));
    }
    p
}

fn read_ciphertexts<H: AdditiveHe>(pk: &H, p: &Payload) -> Result<Vec<H::Ciphertext>, FedError> {
    let mut r = p.reader();
    let cts = r
        .all(FieldKind::Ciphertext)
        .into_iter()
        .map(|b| pk.ciphertext_from_bytes(b))
        .collect::<Result<Vec<_>, _>>()?;
    r.finish()?;
    Ok(cts)
}

fn read_flag(p: &Payload) -> Result<bool, FedError> {
    let mut r = p.reader();
    let f = decode_flag(r.next(FieldKind::Flag)?)?;
    r.finish()?;
    Ok(f)
}

/// Trains over `bus` with the scheme named in `cfg`.
///
/// Each iteration the parties pass running prediction sums along the chain
/// `parties[0] -> ... -> parties[p-1] -> FIU`, the FIU broadcasts the
/// plaintext residuals, every party updates its own weights and reports
/// whether it moved less than the tolerance, and the FIU broadcasts whether
/// to stop.
pub fn run_fedlr(
    bus: &mut Bus,
    parties: &[PartyDataset],
    labels: &LabelSet,
    cfg: &TrainConfig,
) -> Result<TrainResult, FedError> {
    check_inputs(parties, labels, cfg)?;
    let mut fiu_rng = rng::derive(bus.seed(), &format!("{FEDLR_PROTOCOL}/{FIU}"));
    match cfg.scheme {
        SchemeKind::Paillier => {
            let sk = PaillierKeyPair::generate(cfg.key_bits, &mut fiu_rng)?;
            train_with(bus, &sk, parties, labels, cfg)
        }
        SchemeKind::ExpElGamal => {
            let sk = ExpElGamalSecret::new(keygen(&GroupParams::reference(), &mut fiu_rng));
            train_with(bus, &sk, parties, labels, cfg)
        }
    }
}

fn train_with<D: AdditiveDecrypt>(
    bus: &mut Bus,
    sk: &D,
    parties: &[PartyDataset],
    labels: &LabelSet,
    cfg: &TrainConfig,
) -> Result<TrainResult, FedError> {
    let seed = bus.seed();
    let key_msg = Payload::new().with(FieldKind::PublicKey, sk.public().public_key_bytes());
    for p in parties {
        bus.send(FIU, &p.party, &key_msg)?;
    }
    bus.barrier();

    let mut keys = Vec::new();
    let mut rngs = Vec::new();
    let mut weights = Vec::new();
    for p in parties {
        let msg = bus.recv(&p.party, FIU)?;
        let mut r = msg.reader();
        keys.push(D::Public::from_public_key_bytes(r.next(FieldKind::PublicKey)?)?);
        r.finish()?;
        let mut rng = rng::derive(seed, &format!("{FEDLR_PROTOCOL}/{}", p.party));
        weights.push(WeightsPartition::random(
            &p.party,
            p.cols(),
            cfg.learning_rate,
            cfg.fixed_point,
            &mut rng,
        ));
        rngs.push(rng);
    }

    let fp = &cfg.fixed_point;
    let mut loss = Vec::new();
    let mut trajectory = Vec::new();
    if cfg.record_trajectory {
        trajectory.push(weights.iter().flat_map(|w| w.weights.iter().copied()).collect());
    }
    let mut rises = 0;
    let mut converged = false;
    for t in 0..cfg.max_iterations {
        for i in 0..parties.len() {
            let running = if i == 0 {
                None
            } else {
                let msg = bus.recv(&parties[i].party, &parties[i - 1].party)?;
                Some(read_ciphertexts(&keys[i], &msg)?)
            };
            let partial = weights[i].partial_predictions(&parties[i])?;
            let sums = add_partial(&keys[i], fp, running, &partial, &mut rngs[i])?;
            let next = parties.get(i + 1).map_or(FIU, |p| p.party.as_str());
            bus.send(&parties[i].party, next, &ciphertext_payload(&keys[i], &sums))?;
            bus.barrier();
        }

        let last = &parties[parties.len() - 1].party;
        let total = read_ciphertexts(sk.public(), &bus.recv(FIU, last)?)?;
        let e = residual(sk, fp, &total, labels)?;
        let mse = e.iter().map(|v| v * v).sum::<f64>() / e.len() as f64;
        if loss.last().is_some_and(|prev| mse > *prev) {
            rises += 1;
        } else {
            rises = 0;
        }
        loss.push(mse);
        let e_msg = Payload::new().with(FieldKind::Residual, encode_reals(&e));
        for p in parties {
            bus.send(FIU, &p.party, &e_msg)?;
        }
        bus.barrier();

        for (i, p) in parties.iter().enumerate() {
            let msg = bus.recv(&p.party, FIU)?;
            let mut r = msg.reader();
            let e = decode_reals(r.next(FieldKind::Residual)?)?;
            r.finish()?;
            let step = weights[i].update(p, &e)?;
            let done = Payload::new().with(FieldKind::Flag, vec![u8::from(step < cfg.tolerance)]);
            bus.send(&p.party, FIU, &done)?;
        }
        bus.barrier();
        if cfg.record_trajectory {
            trajectory.push(weights.iter().flat_map(|w| w.weights.iter().copied()).collect());
        }

        let mut all_done = true;
        for p in parties {
            all_done &= read_flag(&bus.recv(FIU, &p.party)?)?;
        }
        let diverged = rises >= DIVERGENCE_PATIENCE;
        let stop = all_done || diverged || t + 1 == cfg.max_iterations;
        let stop_msg = Payload::new().with(FieldKind::Flag, vec![u8::from(stop)]);
        for p in parties {
            bus.send(FIU, &p.party, &stop_msg)?;
        }
        bus.barrier();
        for p in parties {
            read_flag(&bus.recv(&p.party, FIU)?)?;
        }
        if diverged {
            return Err(FedError::Diverged {
                iteration: t,
                recent_loss: loss[loss.len() - DIVERGENCE_PATIENCE - 1..].to_vec(),
            });
        }
        if stop {
            converged = all_done;
            break;
        }
    }

    Ok(TrainResult {
        iterations: loss.len() as u32,
        weights,
        loss,
        converged,
        trajectory,
    })
}

/// What the whole input to a run hashes to; binds transcripts to their data.
#[derive(Serialize)]
struct RunInput<'a> {
    parties: Vec<(&'a str, &'a [String], Vec<&'a [f64]>)>,
    labels: &'a [f64],
    config: &'a TrainConfig,
}

pub fn run_digest(parties: &[PartyDataset], labels: &LabelSet, cfg: &TrainConfig) -> String {
    input_digest(&RunInput {
        parties: parties
            .iter()
            .map(|p| (p.party.as_str(), p.columns.as_slice(), (0..p.rows()).map(|l| p.row(l)).collect()))
            .collect(),
        labels: &labels.values,
        config: cfg,
    })
}

/// Trains with a fresh bus seeded from `cfg.seed`.
pub fn train(
    parties: &[PartyDataset],
    labels: &LabelSet,
    cfg: &TrainConfig,
) -> Result<(TrainResult, Transcript), FedError> {
    let mut bus = Bus::new(FEDLR_PROTOCOL, cfg.seed, run_digest(parties, labels, cfg));
    let result = run_fedlr(&mut bus, parties, labels, cfg)?;
    Ok((result, bus.finish()?))
}

pub fn replay(
    transcript: &Transcript,
    parties: &[PartyDataset],
    labels: &LabelSet,
    cfg: &TrainConfig,
) -> Result<TrainResult, FedError> {
    let h = &transcript.header;
    if h.protocol != FEDLR_PROTOCOL || h.seed != cfg.seed || h.input_digest != run_digest(parties, labels, cfg) {
        return Err(crate::harness::HarnessError::ReplayMismatch(
            "transcript was recorded for a different protocol, seed or input".into(),
        )
        .into());
    }
    let mut bus = Bus::replaying(transcript.clone());
    let result = run_fedlr(&mut bus, parties, labels, cfg)?;
    bus.finish()?;
    Ok(result)
}

/// Only keys, ciphertexts, residuals and stop flags may cross; no feature
/// value or label may appear in any encoding.
pub fn audit_policy(parties: &[PartyDataset], labels: &LabelSet, transcript: &Transcript) -> AuditPolicy {
    let key = transcript
        .messages()
        .first()
        .and_then(|m| Payload::decode(&m.payload).ok())
        .and_then(|p| p.reader().next(FieldKind::PublicKey).ok().map(<[u8]>::to_vec));
    let validators = Validators {
        paillier: key.as_deref().and_then(|b| PaillierPublicKey::from_bytes(b).ok()),
        elgamal: key.as_deref().and_then(|b| PublicKey::from_bytes(b).ok()),
        ..Validators::default()
    };
    let features = parties.iter().flat_map(|p| {
        (0..p.rows()).flat_map(move |l| {
            p.row(l)
                .iter()
                .map(move |v| ProtectedValue::real(&format!("feature of {}", p.party), *v))
        })
    });
    let ys = labels.values.iter().map(|y| ProtectedValue::real("label", *y));
    AuditPolicy::new(
        FEDLR_PROTOCOL,
        &[FieldKind::PublicKey, FieldKind::Ciphertext, FieldKind::Residual, FieldKind::Flag],
    )
    .protect(features.chain(ys))
    .validate_with(validators)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::audit;
    use crate::he::ExpElGamal;

    fn paillier() -> PaillierKeyPair {
        PaillierKeyPair::generate(512, &mut rng::seeded(4)).unwrap()
    }

    #[test]
    fn round_robin_sums() {
        let sk = paillier();
        let fp = FixedPointParams::default();
        let mut r = rng::seeded(1);
        let one = encrypted_round_robin(sk.public(), &fp, &[vec![1.5, -2.0]], &mut r).unwrap();
        let dec: Vec<i64> = one.iter().map(|c| sk.decrypt_i64(c).unwrap()).collect();
        assert_eq!(dec, vec![fp.encode(1.5).unwrap(), fp.encode(-2.0).unwrap()]);
        let parts = [vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]];
        let total = encrypted_round_robin(sk.public(), &fp, &parts, &mut r).unwrap();
        let dec: Vec<i64> = total.iter().map(|c| sk.decrypt_i64(c).unwrap()).collect();
        assert_eq!(dec, vec![9 << 16, 12 << 16]);
        assert!(matches!(
            encrypted_round_robin(sk.public(), &fp, &[vec![2e6]], &mut r),
            Err(FedError::He(_))
        ));
    }

    #[test]
    fn residual_arithmetic_and_rounding() {
        let sk = paillier();
        let fp = FixedPointParams::default();
        let mut r = rng::seeded(2);
        let total = encrypted_round_robin(sk.public(), &fp, &[vec![9.0, 12.0]], &mut r).unwrap();
        let labels = LabelSet::new(vec![10.0, 10.0]).unwrap();
        assert_eq!(residual(&sk, &fp, &total, &labels).unwrap(), vec![-1.0, 2.0]);
        let exact = LabelSet::new(vec![9.0, 12.0]).unwrap();
        assert_eq!(residual(&sk, &fp, &total, &exact).unwrap(), vec![0.0, 0.0]);
        // Three parties each round once, so the error is at most 3 half-ulps.
        let parts = [vec![0.123456789], vec![-3.3333333], vec![7.77777777]];
        let total = encrypted_round_robin(sk.public(), &fp, &parts, &mut r).unwrap();
        let truth: f64 = parts.iter().map(|p| p[0]).sum();
        let e = residual(&sk, &fp, &total, &LabelSet::new(vec![truth]).unwrap()).unwrap();
        assert!(e[0].abs() <= 3.0 * 0.5 / fp.scale());
    }

    #[test]
    fn exp_elgamal_backend_decodes_small_sums() {
        let sk = ExpElGamalSecret::new(keygen(&GroupParams::reference(), &mut rng::seeded(3)));
        let fp = FixedPointParams {
            scale_bits: 8,
            magnitude_bound: 100.0,
        };
        let pk: &ExpElGamal = sk.public();
        let total = encrypted_round_robin(pk, &fp, &[vec![1.0], vec![2.5]], &mut rng::seeded(5)).unwrap();
        let e = residual(&sk, &fp, &total, &LabelSet::new(vec![3.0]).unwrap()).unwrap();
        assert_eq!(e, vec![0.5]);
    }

    fn toy() -> (Vec<PartyDataset>, LabelSet) {
        let rows: Vec<Vec<f64>> = (0..12).map(|l| vec![l as f64, ((l * 7) % 5) as f64]).collect();
        let mut a = PartyDataset::new("a", vec!["x0".into()], &rows.iter().map(|r| vec![r[0]]).collect::<Vec<_>>()).unwrap();
        let mut b = PartyDataset::new("b", vec!["x1".into()], &rows.iter().map(|r| vec![r[1]]).collect::<Vec<_>>()).unwrap();
        a.standardize().unwrap();
        b.standardize().unwrap();
        let y = (0..12).map(|l| 2.0 * a.get(l, 0) - b.get(l, 0)).collect();
        (vec![a, b], LabelSet::new(y).unwrap())
    }

    fn cfg() -> TrainConfig {
        TrainConfig {
            key_bits: 512,
            tolerance: 1e-5,
            seed: 11,
            ..TrainConfig::new(0.5)
        }
    }

    #[test]
    fn trains_audits_and_replays() {
        let (parties, labels) = toy();
        let (res, t) = train(&parties, &labels, &cfg()).unwrap();
        assert!(res.converged);
        let w = res.concatenated();
        assert!((w[0] - 2.0).abs() < 1e-3 && (w[1] + 1.0).abs() < 1e-3, "{w:?}");
        assert!(res.loss_non_increasing(1e-9));
        let rounds_per_iter = parties.len() as u32 + 3;
        assert_eq!(t.rounds(), 1 + rounds_per_iter * res.iterations);
        let report = audit(&t, &audit_policy(&parties, &labels, &t));
        assert!(report.passed(), "{:?}", report.violations);
        assert_eq!(replay(&t, &parties, &labels, &cfg()).unwrap(), res);
        let (_, again) = train(&parties, &labels, &cfg()).unwrap();
        assert_eq!(again.to_jsonl(), t.to_jsonl());
    }

    #[test]
    fn divergence_is_detected() {
        let (parties, labels) = toy();
        let bad = TrainConfig {
            learning_rate: 5.0,
            ..cfg()
        };
        match train(&parties, &labels, &bad) {
            Err(FedError::Diverged { recent_loss, .. }) => {
                assert_eq!(recent_loss.len(), DIVERGENCE_PATIENCE + 1);
                assert!(recent_loss.windows(2).all(|w| w[1] > w[0]));
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn config_and_input_checks() {
        let (parties, labels) = toy();
        for bad in [
            TrainConfig { learning_rate: 0.0, ..cfg() },
            TrainConfig { tolerance: -1.0, ..cfg() },
            TrainConfig { max_iterations: 0, ..cfg() },
        ] {
            assert!(matches!(train(&parties, &labels, &bad), Err(FedError::Config(_))));
        }
        let short = LabelSet::new(vec![1.0]).unwrap();
        assert!(matches!(train(&parties, &short, &cfg()), Err(FedError::Dimension(_))));
        let dup = vec![parties[0].clone(), parties[0].clone()];
        assert!(matches!(train(&dup, &labels, &cfg()), Err(FedError::Config(_))));
        let json = r#"{"learning_rate": 0.1}"#;
        let parsed: TrainConfig = serde_json::from_str(json).unwrap();
        assert_eq!(parsed, TrainConfig::new(0.1));
        assert!(serde_json::from_str::<TrainConfig>(r#"{"learning_rate": 0.1, "alpha": 1}"#).is_err());
    }
}
