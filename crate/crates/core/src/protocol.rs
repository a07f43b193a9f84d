//! The six-step transmission protocol as an explicit sequence of events over
//! a public classical channel and a single-use quantum channel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attacks::{apply_attack, AttackSpec, EveRecord};
use crate::cipher::{
    self, attach_signature, decrypt_final, decrypt_unmask, encrypt, entangle_pairs, sample_basis_mask,
    sample_pauli_key, sample_signature, verify_signature, BasisMask, Ciphertext, PauliKey, Signature,
};
use crate::error::{Error, Result};
use crate::qcore::{fidelity, gates, QuantumState};

/// Largest payload a protocol run accepts: the arrival check needs one
/// ancilla beside the `2n` transmitted qubits.
pub const MAX_PROTOCOL_QUBITS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Party {
    Alice,
    Bob,
    Eve,
}

/// Payload of a classical message. Passwords travel as hex strings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "message", rename_all = "snake_case")]
pub enum Message {
    ArrivalReport { arrived: bool },
    MaskDisclosure { mask: String },
    SignatureReport { bits: Vec<u8> },
    SignatureConfirmed,
    KeyDisclosure { key: String },
    Abort { reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalRecord {
    pub sender: Party,
    #[serde(flatten)]
    pub message: Message,
}

/// Public, tamper-proof, append-only log readable by everyone.
#[derive(Clone, Debug, Default)]
pub struct ClassicalChannel {
    log: Vec<ClassicalRecord>,
}

impl ClassicalChannel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn send(&mut self, sender: Party, message: Message) {
        self.log.push(ClassicalRecord { sender, message });
    }

    pub fn records(&self) -> &[ClassicalRecord] {
        &self.log
    }

    /// Last disclosed mask, if any.
    pub fn disclosed_mask(&self) -> Option<&str> {
        self.log.iter().rev().find_map(|r| match &r.message {
            Message::MaskDisclosure { mask } => Some(mask.as_str()),
            _ => None,
        })
    }

    pub fn disclosed_key(&self) -> Option<&str> {
        self.log.iter().rev().find_map(|r| match &r.message {
            Message::KeyDisclosure { key } => Some(key.as_str()),
            _ => None,
        })
    }

    pub fn reported_bits(&self) -> Option<&[u8]> {
        self.log.iter().rev().find_map(|r| match &r.message {
            Message::SignatureReport { bits } => Some(bits.as_slice()),
            _ => None,
        })
    }
}

/// A ciphertext in flight together with which pairs are still on the line.
#[derive(Debug)]
pub struct Transit {
    pub ciphertext: Ciphertext,
    /// `false` marks a pair that was taken off the channel and never returned.
    pub present: Vec<bool>,
}

impl Transit {
    pub fn new(ciphertext: Ciphertext) -> Self {
        let present = vec![true; ciphertext.n_pairs()];
        Self { ciphertext, present }
    }
}

/// Holds at most one payload. Every handoff moves ownership, so no two
/// parties can hold the same ciphertext.
#[derive(Debug)]
pub struct QuantumChannel {
    in_transit: Option<Transit>,
    open: bool,
    interceptor: Option<AttackSpec>,
}

impl QuantumChannel {
    pub fn new(interceptor: Option<AttackSpec>) -> Self {
        Self {
            in_transit: None,
            open: true,
            interceptor,
        }
    }

    pub fn is_open(&self) -> bool {
        self.open
    }

    pub fn has_payload(&self) -> bool {
        self.in_transit.is_some()
    }

    pub fn send(&mut self, transit: Transit) -> Result<()> {
        if !self.open {
            return Err(Error::ChannelClosed("delivery rejected".into()));
        }
        if self.in_transit.is_some() {
            return Err(Error::InvalidArgument("a payload is already in transit".into()));
        }
        self.in_transit = Some(transit);
        Ok(())
    }

    /// Removes the payload from the line.
    pub fn take(&mut self) -> Result<Transit> {
        if !self.open {
            return Err(Error::ChannelClosed("nothing can be taken".into()));
        }
        self.in_transit
            .take()
            .ok_or_else(|| Error::InvalidArgument("no payload in transit".into()))
    }

    /// Runs the configured interceptor on the payload in flight.
    pub fn intercept<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Vec<EveRecord>> {
        let Some(spec) = self.interceptor.clone() else {
            return Ok(Vec::new());
        };
        let Transit { ciphertext, present } = self.take()?;
        let (attacked, records) = apply_attack(ciphertext, &spec, rng)?;
        self.send(Transit {
            ciphertext: attacked,
            present,
        })?;
        Ok(records)
    }

    /// Marks pair `k` of the payload in flight as lost.
    pub fn remove_pair(&mut self, k: usize) -> Result<()> {
        if !self.open {
            return Err(Error::ChannelClosed("pair removal rejected".into()));
        }
        let transit = self
            .in_transit
            .as_mut()
            .ok_or_else(|| Error::InvalidArgument("no payload in transit".into()))?;
        let slot = transit
            .present
            .get_mut(k)
            .ok_or_else(|| Error::InvalidArgument(format!("pair {k} out of range")))?;
        *slot = false;
        Ok(())
    }

    /// Bob's receipt: hands over the payload and closes the line.
    pub fn receive_and_close(&mut self) -> Option<Transit> {
        let t = self.in_transit.take();
        self.open = false;
        t
    }
}

/// Flips an ancilla from `|0>` to `|1>` when `qubit` is present and leaves
/// the qubit untouched: `(CNOT(q -> A), X(q))` applied twice.
fn presence_network(state: &QuantumState, qubit: usize) -> Result<QuantumState> {
    let anc = state.n_qubits();
    let joint = state.tensor(&QuantumState::basis(1, 0)?)?;
    let x = gates::pauli_x();
    let cnot = gates::cnot();
    joint
        .apply_gate(&cnot, &[qubit, anc])?
        .apply_gate(&x, &[qubit])?
        .apply_gate(&cnot, &[qubit, anc])?
        .apply_gate(&x, &[qubit])
}

/// Runs the ancilla network on every present qubit and reads each ancilla.
/// Returns one flag per transmitted qubit; the payload is left unchanged.
pub fn arrival_check<R: Rng + ?Sized>(transit: &mut Transit, rng: &mut R) -> Result<Vec<bool>> {
    let mut flags = Vec::with_capacity(2 * transit.present.len());
    let mut state = transit.ciphertext.state().clone();
    for (k, &present) in transit.present.iter().enumerate() {
        for qubit in [2 * k, 2 * k + 1] {
            if !present {
                // no photon, so nothing drives the ancilla away from |0>
                flags.push(false);
                continue;
            }
            let joint = presence_network(&state, qubit)?;
            let anc = joint.n_qubits() - 1;
            let (bits, post, _) = joint.measure_qubits(&[anc], rng)?;
            flags.push(bits[0] == 1);
            state = post.remove_qubit(anc, bits[0])?;
        }
    }
    transit.ciphertext = Ciphertext::new(state)?;
    Ok(flags)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Delivered,
    AbortedSignatureMismatch,
    AbortedArrival,
}

/// One protocol event, in the order it happened.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    CiphertextSent {
        step: u8,
        qubits: usize,
    },
    Intercepted {
        step: u8,
        attack: String,
        records: Vec<EveRecord>,
    },
    InterceptRejected {
        step: u8,
        reason: String,
    },
    ArrivalChecked {
        step: u8,
        flags: Vec<bool>,
    },
    ChannelClosed {
        step: u8,
    },
    Classical {
        step: u8,
        record: ClassicalRecord,
    },
    SignatureMeasured {
        step: u8,
        bits: Vec<u8>,
        probability: f64,
    },
    PayloadDecrypted {
        step: u8,
    },
}

/// What Eve ends up knowing.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EveKnowledge {
    pub records: Vec<EveRecord>,
    pub mask_seen: Option<String>,
    pub key_seen: Option<String>,
    /// Fidelity of Eve's best reconstruction with the original payload.
    pub reconstruction_fidelity: Option<f64>,
}

/// Alice's secrets for the run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Passwords {
    pub key: String,
    pub mask: String,
    pub signature: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Transcript {
    pub n_qubits: usize,
    pub seed: u64,
    pub attack: String,
    pub passwords: Passwords,
    pub events: Vec<Event>,
    pub verdict: Verdict,
    /// Fidelity of Bob's output with the payload, when delivered.
    pub fidelity: Option<f64>,
    pub eve_knowledge: EveKnowledge,
    #[serde(skip)]
    pub bob_output: Option<QuantumState>,
    /// Bob's payload qubits after a signature mismatch, kept for analysis.
    #[serde(skip)]
    pub retained_q_state: Option<QuantumState>,
    #[serde(skip)]
    pub classical_log: Vec<ClassicalRecord>,
}

impl Transcript {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub n_qubits: usize,
    pub seed: u64,
    #[serde(default = "no_attack")]
    pub adversary: AttackSpec,
    /// Bob reports arrival before the payload reaches him.
    #[serde(default)]
    pub bob_reports_early: bool,
    /// Fixes Alice's first password instead of sampling it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_key: Option<PauliKey>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_signature: Option<Signature>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_mask: Option<BasisMask>,
}

fn no_attack() -> AttackSpec {
    AttackSpec::None
}

impl ProtocolConfig {
    pub fn new(n_qubits: usize, seed: u64) -> Self {
        Self {
            n_qubits,
            seed,
            adversary: AttackSpec::None,
            bob_reports_early: false,
            fixed_key: None,
            fixed_signature: None,
            fixed_mask: None,
        }
    }

    pub fn with_adversary(mut self, spec: AttackSpec) -> Self {
        self.adversary = spec;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 || self.n_qubits > MAX_PROTOCOL_QUBITS {
            return Err(Error::InvalidArgument(format!(
                "n_qubits must be in 1..={MAX_PROTOCOL_QUBITS}, found {}",
                self.n_qubits
            )));
        }
        let n = self.n_qubits;
        if let Some(k) = &self.fixed_key {
            check_len("fixed key", n, k.len())?;
        }
        if let Some(s) = &self.fixed_signature {
            check_len("fixed signature", n, s.len())?;
        }
        if let Some(m) = &self.fixed_mask {
            check_len("fixed mask ops", 2 * n, m.ops().len())?;
        }
        self.adversary.validate(n)
    }
}

fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::LengthMismatch { what, expected, found });
    }
    Ok(())
}

struct Secrets {
    key: PauliKey,
    sig: Signature,
    mask: BasisMask,
}

impl Secrets {
    fn draw<R: Rng + ?Sized>(config: &ProtocolConfig, rng: &mut R) -> Result<Self> {
        let n = config.n_qubits;
        let key = match &config.fixed_key {
            Some(k) => k.clone(),
            None => sample_pauli_key(n, rng)?,
        };
        let sig = match &config.fixed_signature {
            Some(s) => s.clone(),
            None => sample_signature(n, rng)?,
        };
        let mask = match &config.fixed_mask {
            Some(m) => m.clone(),
            None => sample_basis_mask(n, rng)?,
        };
        Ok(Self { key, sig, mask })
    }

    fn passwords(&self) -> Passwords {
        Passwords {
            key: self.key.to_hex(),
            mask: self.mask.to_hex(),
            signature: self.sig.to_hex(),
        }
    }
}

/// Event log plus the classical channel, kept in step.
struct Recorder {
    events: Vec<Event>,
    classical: ClassicalChannel,
}

impl Recorder {
    fn new() -> Self {
        Self {
            events: Vec::new(),
            classical: ClassicalChannel::new(),
        }
    }

    fn say(&mut self, step: u8, sender: Party, message: Message) {
        self.classical.send(sender, message.clone());
        self.events.push(Event::Classical {
            step,
            record: ClassicalRecord { sender, message },
        });
    }
}

/// Executes one run: send, (attack), arrival check and closure, mask
/// disclosure, signature check, key disclosure, final decryption.
pub fn run_protocol(psi: &QuantumState, config: &ProtocolConfig) -> Result<Transcript> {
    config.validate()?;
    if psi.n_qubits() != config.n_qubits {
        return Err(Error::DimensionMismatch {
            expected: config.n_qubits,
            found: psi.n_qubits(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let secrets = Secrets::draw(config, &mut rng)?;
    let interceptor = (!matches!(config.adversary, AttackSpec::None)).then(|| config.adversary.clone());
    let mut channel = QuantumChannel::new(interceptor);
    let mut rec = Recorder::new();
    let mut eve = EveKnowledge::default();

    // 1. Alice sends the ciphertext.
    let c = encrypt(psi, &secrets.key, &secrets.sig, &secrets.mask)?;
    rec.events.push(Event::CiphertextSent {
        step: 1,
        qubits: 2 * config.n_qubits,
    });
    channel.send(Transit::new(c))?;

    if config.bob_reports_early {
        rec.say(2, Party::Bob, Message::ArrivalReport { arrived: true });
        rec.say(
            3,
            Party::Alice,
            Message::MaskDisclosure {
                mask: secrets.mask.to_hex(),
            },
        );
        eve.mask_seen = Some(secrets.mask.to_hex());
    }

    if channel.interceptor.is_some() {
        let records = channel.intercept(&mut rng)?;
        eve.records.extend(records.iter().cloned());
        rec.events.push(Event::Intercepted {
            step: 1,
            attack: config.adversary.variant_name().into(),
            records,
        });
    }

    // 2. Bob checks arrival and closes the channel.
    let mut transit = channel
        .receive_and_close()
        .ok_or_else(|| Error::InvalidArgument("nothing arrived".into()))?;
    let flags = arrival_check(&mut transit, &mut rng)?;
    let arrived = flags.iter().all(|&f| f);
    rec.events.push(Event::ArrivalChecked { step: 2, flags });
    rec.events.push(Event::ChannelClosed { step: 2 });

    let finish = |rec: Recorder, eve: EveKnowledge, verdict, fidelity, bob_output, retained| Transcript {
        n_qubits: config.n_qubits,
        seed: config.seed,
        attack: config.adversary.variant_name().into(),
        passwords: secrets.passwords(),
        events: rec.events,
        verdict,
        fidelity,
        eve_knowledge: eve,
        bob_output,
        retained_q_state: retained,
        classical_log: rec.classical.records().to_vec(),
    };

    if !config.bob_reports_early {
        rec.say(2, Party::Bob, Message::ArrivalReport { arrived });
    }
    if !arrived {
        rec.say(
            2,
            Party::Alice,
            Message::Abort {
                reason: "qubits missing".into(),
            },
        );
        return Ok(finish(rec, eve, Verdict::AbortedArrival, None, None, None));
    }

    // 3. Alice discloses the mask.
    if !config.bob_reports_early {
        rec.say(
            3,
            Party::Alice,
            Message::MaskDisclosure {
                mask: secrets.mask.to_hex(),
            },
        );
        eve.mask_seen = Some(secrets.mask.to_hex());
    }

    // 4. Bob unmasks and reads the signature.
    let unmasked = decrypt_unmask(transit.ciphertext, &secrets.mask)?;
    let v = verify_signature(&unmasked, &secrets.sig, &mut rng)?;
    rec.events.push(Event::SignatureMeasured {
        step: 4,
        bits: v.bits.clone(),
        probability: v.probability,
    });
    rec.say(4, Party::Bob, Message::SignatureReport { bits: v.bits.clone() });

    // 5. Alice compares.
    if v.bits != secrets.sig.bits() {
        rec.say(
            5,
            Party::Alice,
            Message::Abort {
                reason: "signature mismatch".into(),
            },
        );
        return Ok(finish(
            rec,
            eve,
            Verdict::AbortedSignatureMismatch,
            None,
            None,
            Some(v.q_state),
        ));
    }
    rec.say(5, Party::Alice, Message::SignatureConfirmed);
    rec.say(
        5,
        Party::Alice,
        Message::KeyDisclosure {
            key: secrets.key.to_hex(),
        },
    );
    eve.key_seen = Some(secrets.key.to_hex());

    // 6. Bob removes the Pauli mask.
    let out = decrypt_final(&v.q_state, &secrets.key)?;
    rec.events.push(Event::PayloadDecrypted { step: 6 });
    let f = fidelity(psi, &out)?;

    eve.reconstruction_fidelity = eve_reconstruction(psi, &eve.records, &secrets, config.n_qubits)?;
    Ok(finish(rec, eve, Verdict::Delivered, Some(f), Some(out), None))
}

/// Eve applies the disclosed passwords to any genuine qubits she kept.
fn eve_reconstruction(psi: &QuantumState, records: &[EveRecord], secrets: &Secrets, n: usize) -> Result<Option<f64>> {
    let held = records.iter().find_map(|r| match r {
        EveRecord::HeldPairs { pairs, state } if pairs.len() == n => Some(state.clone()),
        _ => None,
    });
    let Some(state) = held else {
        return Ok(None);
    };
    let unmasked = decrypt_unmask(Ciphertext::new(state)?, &secrets.mask)?;
    let s: Vec<usize> = (0..n).map(|k| 2 * k + 1).collect();
    let p = unmasked.probability_of_bits(&s, secrets.sig.bits())?;
    if p <= 0.0 {
        return Ok(Some(0.0));
    }
    let projected = cipher::extract_payload(
        &unmasked.project_bits(&s, secrets.sig.bits())?.scaled(1.0 / p),
        secrets.sig.bits(),
    )?;
    let out = decrypt_final(&projected, &secrets.key)?;
    Ok(Some(fidelity(psi, &out)?))
}

/// Result of the premature-disclosure scenario.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScenarioOutcome {
    pub transcript: Transcript,
    /// `|<psi|bob_output>|^2`, computed directly from the vectors.
    pub bob_fidelity: Option<f64>,
    pub eve_fidelity: Option<f64>,
    #[serde(skip)]
    pub fake: Option<QuantumState>,
}

/// Bob reports arrival while the ciphertext is still on the line (when
/// `early` is set). Eve waits for the mask, strips it, keeps `U_i|psi>`,
/// re-wraps a fake payload with the genuine signature and mask, and reads
/// the key once Alice discloses it. Without the early report her attempt
/// comes after the channel closed and is rejected.
pub fn premature_disclosure_scenario<R: Rng + ?Sized>(
    psi: &QuantumState,
    early: bool,
    fake: Option<QuantumState>,
    rng: &mut R,
) -> Result<ScenarioOutcome> {
    let n = psi.n_qubits();
    if n == 0 || n > MAX_PROTOCOL_QUBITS {
        return Err(Error::InvalidArgument(format!(
            "payload must have 1..={MAX_PROTOCOL_QUBITS} qubits"
        )));
    }
    let fake = match fake {
        Some(f) if f.n_qubits() == n => f,
        Some(f) => {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: f.n_qubits(),
            })
        }
        None => QuantumState::haar_random(n, rng)?,
    };
    let config = ProtocolConfig {
        bob_reports_early: early,
        ..ProtocolConfig::new(n, 0)
    };
    let secrets = Secrets::draw(&config, rng)?;
    let mut channel = QuantumChannel::new(None);
    let mut rec = Recorder::new();
    let mut eve = EveKnowledge::default();
    let mut eve_holds: Option<QuantumState> = None;

    let c = encrypt(psi, &secrets.key, &secrets.sig, &secrets.mask)?;
    rec.events.push(Event::CiphertextSent { step: 1, qubits: 2 * n });
    channel.send(Transit::new(c))?;

    let eve_swap =
        |channel: &mut QuantumChannel, rng: &mut R, eve_holds: &mut Option<QuantumState>| -> Result<Vec<EveRecord>> {
            let Transit { ciphertext, .. } = channel.take()?;
            let unmasked = decrypt_unmask(ciphertext, &secrets.mask)?;
            let v = verify_signature(&unmasked, &secrets.sig, rng)?;
            *eve_holds = Some(v.q_state);
            let sig = Signature::new(v.bits.clone())?;
            let wrapped = entangle_pairs(&attach_signature(&fake, &sig)?)?;
            let masked = cipher::apply_basis_mask(&wrapped, &secrets.mask, false)?;
            channel.send(Transit::new(Ciphertext::new(masked)?))?;
            Ok(v.bits
                .iter()
                .enumerate()
                .map(|(k, &bit)| EveRecord::Outcome {
                    pair: k,
                    side: crate::attacks::Side::S,
                    bit,
                })
                .collect())
        };

    if early {
        rec.say(2, Party::Bob, Message::ArrivalReport { arrived: true });
        rec.say(
            3,
            Party::Alice,
            Message::MaskDisclosure {
                mask: secrets.mask.to_hex(),
            },
        );
        eve.mask_seen = Some(secrets.mask.to_hex());
        let records = eve_swap(&mut channel, rng, &mut eve_holds)?;
        eve.records.extend(records.iter().cloned());
        rec.events.push(Event::Intercepted {
            step: 3,
            attack: "premature_swap".into(),
            records,
        });
    }

    let mut transit = channel
        .receive_and_close()
        .ok_or_else(|| Error::InvalidArgument("nothing arrived".into()))?;
    let flags = arrival_check(&mut transit, rng)?;
    rec.events.push(Event::ArrivalChecked { step: 2, flags });
    rec.events.push(Event::ChannelClosed { step: 2 });
    if !early {
        rec.say(2, Party::Bob, Message::ArrivalReport { arrived: true });
        rec.say(
            3,
            Party::Alice,
            Message::MaskDisclosure {
                mask: secrets.mask.to_hex(),
            },
        );
        eve.mask_seen = Some(secrets.mask.to_hex());
        if let Err(e) = eve_swap(&mut channel, rng, &mut eve_holds) {
            rec.events.push(Event::InterceptRejected {
                step: 3,
                reason: e.to_string(),
            });
        }
    }

    let unmasked = decrypt_unmask(transit.ciphertext, &secrets.mask)?;
    let v = verify_signature(&unmasked, &secrets.sig, rng)?;
    rec.events.push(Event::SignatureMeasured {
        step: 4,
        bits: v.bits.clone(),
        probability: v.probability,
    });
    rec.say(4, Party::Bob, Message::SignatureReport { bits: v.bits.clone() });
    let delivered = v.bits == secrets.sig.bits();
    let (verdict, bob_output, retained) = if delivered {
        rec.say(5, Party::Alice, Message::SignatureConfirmed);
        rec.say(
            5,
            Party::Alice,
            Message::KeyDisclosure {
                key: secrets.key.to_hex(),
            },
        );
        eve.key_seen = Some(secrets.key.to_hex());
        let out = decrypt_final(&v.q_state, &secrets.key)?;
        rec.events.push(Event::PayloadDecrypted { step: 6 });
        (Verdict::Delivered, Some(out), None)
    } else {
        rec.say(
            5,
            Party::Alice,
            Message::Abort {
                reason: "signature mismatch".into(),
            },
        );
        (Verdict::AbortedSignatureMismatch, None, Some(v.q_state))
    };

    let eve_fidelity = match (&eve_holds, delivered) {
        (Some(q), true) => Some(fidelity(psi, &decrypt_final(q, &secrets.key)?)?),
        _ => None,
    };
    eve.reconstruction_fidelity = eve_fidelity;
    let bob_fidelity = bob_output.as_ref().map(|out| overlap_squared(psi, out)).transpose()?;
    let transcript = Transcript {
        n_qubits: n,
        seed: 0,
        attack: if early { "premature_swap" } else { "none" }.into(),
        passwords: secrets.passwords(),
        events: rec.events,
        verdict,
        fidelity: bob_fidelity,
        eve_knowledge: eve,
        bob_output,
        retained_q_state: retained,
        classical_log: rec.classical.records().to_vec(),
    };
    Ok(ScenarioOutcome {
        transcript,
        bob_fidelity,
        eve_fidelity,
        fake: Some(fake),
    })
}

/// `|<a|b>|^2` for pure states.
fn overlap_squared(a: &QuantumState, b: &QuantumState) -> Result<f64> {
    match (a.amplitudes(), b.amplitudes()) {
        (Some(x), Some(y)) => Ok(x
            .iter()
            .zip(y)
            .map(|(p, q)| p.conj() * q)
            .sum::<crate::qcore::C64>()
            .norm_sqr()),
        _ => fidelity(a, b),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attacks::Side;
    use crate::qcore::{BlochVector, ORACLE_TOL, STATE_TOL};

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn position(log: &[ClassicalRecord], pred: impl Fn(&Message) -> bool) -> Option<usize> {
        log.iter().position(|r| pred(&r.message))
    }

    fn check_ordering(t: &Transcript) {
        let log = &t.classical_log;
        let arrival = position(log, |m| matches!(m, Message::ArrivalReport { .. })).unwrap();
        if let Some(mask) = position(log, |m| matches!(m, Message::MaskDisclosure { .. })) {
            assert!(mask > arrival);
        }
        match position(log, |m| matches!(m, Message::KeyDisclosure { .. })) {
            Some(key) => {
                let ok = position(log, |m| matches!(m, Message::SignatureConfirmed)).unwrap();
                assert!(key > ok);
            }
            None => assert_ne!(t.verdict, Verdict::Delivered),
        }
        if t.verdict != Verdict::Delivered {
            assert!(t.eve_knowledge.key_seen.is_none());
        }
    }

    #[test]
    fn honest_runs_deliver() {
        let mut r = rng(1);
        for n in 1..=3 {
            for seed in 0..10 {
                let psi = QuantumState::haar_random(n, &mut r).unwrap();
                let t = run_protocol(&psi, &ProtocolConfig::new(n, seed)).unwrap();
                assert_eq!(t.verdict, Verdict::Delivered);
                assert!(t.fidelity.unwrap() >= 1.0 - STATE_TOL);
                assert!(t.bob_output.is_some());
                check_ordering(&t);
            }
        }
    }

    #[test]
    fn config_errors() {
        let psi = QuantumState::basis(2, 0).unwrap();
        assert!(run_protocol(&psi, &ProtocolConfig::new(1, 0)).is_err());
        assert!(run_protocol(&psi, &ProtocolConfig::new(0, 0)).is_err());
        let bad = ProtocolConfig::new(2, 0).with_adversary(AttackSpec::replace_random().on_pairs(vec![5]));
        assert!(run_protocol(&psi, &bad).is_err());
        let json = r#"{"n_qubits": 1, "seed": 3, "surprise": true}"#;
        assert!(serde_json::from_str::<ProtocolConfig>(json).is_err());
    }

    #[test]
    fn same_seed_same_transcript() {
        let psi = QuantumState::basis(2, 1).unwrap();
        let z = BlochVector::plus_z();
        let cfg = ProtocolConfig::new(2, 99).with_adversary(AttackSpec::ir_single(Side::S, z, z));
        let a = run_protocol(&psi, &cfg).unwrap().to_json().unwrap();
        let b = run_protocol(&psi, &cfg).unwrap().to_json().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn replacement_aborts_about_half_the_time() {
        let psi = QuantumState::basis(1, 0).unwrap();
        let trials = 4000;
        let mut passes = 0;
        for seed in 0..trials {
            let cfg = ProtocolConfig::new(1, seed).with_adversary(AttackSpec::replace_random());
            let t = run_protocol(&psi, &cfg).unwrap();
            check_ordering(&t);
            if t.verdict == Verdict::Delivered {
                passes += 1;
                assert!((t.eve_knowledge.reconstruction_fidelity.unwrap() - 1.0).abs() <= STATE_TOL);
            } else {
                assert!(t.retained_q_state.is_some());
            }
        }
        let p = passes as f64 / trials as f64;
        assert!((p - 0.5).abs() <= 3.0 * (0.25 / trials as f64).sqrt(), "p = {p}");
    }

    #[test]
    fn arrival_check_leaves_payload_alone() {
        let mut r = rng(2);
        let psi = QuantumState::haar_random(4, &mut r).unwrap();
        let mut t = Transit::new(Ciphertext::new(psi.clone()).unwrap());
        let flags = arrival_check(&mut t, &mut r).unwrap();
        assert!(flags.iter().all(|&f| f));
        let after = t.ciphertext.state();
        assert!(after.density_matrix().max_abs_diff(&psi.density_matrix()) <= ORACLE_TOL);
        assert!((fidelity(&psi, after).unwrap() - 1.0).abs() <= ORACLE_TOL);

        // running it again changes nothing
        let again = arrival_check(&mut t, &mut r).unwrap();
        assert_eq!(again, flags);
        assert!(
            t.ciphertext
                .state()
                .density_matrix()
                .max_abs_diff(&psi.density_matrix())
                <= ORACLE_TOL
        );
    }

    #[test]
    fn presence_network_flips_ancilla_only() {
        // (CNOT, X) twice is I (x) X on (q, A)
        let mut r = rng(3);
        let psi = QuantumState::haar_random(1, &mut r).unwrap();
        let out = presence_network(&psi, 0).unwrap();
        let expect = psi.tensor(&QuantumState::basis(1, 1).unwrap()).unwrap();
        assert!((fidelity(&expect, &out).unwrap() - 1.0).abs() <= ORACLE_TOL);
    }

    #[test]
    fn removed_pair_is_flagged() {
        let mut r = rng(4);
        let psi = QuantumState::haar_random(4, &mut r).unwrap();
        let mut ch = QuantumChannel::new(None);
        ch.send(Transit::new(Ciphertext::new(psi).unwrap())).unwrap();
        ch.remove_pair(1).unwrap();
        let mut t = ch.receive_and_close().unwrap();
        let flags = arrival_check(&mut t, &mut r).unwrap();
        assert_eq!(flags, vec![true, true, false, false]);
        assert!(ch.remove_pair(0).is_err());
    }

    #[test]
    fn channel_moves_ownership() {
        let mut ch = QuantumChannel::new(None);
        let c = Ciphertext::new(QuantumState::basis(2, 0).unwrap()).unwrap();
        ch.send(Transit::new(c)).unwrap();
        let held = ch.take().unwrap();
        assert!(!ch.has_payload());
        assert!(ch.take().is_err());
        ch.send(held).unwrap();
        let bob = ch.receive_and_close().unwrap();
        assert!(!ch.is_open());
        assert!(ch.send(bob).is_err());
    }

    #[test]
    fn premature_disclosure_leaks_payload() {
        let mut r = rng(5);
        let zero = QuantumState::basis(1, 0).unwrap();
        let out = premature_disclosure_scenario(&zero, true, None, &mut r).unwrap();
        assert_eq!(out.transcript.verdict, Verdict::Delivered);
        assert!((out.eve_fidelity.unwrap() - 1.0).abs() <= ORACLE_TOL);
        check_ordering(&out.transcript);

        // Bob ends up with U_i^dagger applied to the fake
        let fake = out.fake.as_ref().unwrap();
        let key = PauliKey::from_hex(&out.transcript.passwords.key, 1).unwrap();
        let expect = decrypt_final(fake, &key).unwrap();
        let bob = out.transcript.bob_output.as_ref().unwrap();
        assert!((fidelity(&expect, bob).unwrap() - 1.0).abs() <= ORACLE_TOL);
        let direct = overlap_squared(&zero, &expect).unwrap();
        assert!((out.bob_fidelity.unwrap() - direct).abs() <= ORACLE_TOL);
    }

    #[test]
    fn on_time_report_blocks_the_swap() {
        let mut r = rng(6);
        let psi = QuantumState::haar_random(2, &mut r).unwrap();
        let out = premature_disclosure_scenario(&psi, false, None, &mut r).unwrap();
        assert_eq!(out.transcript.verdict, Verdict::Delivered);
        assert!(out.eve_fidelity.is_none());
        assert!((out.bob_fidelity.unwrap() - 1.0).abs() <= STATE_TOL);
        assert!(out
            .transcript
            .events
            .iter()
            .any(|e| matches!(e, Event::InterceptRejected { .. })));
        check_ordering(&out.transcript);
    }

    #[test]
    fn computational_intercept_on_s_passes_three_quarters() {
        let psi = QuantumState::basis(1, 1).unwrap();
        let z = BlochVector::plus_z();
        let trials = 4000u64;
        let passes = (0..trials)
            .filter(|&seed| {
                let cfg = ProtocolConfig::new(1, seed).with_adversary(AttackSpec::ir_single(Side::S, z, z));
                run_protocol(&psi, &cfg).unwrap().verdict == Verdict::Delivered
            })
            .count();
        let p = passes as f64 / trials as f64;
        let se = (0.75 * 0.25 / trials as f64).sqrt();
        assert!((p - 0.75).abs() <= 3.0 * se, "p = {p}");
    }
}
