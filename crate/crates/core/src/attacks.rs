//! Eavesdropper strategies as channels on the in-transit ciphertext.
//!
//! Every strategy acts pair by pair, so each has a Kraus representation on
//! the four-dimensional `(Q_k, S_k)` space. The exact path applies that
//! channel; the trajectory path samples one Kraus branch, which is what Eve
//! sees when she reads her measurement outcomes or ancillas.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cipher::{pair_qubits, Ciphertext};
use crate::error::{Error, Result};
use crate::qcore::{
    bloch_projector, embed_operator, gates, kron, BlochVector, ComplexMatrix, QuantumState, C64, STATE_TOL,
};

/// Most ancillas a probe circuit may attach to one pair.
pub const MAX_PROBE_ANCILLAS: usize = 2;

/// Default cap on the number of topologies a probe search will evaluate.
pub const DEFAULT_FAMILY_CAP: usize = 2_000_000;

/// Which qubit of a pair a single-side attack touches.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Q,
    S,
}

impl Side {
    fn wire(self) -> usize {
        match self {
            Side::Q => 0,
            Side::S => 1,
        }
    }
}

/// Eve's strategy. `pairs` lists the attacked pair indices; when omitted
/// every pair is attacked.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum AttackSpec {
    None,
    IrSingle {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pairs: Option<Vec<usize>>,
        side: Side,
        measure: BlochVector,
        resend: BlochVector,
    },
    /// Independent intercept/resend on both qubits of a pair: `x1`/`x3`
    /// measure and resend on `Q`, `x2`/`x4` on `S`.
    IrPair {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pairs: Option<Vec<usize>>,
        x1: BlochVector,
        x2: BlochVector,
        x3: BlochVector,
        x4: BlochVector,
    },
    /// Swap each targeted pair for two fresh Haar-random qubits.
    ReplaceRandom {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pairs: Option<Vec<usize>>,
    },
    ProbeCircuit {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pairs: Option<Vec<usize>>,
        circuit: ProbeCircuit,
    },
}

impl AttackSpec {
    pub fn ir_single(side: Side, measure: BlochVector, resend: BlochVector) -> Self {
        Self::IrSingle {
            pairs: None,
            side,
            measure,
            resend,
        }
    }

    pub fn ir_pair(x1: BlochVector, x2: BlochVector, x3: BlochVector, x4: BlochVector) -> Self {
        Self::IrPair {
            pairs: None,
            x1,
            x2,
            x3,
            x4,
        }
    }

    pub fn replace_random() -> Self {
        Self::ReplaceRandom { pairs: None }
    }

    pub fn probe(circuit: ProbeCircuit) -> Self {
        Self::ProbeCircuit { pairs: None, circuit }
    }

    /// Restricts the attack to the given pairs.
    pub fn on_pairs(mut self, targets: Vec<usize>) -> Self {
        match &mut self {
            Self::None => {}
            Self::IrSingle { pairs, .. }
            | Self::IrPair { pairs, .. }
            | Self::ReplaceRandom { pairs }
            | Self::ProbeCircuit { pairs, .. } => *pairs = Some(targets),
        }
        self
    }

    pub fn variant_name(&self) -> &'static str {
        match self {
            Self::None => "none",
            Self::IrSingle { .. } => "ir_single",
            Self::IrPair { .. } => "ir_pair",
            Self::ReplaceRandom { .. } => "replace_random",
            Self::ProbeCircuit { .. } => "probe_circuit",
        }
    }

    fn pair_list(&self) -> Option<&Vec<usize>> {
        match self {
            Self::None => None,
            Self::IrSingle { pairs, .. }
            | Self::IrPair { pairs, .. }
            | Self::ReplaceRandom { pairs }
            | Self::ProbeCircuit { pairs, .. } => pairs.as_ref(),
        }
    }

    /// Attacked pairs for a ciphertext of `n_pairs` pairs, ascending.
    pub fn target_pairs(&self, n_pairs: usize) -> Result<Vec<usize>> {
        if matches!(self, Self::None) {
            return Ok(Vec::new());
        }
        let mut out = match self.pair_list() {
            None => (0..n_pairs).collect(),
            Some(list) => list.clone(),
        };
        out.sort_unstable();
        for w in out.windows(2) {
            if w[0] == w[1] {
                return Err(Error::DuplicateTarget(w[0]));
            }
        }
        if let Some(&bad) = out.iter().find(|&&k| k >= n_pairs) {
            return Err(Error::InvalidArgument(format!(
                "pair index {bad} out of range for {n_pairs} pairs"
            )));
        }
        Ok(out)
    }

    pub fn validate(&self, n_pairs: usize) -> Result<()> {
        self.target_pairs(n_pairs)?;
        if let Self::ProbeCircuit { circuit, .. } = self {
            circuit.validate()?;
        }
        Ok(())
    }

    /// Kraus operators of the per-pair channel on `(Q_k, S_k)`, or `None`
    /// for the identity.
    pub fn pair_kraus(&self) -> Result<Option<Vec<ComplexMatrix>>> {
        Ok(match self {
            Self::None => None,
            Self::IrSingle {
                side, measure, resend, ..
            } => {
                let map = InterceptResendMap::new(measure, resend);
                let id = gates::identity();
                Some(
                    map.kraus()
                        .iter()
                        .map(|k| match side {
                            Side::Q => kron(k, &id),
                            Side::S => kron(&id, k),
                        })
                        .collect(),
                )
            }
            Self::IrPair { x1, x2, x3, x4, .. } => {
                let q = InterceptResendMap::new(x1, x3).kraus();
                let s = InterceptResendMap::new(x2, x4).kraus();
                Some(q.iter().flat_map(|a| s.iter().map(move |b| kron(a, b))).collect())
            }
            // The Haar average of a fresh product pair is I/4.
            Self::ReplaceRandom { .. } => Some(
                (0..16)
                    .map(|ij| {
                        let mut m = ComplexMatrix::zeros(4, 4);
                        m[(ij / 4, ij % 4)] = C64::new(0.5, 0.0);
                        m
                    })
                    .collect(),
            ),
            Self::ProbeCircuit { circuit, .. } => Some(circuit.kraus()?),
        })
    }
}

/// The measure-and-resend map `rho -> sum_i Tr(rho m_i) r_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct InterceptResendMap {
    measure: [ComplexMatrix; 2],
    resend: [ComplexMatrix; 2],
    measure_kets: [[C64; 2]; 2],
    resend_kets: [[C64; 2]; 2],
}

impl InterceptResendMap {
    /// Measures along `measure`, resends along `resend` (outcome 1 resends
    /// the antipodal state).
    pub fn new(measure: &BlochVector, resend: &BlochVector) -> Self {
        Self {
            measure: [bloch_projector(measure, 0), bloch_projector(measure, 1)],
            resend: [bloch_projector(resend, 0), bloch_projector(resend, 1)],
            measure_kets: [measure.ket(), measure.neg().ket()],
            resend_kets: [resend.ket(), resend.neg().ket()],
        }
    }

    pub fn computational() -> Self {
        let z = BlochVector::plus_z();
        Self::new(&z, &z)
    }

    pub fn measure_projectors(&self) -> &[ComplexMatrix; 2] {
        &self.measure
    }

    pub fn resend_states(&self) -> &[ComplexMatrix; 2] {
        &self.resend
    }

    /// `K_i = |r_i><m_i|`.
    pub fn kraus(&self) -> Vec<ComplexMatrix> {
        (0..2)
            .map(|i| ComplexMatrix::outer(&self.resend_kets[i], &self.measure_kets[i]))
            .collect()
    }
}

fn check_single_qubit(rho: &QuantumState) -> Result<()> {
    if rho.n_qubits() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: rho.n_qubits(),
        });
    }
    Ok(())
}

/// Exact channel output.
pub fn ir_map_apply(rho: &QuantumState, map: &InterceptResendMap) -> Result<QuantumState> {
    check_single_qubit(rho)?;
    let mut out = ComplexMatrix::zeros(2, 2);
    for i in 0..2 {
        let p = rho.expectation(&map.measure[i])?.re;
        out.add_assign_scaled(&map.resend[i], C64::new(p, 0.0));
    }
    QuantumState::from_density(out)
}

/// One measure-then-resend trajectory: the outcome and the state sent on.
pub fn ir_map_sample<R: Rng + ?Sized>(
    rho: &QuantumState,
    map: &InterceptResendMap,
    rng: &mut R,
) -> Result<(u8, QuantumState)> {
    check_single_qubit(rho)?;
    let p0 = rho.expectation(&map.measure[0])?.re;
    let outcome = u8::from(rng.random::<f64>() >= p0);
    let ket = map.resend_kets[outcome as usize];
    Ok((outcome, QuantumState::from_amplitudes(ket.to_vec())?))
}

/// The map as a circuit: rotate the measurement basis onto the computational
/// one, copy into an ancilla with CNOT, rotate the computational basis onto
/// the resend basis, then discard the ancilla.
pub fn ir_map_dilation(rho: &QuantumState, map: &InterceptResendMap) -> Result<QuantumState> {
    check_single_qubit(rho)?;
    let [m0, m1] = map.measure_kets;
    let [r0, r1] = map.resend_kets;
    let u = ComplexMatrix::new(2, 2, vec![m0[0].conj(), m0[1].conj(), m1[0].conj(), m1[1].conj()])?;
    let v = ComplexMatrix::new(2, 2, vec![r0[0], r1[0], r0[1], r1[1]])?;
    let joint = rho.tensor(&QuantumState::basis(1, 0)?)?;
    let out = joint
        .apply_gate(&u, &[0])?
        .apply_gate(&gates::cnot(), &[0, 1])?
        .apply_gate(&v, &[0])?;
    out.partial_trace(&[0])
}

/// What Eve holds after a trajectory-mode attack.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EveRecord {
    /// Outcome of an intercept/resend measurement.
    Outcome { pair: usize, side: Side, bit: u8 },
    /// Computational-basis readout of the probe ancillas.
    ProbeReadout { pair: usize, bits: Vec<u8> },
    /// The genuine qubits of every replaced pair, in pair order `[Q, S, ...]`.
    HeldPairs { pairs: Vec<usize>, state: QuantumState },
}

/// Applies the attack channel exactly to an interleaved register.
pub fn apply_attack_channel(state: &QuantumState, spec: &AttackSpec) -> Result<QuantumState> {
    let n_pairs = state.n_qubits() / 2;
    spec.validate(n_pairs)?;
    let Some(kraus) = spec.pair_kraus()? else {
        return Ok(state.clone());
    };
    let mut out = state.clone();
    for k in spec.target_pairs(n_pairs)? {
        let (q, s) = pair_qubits(k);
        out = out.apply_kraus(&kraus, &[q, s])?;
    }
    Ok(out)
}

/// Trajectory-mode attack on a ciphertext in transit.
pub fn apply_attack<R: Rng + ?Sized>(
    c: Ciphertext,
    spec: &AttackSpec,
    rng: &mut R,
) -> Result<(Ciphertext, Vec<EveRecord>)> {
    let n_pairs = c.n_pairs();
    spec.validate(n_pairs)?;
    let targets = spec.target_pairs(n_pairs)?;
    let mut state = c.into_state();
    let mut memory = Vec::new();
    if matches!(spec, AttackSpec::ReplaceRandom { .. }) && !targets.is_empty() {
        let qubits: Vec<usize> = targets.iter().flat_map(|&k| [2 * k, 2 * k + 1]).collect();
        let held = if qubits.len() == state.n_qubits() {
            state.clone()
        } else {
            state.partial_trace(&qubits)?
        };
        memory.push(EveRecord::HeldPairs {
            pairs: targets.clone(),
            state: held,
        });
    }
    for k in targets {
        let (q, s) = pair_qubits(k);
        match spec {
            AttackSpec::None => {}
            AttackSpec::IrSingle {
                side, measure, resend, ..
            } => {
                let wire = [q, s][side.wire()];
                let kraus = InterceptResendMap::new(measure, resend).kraus();
                let (bit, next, _) = state.sample_kraus(&kraus, &[wire], rng)?;
                state = next;
                memory.push(EveRecord::Outcome {
                    pair: k,
                    side: *side,
                    bit: bit as u8,
                });
            }
            AttackSpec::IrPair { x1, x2, x3, x4, .. } => {
                for (side, wire, m, r) in [(Side::Q, q, x1, x3), (Side::S, s, x2, x4)] {
                    let kraus = InterceptResendMap::new(m, r).kraus();
                    let (bit, next, _) = state.sample_kraus(&kraus, &[wire], rng)?;
                    state = next;
                    memory.push(EveRecord::Outcome {
                        pair: k,
                        side,
                        bit: bit as u8,
                    });
                }
            }
            AttackSpec::ReplaceRandom { .. } => {
                let fresh = QuantumState::haar_qubit(rng).tensor(&QuantumState::haar_qubit(rng))?;
                state = replace_pair(&state, k, &fresh)?;
            }
            AttackSpec::ProbeCircuit { circuit, .. } => {
                let kraus = circuit.kraus()?;
                let (idx, next, _) = state.sample_kraus(&kraus, &[q, s], rng)?;
                state = next;
                memory.push(EveRecord::ProbeReadout {
                    pair: k,
                    bits: crate::qcore::int_to_bits(idx, circuit.ancillas),
                });
            }
        }
    }
    Ok((Ciphertext::new(state)?, memory))
}

/// Discards pair `k` and inserts `fresh` in its place.
fn replace_pair(state: &QuantumState, k: usize, fresh: &QuantumState) -> Result<QuantumState> {
    let n = state.n_qubits();
    let (q, s) = pair_qubits(k);
    let rest: Vec<usize> = (0..n).filter(|&i| i != q && i != s).collect();
    let remainder = if rest.is_empty() {
        QuantumState::scalar()
    } else {
        state.partial_trace(&rest)?
    };
    let joined = remainder.tensor(fresh)?;
    let perm: Vec<usize> = (0..n)
        .map(|j| {
            if j < q {
                j
            } else if j == q {
                n - 2
            } else if j == s {
                n - 1
            } else {
                j - 2
            }
        })
        .collect();
    joined.permute(&perm)
}

/// Single-side or both-side Breidbart intercept/resend.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BreidbartTarget {
    Q,
    S,
    Pair,
}

pub fn breidbart_spec(target: BreidbartTarget) -> AttackSpec {
    let b = BlochVector::breidbart();
    match target {
        BreidbartTarget::Q => AttackSpec::ir_single(Side::Q, b, b),
        BreidbartTarget::S => AttackSpec::ir_single(Side::S, b, b),
        BreidbartTarget::Pair => AttackSpec::ir_pair(b, b, b, b),
    }
}

/// One gate of a probe circuit. Wire 0 is `Q_k`, wire 1 is `S_k`, wires
/// `2..` are Eve's ancillas, which start in `|0>`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeGate {
    pub wires: Vec<usize>,
    pub matrix: ComplexMatrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeCircuit {
    pub ancillas: usize,
    pub gates: Vec<ProbeGate>,
}

/// Compact gate alphabet for searches: the Breidbart reflection on a wire,
/// or a CNOT between two wires.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProbeOp {
    U(u8),
    Cnot(u8, u8),
}

impl ProbeOp {
    pub fn token(&self) -> String {
        match self {
            Self::U(w) => format!("U{w}"),
            Self::Cnot(c, t) => format!("C{c}{t}"),
        }
    }

    pub fn parse(token: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("invalid probe token {token:?}"));
        let digits: Vec<u8> = token
            .get(1..)
            .ok_or_else(bad)?
            .chars()
            .map(|c| c.to_digit(10).map(|d| d as u8).ok_or_else(bad))
            .collect::<Result<_>>()?;
        match (token.chars().next(), digits.as_slice()) {
            (Some('U'), [w]) => Ok(Self::U(*w)),
            (Some('C'), [c, t]) if c != t => Ok(Self::Cnot(*c, *t)),
            _ => Err(bad()),
        }
    }

    fn max_wire(&self) -> usize {
        match *self {
            Self::U(w) => w as usize,
            Self::Cnot(c, t) => c.max(t) as usize,
        }
    }
}

pub fn ops_to_string(ops: &[ProbeOp]) -> String {
    ops.iter().map(|o| o.token()).collect::<Vec<_>>().join(" ")
}

impl ProbeCircuit {
    pub fn from_ops(ops: &[ProbeOp], ancillas: usize) -> Result<Self> {
        let gates = ops
            .iter()
            .map(|op| match *op {
                ProbeOp::U(w) => ProbeGate {
                    wires: vec![w as usize],
                    matrix: gates::breidbart_unitary(),
                },
                ProbeOp::Cnot(c, t) => ProbeGate {
                    wires: vec![c as usize, t as usize],
                    matrix: gates::cnot(),
                },
            })
            .collect();
        let circuit = Self { ancillas, gates };
        circuit.validate()?;
        Ok(circuit)
    }

    /// Parses a whitespace-separated token list such as `"U2 C12 U1"`.
    pub fn from_tokens(tokens: &str, ancillas: usize) -> Result<Self> {
        let ops = tokens
            .split_whitespace()
            .map(ProbeOp::parse)
            .collect::<Result<Vec<_>>>()?;
        Self::from_ops(&ops, ancillas)
    }

    pub fn n_wires(&self) -> usize {
        2 + self.ancillas
    }

    pub fn validate(&self) -> Result<()> {
        if self.ancillas > MAX_PROBE_ANCILLAS {
            return Err(Error::InvalidArgument(format!(
                "probe circuits may use at most {MAX_PROBE_ANCILLAS} ancillas, found {}",
                self.ancillas
            )));
        }
        for g in &self.gates {
            if g.wires.is_empty() || g.wires.len() > 2 {
                return Err(Error::InvalidArgument("probe gates act on one or two wires".into()));
            }
            if let Some(&w) = g.wires.iter().find(|&&w| w >= self.n_wires()) {
                return Err(Error::QubitOutOfRange {
                    index: w,
                    n_qubits: self.n_wires(),
                });
            }
            let defect = g.matrix.unitarity_defect();
            if defect > STATE_TOL {
                return Err(Error::NotUnitary(defect));
            }
        }
        Ok(())
    }

    /// Unitary over all wires.
    pub fn unitary(&self) -> Result<ComplexMatrix> {
        self.validate()?;
        let n = self.n_wires();
        let mut u = ComplexMatrix::identity(1 << n);
        for g in &self.gates {
            u = embed_operator(&g.matrix, &g.wires, n)?.mul(&u)?;
        }
        Ok(u)
    }

    /// `K_e = (I (x) <e|) W (I (x) |0>)` on `(Q, S)`, one per ancilla basis state.
    pub fn kraus(&self) -> Result<Vec<ComplexMatrix>> {
        let w = self.unitary()?;
        let anc_dim = 1usize << self.ancillas;
        Ok((0..anc_dim)
            .map(|e| {
                let mut k = ComplexMatrix::zeros(4, 4);
                for r in 0..4 {
                    for c in 0..4 {
                        k[(r, c)] = w[(r * anc_dim + e, c * anc_dim)];
                    }
                }
                k
            })
            .collect())
    }
}

/// Named probe topologies.
pub const PROBE_PRESETS: [(&str, &str, usize); 4] = [
    // one ancilla swapped through S between two Breidbart layers
    ("ancilla_swap_s", "U2 C12 U1 U2 C21 U1 C12", 1),
    // no ancilla: Q and S rotated around a CNOT ladder
    ("sandwich_qs", "U0 C01 U1 C10 U1 C01 U0", 0),
    // Breidbart intercept/resend on both sides, written as a circuit
    ("independent_pair", "U0 U1 C02 C13 U0 U1", 2),
    ("single_side_s", "U1 C12 U1", 1),
];

pub fn probe_preset(name: &str) -> Result<ProbeCircuit> {
    let (_, tokens, anc) = PROBE_PRESETS
        .iter()
        .find(|(n, _, _)| *n == name)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown probe preset {name:?}")))?;
    ProbeCircuit::from_tokens(tokens, *anc)
}

/// Set of probe topologies to evaluate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProbeFamily {
    /// Explicit token sequences sharing one ancilla count.
    Explicit { ancillas: usize, sequences: Vec<String> },
    /// Every sequence with exactly `unitaries` Breidbart gates on any wire
    /// and up to `max_cnots` CNOTs between any two wires, in every order.
    Enumerated {
        ancillas: usize,
        unitaries: usize,
        max_cnots: usize,
    },
}

impl Default for ProbeFamily {
    /// Four Breidbart gates, up to three CNOTs, one ancilla.
    fn default() -> Self {
        Self::Enumerated {
            ancillas: 1,
            unitaries: 4,
            max_cnots: 3,
        }
    }
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

impl ProbeFamily {
    pub fn ancillas(&self) -> usize {
        match self {
            Self::Explicit { ancillas, .. } | Self::Enumerated { ancillas, .. } => *ancillas,
        }
    }

    /// Number of sequences without materializing them.
    pub fn size(&self) -> usize {
        match self {
            Self::Explicit { sequences, .. } => sequences.len(),
            Self::Enumerated {
                ancillas,
                unitaries,
                max_cnots,
            } => {
                let w = 2 + ancillas;
                (0..=*max_cnots)
                    .map(|k| {
                        binomial(unitaries + k, k)
                            .saturating_mul(w.saturating_pow(*unitaries as u32))
                            .saturating_mul((w * (w - 1)).saturating_pow(k as u32))
                    })
                    .fold(0usize, |a, b| a.saturating_add(b))
            }
        }
    }

    pub fn sequences(&self) -> Result<Vec<Vec<ProbeOp>>> {
        match self {
            Self::Explicit { sequences, .. } => sequences
                .iter()
                .map(|s| s.split_whitespace().map(ProbeOp::parse).collect())
                .collect(),
            Self::Enumerated {
                ancillas,
                unitaries,
                max_cnots,
            } => {
                let w = (2 + ancillas) as u8;
                let singles: Vec<ProbeOp> = (0..w).map(ProbeOp::U).collect();
                let cnots: Vec<ProbeOp> = (0..w)
                    .flat_map(|c| (0..w).filter(move |&t| t != c).map(move |t| ProbeOp::Cnot(c, t)))
                    .collect();
                let mut out = Vec::with_capacity(self.size());
                for k in 0..=*max_cnots {
                    let len = unitaries + k;
                    for slots in combinations(len, k) {
                        let mut seq = vec![ProbeOp::U(0); len];
                        fill(&mut seq, &slots, 0, &singles, &cnots, &mut out);
                    }
                }
                Ok(out)
            }
        }
    }
}

/// All `k`-subsets of `0..n` in lexicographic order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

fn fill(
    seq: &mut Vec<ProbeOp>,
    cnot_slots: &[usize],
    pos: usize,
    singles: &[ProbeOp],
    cnots: &[ProbeOp],
    out: &mut Vec<Vec<ProbeOp>>,
) {
    if pos == seq.len() {
        out.push(seq.clone());
        return;
    }
    let choices = if cnot_slots.contains(&pos) { cnots } else { singles };
    for op in choices {
        seq[pos] = *op;
        fill(seq, cnot_slots, pos + 1, singles, cnots, out);
    }
}

/// One evaluated topology.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeResult {
    pub ops: Vec<ProbeOp>,
    pub pass_probability: f64,
}

impl ProbeResult {
    pub fn tokens(&self) -> String {
        ops_to_string(&self.ops)
    }
}

/// Bob's pass probability for one pair under a probe channel, averaged over
/// classical payload bits, signature bits and all 16 pair masks.
///
/// With payload bit `x` and signature bit `a` the unmasked pair is
/// `|x, b>` with `b = a xor x`; Bob passes when the bits `(q', s')` he reads
/// after unmasking satisfy `q' xor s' = x xor b`.
pub fn classical_pass_probability(kraus: &[ComplexMatrix]) -> f64 {
    let masks: Vec<ComplexMatrix> = crate::cipher::MaskOp::ALL.iter().map(|m| m.matrix()).collect();
    let mut total = 0.0;
    for l1 in &masks {
        for l2 in &masks {
            let l = kron(l1, l2);
            let ld = l.adjoint();
            for k in kraus {
                let m = ld.mul(k).and_then(|t| t.mul(&l)).expect("4x4");
                for input in 0..4usize {
                    let parity = (input >> 1) ^ (input & 1);
                    for output in 0..4usize {
                        if (output >> 1) ^ (output & 1) == parity {
                            total += m[(output, input)].norm_sqr();
                        }
                    }
                }
            }
        }
    }
    total / 64.0
}

/// Evaluates every topology in `family`, in enumeration order.
pub fn probe_attack_search(family: &ProbeFamily, cap: usize) -> Result<Vec<ProbeResult>> {
    let size = family.size();
    if size > cap {
        return Err(Error::InvalidArgument(format!(
            "probe family has {size} topologies, above the cap of {cap}"
        )));
    }
    let ancillas = family.ancillas();
    if ancillas > MAX_PROBE_ANCILLAS {
        return Err(Error::InvalidArgument(format!(
            "probe circuits may use at most {MAX_PROBE_ANCILLAS} ancillas"
        )));
    }
    let sequences = family.sequences()?;
    if let Some(op) = sequences.iter().flatten().find(|op| op.max_wire() >= 2 + ancillas) {
        return Err(Error::InvalidArgument(format!(
            "gate {} uses a wire beyond the {} available",
            op.token(),
            2 + ancillas
        )));
    }
    sequences
        .into_par_iter()
        .map(|ops| {
            let circuit = ProbeCircuit::from_ops(&ops, ancillas)?;
            let p = classical_pass_probability(&circuit.kraus()?);
            Ok(ProbeResult {
                ops,
                pass_probability: p,
            })
        })
        .collect()
}
