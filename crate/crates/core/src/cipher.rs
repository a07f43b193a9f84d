//! Two-password encryption: a Pauli one-time pad on the payload, signature
//! qubits entangled by CNOT, and a per-qubit conjugate-basis mask.
//!
//! Ciphertexts use the interleaved layout `[Q1, S1, Q2, S2, ...]`, so pair `k`
//! occupies qubits `2k` (payload) and `2k + 1` (signature).

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{gates, ComplexMatrix, QuantumState, C64};

/// Largest payload for which [`average_over_masks`] sums explicitly.
pub const MAX_AVERAGE_QUBITS: usize = 3;

/// One symbol of the first password.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PauliSymbol {
    I,
    X,
    Y,
    Z,
}

impl PauliSymbol {
    pub const ALL: [Self; 4] = [Self::I, Self::X, Self::Y, Self::Z];

    /// Two-bit code: `0 -> 00`, `x -> 01`, `y -> 10`, `z -> 11`.
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Result<Self> {
        Self::ALL
            .get(code as usize)
            .copied()
            .ok_or_else(|| Error::Parse(format!("invalid Pauli code {code}")))
    }

    pub fn matrix(self) -> ComplexMatrix {
        gates::pauli(self as usize)
    }

    pub fn as_char(self) -> char {
        ['0', 'x', 'y', 'z'][self as usize]
    }
}

/// One element of the conjugate-basis set applied to a transmitted qubit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MaskOp {
    I,
    H,
    X,
    /// `H sigma_x`: flip, then rotate to the diagonal basis.
    HX,
}

impl MaskOp {
    pub const ALL: [Self; 4] = [Self::I, Self::H, Self::X, Self::HX];

    /// Two-bit code: `I -> 00`, `H -> 01`, `X -> 10`, `HX -> 11`.
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Result<Self> {
        Self::ALL
            .get(code as usize)
            .copied()
            .ok_or_else(|| Error::Parse(format!("invalid mask code {code}")))
    }

    pub fn matrix(self) -> ComplexMatrix {
        match self {
            Self::I => gates::identity(),
            Self::H => gates::hadamard(),
            Self::X => gates::pauli_x(),
            Self::HX => gates::hadamard().mul(&gates::pauli_x()).expect("2x2"),
        }
    }

    pub fn name(self) -> &'static str {
        ["I", "H", "X", "HX"][self as usize]
    }
}

fn pack_bits(bits: &[u8]) -> String {
    let bytes: Vec<u8> = bits
        .chunks(8)
        .map(|chunk| {
            chunk
                .iter()
                .enumerate()
                .fold(0u8, |acc, (i, &b)| acc | (b & 1) << (7 - i))
        })
        .collect();
    hex::encode(bytes)
}

fn unpack_bits(hex_str: &str, n_bits: usize) -> Result<Vec<u8>> {
    let bytes = hex::decode(hex_str).map_err(|e| Error::Parse(e.to_string()))?;
    if bytes.len() != n_bits.div_ceil(8) {
        return Err(Error::Parse(format!(
            "expected {} hex bytes for {n_bits} bits, found {}",
            n_bits.div_ceil(8),
            bytes.len()
        )));
    }
    let bits: Vec<u8> = (0..bytes.len() * 8)
        .map(|i| (bytes[i / 8] >> (7 - i % 8)) & 1)
        .collect();
    if bits[n_bits..].iter().any(|&b| b != 0) {
        return Err(Error::Parse("non-zero padding bits".into()));
    }
    Ok(bits[..n_bits].to_vec())
}

fn codes_to_bits(codes: impl Iterator<Item = u8>) -> Vec<u8> {
    codes.flat_map(|c| [(c >> 1) & 1, c & 1]).collect()
}

fn check_bit_values(bits: &[u8]) -> Result<()> {
    if bits.iter().any(|&b| b > 1) {
        return Err(Error::Parse("bit values must be 0 or 1".into()));
    }
    Ok(())
}

/// The first password `i`, selecting `U_i = sigma_{i1} (x) ... (x) sigma_{in}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PauliKey {
    symbols: Vec<PauliSymbol>,
}

impl PauliKey {
    pub fn new(symbols: Vec<PauliSymbol>) -> Self {
        Self { symbols }
    }

    pub fn identity(n: usize) -> Self {
        Self::new(vec![PauliSymbol::I; n])
    }

    pub fn symbols(&self) -> &[PauliSymbol] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// `2n` bits, two per symbol, most significant first.
    pub fn to_bits(&self) -> Vec<u8> {
        codes_to_bits(self.symbols.iter().map(|s| s.code()))
    }

    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        check_bit_values(bits)?;
        if !bits.len().is_multiple_of(2) {
            return Err(Error::Parse(format!(
                "Pauli key needs an even bit count, found {}",
                bits.len()
            )));
        }
        bits.chunks(2)
            .map(|c| PauliSymbol::from_code(c[0] << 1 | c[1]))
            .collect::<Result<_>>()
            .map(Self::new)
    }

    /// Bit string packed big-endian into bytes, zero padded at the end.
    pub fn to_hex(&self) -> String {
        pack_bits(&self.to_bits())
    }

    pub fn from_hex(hex_str: &str, n: usize) -> Result<Self> {
        Self::from_bits(&unpack_bits(hex_str, 2 * n)?)
    }

    /// Full `2^n`-dimensional `U_i`.
    pub fn unitary(&self) -> ComplexMatrix {
        let mats: Vec<ComplexMatrix> = self.symbols.iter().map(|s| s.matrix()).collect();
        crate::qcore::kron_all(&mats)
    }
}

impl fmt::Display for PauliKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.symbols.iter().try_for_each(|s| write!(f, "{}", s.as_char()))
    }
}

impl FromStr for PauliKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' | 'i' | 'I' => Ok(PauliSymbol::I),
                'x' | 'X' => Ok(PauliSymbol::X),
                'y' | 'Y' => Ok(PauliSymbol::Y),
                'z' | 'Z' => Ok(PauliSymbol::Z),
                other => Err(Error::Parse(format!("invalid Pauli symbol {other:?}"))),
            })
            .collect::<Result<_>>()
            .map(Self::new)
    }
}

/// The second password `alpha`: ops `(L_{1,1}, L_{1,2}, ..., L_{n,1}, L_{n,2})`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BasisMask {
    ops: Vec<MaskOp>,
}

impl BasisMask {
    pub fn new(ops: Vec<MaskOp>) -> Result<Self> {
        if !ops.len().is_multiple_of(2) {
            return Err(Error::LengthMismatch {
                what: "basis mask ops",
                expected: ops.len() + 1,
                found: ops.len(),
            });
        }
        Ok(Self { ops })
    }

    pub fn identity(n_pairs: usize) -> Self {
        Self {
            ops: vec![MaskOp::I; 2 * n_pairs],
        }
    }

    pub fn from_pairs(pairs: &[(MaskOp, MaskOp)]) -> Self {
        Self {
            ops: pairs.iter().flat_map(|&(q, s)| [q, s]).collect(),
        }
    }

    pub fn ops(&self) -> &[MaskOp] {
        &self.ops
    }

    pub fn n_pairs(&self) -> usize {
        self.ops.len() / 2
    }

    /// `(L_{k,1}, L_{k,2})`.
    pub fn pair(&self, k: usize) -> (MaskOp, MaskOp) {
        (self.ops[2 * k], self.ops[2 * k + 1])
    }

    /// `4n` bits, two per op.
    pub fn to_bits(&self) -> Vec<u8> {
        codes_to_bits(self.ops.iter().map(|s| s.code()))
    }

    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        check_bit_values(bits)?;
        if !bits.len().is_multiple_of(4) {
            return Err(Error::Parse(format!(
                "basis mask needs a multiple of 4 bits, found {}",
                bits.len()
            )));
        }
        let ops = bits
            .chunks(2)
            .map(|c| MaskOp::from_code(c[0] << 1 | c[1]))
            .collect::<Result<_>>()?;
        Self::new(ops)
    }

    pub fn to_hex(&self) -> String {
        pack_bits(&self.to_bits())
    }

    pub fn from_hex(hex_str: &str, n_pairs: usize) -> Result<Self> {
        Self::from_bits(&unpack_bits(hex_str, 4 * n_pairs)?)
    }
}

impl fmt::Display for BasisMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.ops.iter().map(|o| o.name()).collect();
        write!(f, "{}", names.join(","))
    }
}

/// Alice's classical signature bits `a`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u8>", into = "Vec<u8>")]
pub struct Signature {
    bits: Vec<u8>,
}

impl Signature {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        check_bit_values(&bits)?;
        Ok(Self { bits })
    }

    pub fn zeros(n: usize) -> Self {
        Self { bits: vec![0; n] }
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn to_hex(&self) -> String {
        pack_bits(&self.bits)
    }
}

impl TryFrom<Vec<u8>> for Signature {
    type Error = Error;

    fn try_from(bits: Vec<u8>) -> Result<Self> {
        Self::new(bits)
    }
}

impl From<Signature> for Vec<u8> {
    fn from(s: Signature) -> Self {
        s.bits
    }
}

macro_rules! serde_via_string {
    ($ty:ty) => {
        impl Serialize for $ty {
            fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.serialize_str(&self.to_string())
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

serde_via_string!(PauliKey);
serde_via_string!(BasisMask);

impl FromStr for BasisMask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.is_empty() {
            return Self::new(Vec::new());
        }
        s.split(',')
            .map(|t| match t.trim() {
                "I" => Ok(MaskOp::I),
                "H" => Ok(MaskOp::H),
                "X" => Ok(MaskOp::X),
                "HX" => Ok(MaskOp::HX),
                other => Err(Error::Parse(format!("invalid mask op {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .and_then(Self::new)
    }
}

/// Encrypted register of `2n` qubits in the interleaved layout.
#[derive(Debug, PartialEq)]
pub struct Ciphertext {
    state: QuantumState,
}

impl Ciphertext {
    pub fn new(state: QuantumState) -> Result<Self> {
        if !state.n_qubits().is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "ciphertext needs an even qubit count, found {}",
                state.n_qubits()
            )));
        }
        Ok(Self { state })
    }

    pub fn state(&self) -> &QuantumState {
        &self.state
    }

    pub fn into_state(self) -> QuantumState {
        self.state
    }

    pub fn n_pairs(&self) -> usize {
        self.state.n_qubits() / 2
    }
}

/// Qubit indices `(Q_k, S_k)` of pair `k`.
pub fn pair_qubits(k: usize) -> (usize, usize) {
    (2 * k, 2 * k + 1)
}

pub fn sample_pauli_key<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<PauliKey> {
    if n == 0 {
        return Err(Error::InvalidArgument("key length must be at least 1".into()));
    }
    Ok(PauliKey::new(
        (0..n).map(|_| PauliSymbol::ALL[rng.random_range(0..4)]).collect(),
    ))
}

pub fn sample_signature<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Signature> {
    if n == 0 {
        return Err(Error::InvalidArgument("signature length must be at least 1".into()));
    }
    Ok(Signature {
        bits: (0..n).map(|_| rng.random_range(0..2u8)).collect(),
    })
}

pub fn sample_basis_mask<R: Rng + ?Sized>(n_pairs: usize, rng: &mut R) -> Result<BasisMask> {
    if n_pairs == 0 {
        return Err(Error::InvalidArgument("mask length must be at least 1 pair".into()));
    }
    Ok(BasisMask {
        ops: (0..2 * n_pairs).map(|_| MaskOp::ALL[rng.random_range(0..4)]).collect(),
    })
}

/// Applies `U_i` (or `U_i^dagger`) qubit by qubit.
pub fn apply_pauli_mask(state: &QuantumState, key: &PauliKey, inverse: bool) -> Result<QuantumState> {
    if key.len() != state.n_qubits() {
        return Err(Error::LengthMismatch {
            what: "Pauli key",
            expected: state.n_qubits(),
            found: key.len(),
        });
    }
    let mut out = state.clone();
    for (q, sym) in key.symbols().iter().enumerate() {
        if *sym == PauliSymbol::I {
            continue;
        }
        let m = sym.matrix();
        let m = if inverse { m.adjoint() } else { m };
        out = out.apply_operator(&m, &[q])?;
    }
    Ok(out)
}

/// `(1/4^n) sum_j U_j rho U_j^dagger` by explicit summation over all keys.
pub fn average_over_masks(rho: &QuantumState) -> Result<QuantumState> {
    let n = rho.n_qubits();
    if n > MAX_AVERAGE_QUBITS {
        return Err(Error::TooManyQubits {
            n,
            max: MAX_AVERAGE_QUBITS,
        });
    }
    let dim = rho.dim();
    let mut acc = ComplexMatrix::zeros(dim, dim);
    let total = 1usize << (2 * n);
    for j in 0..total {
        let symbols = (0..n).map(|q| PauliSymbol::ALL[(j >> (2 * (n - 1 - q))) & 3]).collect();
        let term = apply_pauli_mask(rho, &PauliKey::new(symbols), false)?;
        acc.add_assign_scaled(&term.density_matrix(), C64::new(1.0 / total as f64, 0.0));
    }
    Ok(QuantumState::density_unchecked(n, acc))
}

fn check_mask_len(mask: &BasisMask, n_pairs: usize) -> Result<()> {
    if mask.n_pairs() != n_pairs {
        return Err(Error::LengthMismatch {
            what: "basis mask ops",
            expected: 2 * n_pairs,
            found: mask.ops().len(),
        });
    }
    Ok(())
}

/// Applies `V_alpha` (or its inverse) to an interleaved register.
pub fn apply_basis_mask(state: &QuantumState, mask: &BasisMask, inverse: bool) -> Result<QuantumState> {
    check_mask_len(mask, state.n_qubits() / 2)?;
    let mut out = state.clone();
    for (q, op) in mask.ops().iter().enumerate() {
        if *op == MaskOp::I {
            continue;
        }
        let m = op.matrix();
        let m = if inverse { m.adjoint() } else { m };
        out = out.apply_operator(&m, &[q])?;
    }
    Ok(out)
}

/// CNOT from `Q_k` to `S_k` on every pair.
pub fn entangle_pairs(state: &QuantumState) -> Result<QuantumState> {
    let cnot = gates::cnot();
    let mut out = state.clone();
    for k in 0..state.n_qubits() / 2 {
        let (q, s) = pair_qubits(k);
        out = out.apply_operator(&cnot, &[q, s])?;
    }
    Ok(out)
}

/// Places `|a_k>` beside `Q_k`, giving the interleaved layout.
pub fn attach_signature(payload: &QuantumState, sig: &Signature) -> Result<QuantumState> {
    let n = payload.n_qubits();
    if sig.len() != n {
        return Err(Error::LengthMismatch {
            what: "signature",
            expected: n,
            found: sig.len(),
        });
    }
    let block = payload.tensor(&QuantumState::from_bits(sig.bits())?)?;
    let perm: Vec<usize> = (0..n).flat_map(|k| [k, n + k]).collect();
    block.permute(&perm)
}

pub fn encrypt(psi: &QuantumState, key: &PauliKey, sig: &Signature, mask: &BasisMask) -> Result<Ciphertext> {
    let n = psi.n_qubits();
    check_mask_len(mask, n)?;
    let masked = apply_pauli_mask(psi, key, false)?;
    let paired = attach_signature(&masked, sig)?;
    let entangled = entangle_pairs(&paired)?;
    Ciphertext::new(apply_basis_mask(&entangled, mask, false)?)
}

/// `V_alpha^dagger` followed by the disentangling CNOTs.
pub fn decrypt_unmask(c: Ciphertext, mask: &BasisMask) -> Result<QuantumState> {
    let unmasked = apply_basis_mask(c.state(), mask, true)?;
    entangle_pairs(&unmasked)
}

/// Outcome of Bob's signature measurement.
#[derive(Clone, Debug)]
pub struct Verification {
    pub pass: bool,
    pub bits: Vec<u8>,
    /// Payload qubits after the signature qubits were measured.
    pub q_state: QuantumState,
    /// Exact probability of the bits that were read.
    pub probability: f64,
}

/// Measures every `S_k` and compares with `sig`.
pub fn verify_signature<R: Rng + ?Sized>(state: &QuantumState, sig: &Signature, rng: &mut R) -> Result<Verification> {
    let n = state.n_qubits() / 2;
    if !state.n_qubits().is_multiple_of(2) || sig.len() != n {
        return Err(Error::LengthMismatch {
            what: "signature",
            expected: n,
            found: sig.len(),
        });
    }
    let s_qubits: Vec<usize> = (0..n).map(|k| pair_qubits(k).1).collect();
    let (bits, post, probability) = state.measure_qubits(&s_qubits, rng)?;
    let q_state = extract_payload(&post, &bits)?;
    Ok(Verification {
        pass: bits == sig.bits(),
        bits,
        q_state,
        probability,
    })
}

/// Payload marginal of an interleaved register whose `S` qubits are known to
/// read `s_bits`. Pure inputs stay pure.
pub(crate) fn extract_payload(state: &QuantumState, s_bits: &[u8]) -> Result<QuantumState> {
    let n = s_bits.len();
    match state.amplitudes() {
        Some(amps) => {
            let s_value = s_bits.iter().fold(0usize, |acc, &b| acc << 1 | b as usize);
            let q_amps = (0..1usize << n)
                .map(|q| {
                    let mut idx = 0usize;
                    for k in 0..n {
                        let qb = (q >> (n - 1 - k)) & 1;
                        let sb = (s_value >> (n - 1 - k)) & 1;
                        idx = idx << 2 | qb << 1 | sb;
                    }
                    amps[idx]
                })
                .collect();
            QuantumState::from_unnormalized(q_amps)
        }
        None => {
            let q_qubits: Vec<usize> = (0..n).map(|k| pair_qubits(k).0).collect();
            state.partial_trace(&q_qubits)
        }
    }
}

/// Step 6: `U_i^dagger` on the payload.
pub fn decrypt_final(q_state: &QuantumState, key: &PauliKey) -> Result<QuantumState> {
    apply_pauli_mask(q_state, key, true)
}
