//! Iterated encryption with fresh signatures at every level.

use super::exact::{pair_check_superop, per_pair_kraus};
use crate::attacks::AttackSpec;
use crate::cipher::{
    apply_basis_mask, apply_pauli_mask, attach_signature, encrypt, entangle_pairs, pair_qubits, sample_basis_mask,
    sample_pauli_key, sample_signature, BasisMask, PauliKey, Signature,
};
use crate::qcore::QuantumState;
use crate::{Error, Result};
use rand::Rng;
use serde::Serialize;

/// Deepest chain supported (8 physical qubits).
pub const MAX_AMPLIFICATION_LEVELS: usize = 3;

/// One encryption layer of the chain.
#[derive(Clone, Debug, Serialize)]
pub struct AmplificationLevel {
    pub level: usize,
    /// Qubits wrapped at this level, equal to the signature qubits consumed.
    pub input_qubits: usize,
    pub output_qubits: usize,
    pub key: PauliKey,
    pub signature: Signature,
    pub mask: BasisMask,
    /// Ciphertext produced by this level.
    #[serde(skip)]
    pub state: QuantumState,
}

#[derive(Clone, Debug, Serialize)]
pub struct AmplificationChain {
    pub total_qubits: usize,
    /// The one-qubit state that was encrypted.
    #[serde(skip)]
    pub payload: QuantumState,
    pub levels: Vec<AmplificationLevel>,
}

/// Encrypts `psi1` `levels` times; level `k` wraps the `2^(k-1)`-qubit
/// ciphertext of level `k - 1` with as many fresh signature qubits.
pub fn privacy_amplification<R: Rng + ?Sized>(
    psi1: &QuantumState,
    levels: usize,
    rng: &mut R,
) -> Result<AmplificationChain> {
    if psi1.n_qubits() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: psi1.n_qubits(),
        });
    }
    if levels == 0 || levels > MAX_AMPLIFICATION_LEVELS {
        return Err(Error::InvalidArgument(format!(
            "levels must be in 1..={MAX_AMPLIFICATION_LEVELS}, found {levels}"
        )));
    }
    let mut state = psi1.clone();
    let mut out = Vec::with_capacity(levels);
    for level in 1..=levels {
        let n = state.n_qubits();
        let key = sample_pauli_key(n, rng)?;
        let signature = sample_signature(n, rng)?;
        let mask = sample_basis_mask(n, rng)?;
        state = encrypt(&state, &key, &signature, &mask)?.into_state();
        out.push(AmplificationLevel {
            level,
            input_qubits: n,
            output_qubits: 2 * n,
            key,
            signature,
            mask,
            state: state.clone(),
        });
    }
    Ok(AmplificationChain {
        total_qubits: 1 << levels,
        payload: psi1.clone(),
        levels: out,
    })
}

/// Unmasks one level with known passwords and projects its signature qubits,
/// returning the unnormalized inner state.
fn peel(state: &QuantumState, level: &AmplificationLevel) -> Result<QuantumState> {
    let unmasked = entangle_pairs(&apply_basis_mask(state, &level.mask, true)?)?;
    let n = level.input_qubits;
    let (q_qubits, s_qubits): (Vec<usize>, Vec<usize>) = (0..n).map(pair_qubits).unzip();
    let projected = unmasked.to_density().project_bits(&s_qubits, level.signature.bits())?;
    apply_pauli_mask(&projected.partial_trace(&q_qubits)?, &level.key, true)
}

impl AmplificationChain {
    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    /// The transmitted state.
    pub fn ciphertext(&self) -> &QuantumState {
        &self.levels.last().expect("chain has at least one level").state
    }

    /// Signature qubits consumed at each level.
    pub fn signatures_per_level(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.signature.len()).collect()
    }

    /// Honest decryption of `state` through every level. Returns the
    /// recovered payload and the probability that every signature passed.
    pub fn decrypt(&self, state: &QuantumState) -> Result<(QuantumState, f64)> {
        if state.n_qubits() != self.total_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.total_qubits,
                found: state.n_qubits(),
            });
        }
        let mut rho = state.to_density();
        for level in self.levels.iter().rev() {
            rho = peel(&rho, level)?;
        }
        let p = rho.trace();
        if p <= 0.0 {
            return Err(Error::InvalidArgument("signatures cannot pass".into()));
        }
        Ok((rho.scaled(1.0 / p), p))
    }

    /// Exact probability that all signature checks pass when `spec` acts on
    /// the transmitted pairs. The outermost mask is averaged; inner
    /// passwords are the chain's own.
    pub fn pass_probability(&self, spec: &AttackSpec) -> Result<f64> {
        let outer = self.levels.last().expect("chain has at least one level");
        let payload = match self.levels.len() {
            1 => &self.payload,
            k => &self.levels[k - 2].state,
        };
        let n = outer.input_qubits;
        let per_pair = per_pair_kraus(spec, n)?;
        let keyed = apply_pauli_mask(payload, &outer.key, false)?;
        let mut rho = entangle_pairs(&attach_signature(&keyed, &outer.signature)?)?.to_density();
        for (k, kraus) in per_pair.iter().enumerate() {
            let s = pair_check_superop(kraus.as_deref(), outer.signature.bits()[k])?;
            let (q, sq) = pair_qubits(k);
            rho = rho.apply_superoperator(&s, &[q, sq])?;
        }
        let q_qubits: Vec<usize> = (0..n).map(|k| pair_qubits(k).0).collect();
        rho = apply_pauli_mask(&rho.partial_trace(&q_qubits)?, &outer.key, true)?;
        for level in self.levels.iter().rev().skip(1) {
            rho = peel(&rho, level)?;
        }
        Ok(rho.trace().clamp(0.0, 1.0))
    }
}
