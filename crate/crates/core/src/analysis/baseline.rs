//! The comparison scheme: a Pauli-encrypted payload hidden among
//! conjugate-coded check qubits.

use super::McSummary;
use crate::attacks::InterceptResendMap;
use crate::cipher::{apply_pauli_mask, sample_pauli_key};
use crate::qcore::{gates, ComplexMatrix, QuantumState, C64, MAX_QUBITS};
use crate::{Error, Result};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Which position Eve attacks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineTarget {
    /// A uniformly random position among all `2n`.
    Uniform,
    /// A position known to hold a check qubit.
    Check,
    /// A position known to hold a payload qubit.
    Payload,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub n: usize,
    pub target: BaselineTarget,
    /// Exact probability that the checks miss the attack.
    pub exact: f64,
    /// Sampled runs of the literal scheme.
    pub estimate: McSummary,
}

/// The four check states `|0>, |1>, |+>, |->` with their basis flag.
fn check_states() -> [(ComplexMatrix, bool, u8); 4] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let ket = |a: f64, b: f64| ComplexMatrix::new(2, 1, vec![C64::new(a, 0.0), C64::new(b, 0.0)]).expect("2x1");
    [
        (ket(1.0, 0.0), false, 0),
        (ket(0.0, 1.0), false, 1),
        (ket(h, h), true, 0),
        (ket(h, -h), true, 1),
    ]
}

/// Probability that one check qubit survives `map`, averaged over the four
/// check states.
fn check_pass(map: &InterceptResendMap) -> Result<f64> {
    let kraus = map.kraus();
    let mut total = 0.0;
    for (ket, _, _) in check_states() {
        for k in &kraus {
            let amp = ket.adjoint().mul(&k.mul(&ket)?)?[(0, 0)];
            total += amp.norm_sqr();
        }
    }
    Ok(total / 4.0)
}

/// Probability that the scheme misses one intercept/resend, computed exactly,
/// plus `trials` sampled runs of the scheme with `n` payload qubits.
pub fn baseline_check_scheme<R: Rng + ?Sized>(
    n: usize,
    map: &InterceptResendMap,
    target: BaselineTarget,
    trials: u64,
    rng: &mut R,
) -> Result<BaselineReport> {
    if n == 0 || 2 * n > MAX_QUBITS {
        return Err(Error::InvalidArgument(format!(
            "payload size must be in 1..={}, found {n}",
            MAX_QUBITS / 2
        )));
    }
    let c = check_pass(map)?;
    let exact = match target {
        BaselineTarget::Uniform => (1.0 + c) / 2.0,
        BaselineTarget::Check => c,
        BaselineTarget::Payload => 1.0,
    };
    let kraus = map.kraus();
    let checks = check_states();
    let mut samples = Vec::with_capacity(trials as usize);
    for _ in 0..trials {
        let payload = QuantumState::haar_random(n, rng)?;
        let key = sample_pauli_key(n, rng)?;
        let mut state = apply_pauli_mask(&payload, &key, false)?;
        let chosen: Vec<usize> = (0..n).map(|_| rng.random_range(0..4)).collect();
        for &i in &chosen {
            let amps = checks[i].0.data().to_vec();
            state = state.tensor(&QuantumState::from_amplitudes(amps)?)?;
        }
        // New position p holds old qubit perm[p]; old qubits n.. are checks.
        let mut perm: Vec<usize> = (0..2 * n).collect();
        perm.shuffle(rng);
        state = state.permute(&perm)?;
        let check_pos: Vec<usize> = (0..2 * n).filter(|&p| perm[p] >= n).collect();
        let payload_pos: Vec<usize> = (0..2 * n).filter(|&p| perm[p] < n).collect();
        let pos = match target {
            BaselineTarget::Uniform => rng.random_range(0..2 * n),
            BaselineTarget::Check => check_pos[rng.random_range(0..n)],
            BaselineTarget::Payload => payload_pos[rng.random_range(0..n)],
        };
        state = state.sample_kraus(&kraus, &[pos], rng)?.1;
        let mut expected = Vec::with_capacity(n);
        for &p in &check_pos {
            let (_, hadamard, bit) = checks[chosen[perm[p] - n]];
            if hadamard {
                state = state.apply_gate(&gates::hadamard(), &[p])?;
            }
            expected.push(bit);
        }
        let (bits, _, _) = state.measure_qubits(&check_pos, rng)?;
        samples.push(if bits == expected { 1.0 } else { 0.0 });
    }
    Ok(BaselineReport {
        n,
        target,
        exact,
        estimate: McSummary::from_samples(&samples),
    })
}
