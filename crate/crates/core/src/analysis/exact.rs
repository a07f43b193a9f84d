//! Exact pass probabilities by explicit averaging over basis masks.

use super::closed_form::{coherence, pair_g, pair_h, pb_entangled_closed_form, pb_single_side};
use super::{PassProbabilityReport, PayloadDescriptor, AGREEMENT_TOL};
use crate::attacks::AttackSpec;
use crate::cipher::{attach_signature, entangle_pairs, pair_qubits, MaskOp, Signature};
use crate::qcore::{gates, int_to_bits, kron, superoperator, ComplexMatrix, QuantumState, C64};
use crate::{Error, Result};

/// Largest payload for which the explicit mask average is run.
pub const MAX_EXACT_QUBITS: usize = 4;

/// Superoperator on one pair for: mask, attack, unmask, CNOT, and projection
/// of `S` onto `a`, averaged over the 16 mask choices.
pub(crate) fn pair_check_superop(attack: Option<&[ComplexMatrix]>, a: u8) -> Result<ComplexMatrix> {
    let mut proj_s = ComplexMatrix::zeros(2, 2);
    proj_s[(a as usize, a as usize)] = C64::new(1.0, 0.0);
    let check = kron(&gates::identity(), &proj_s).mul(&gates::cnot())?;
    let id = [ComplexMatrix::identity(4)];
    let attack = attack.unwrap_or(&id);
    let quarter = C64::new(0.25, 0.0);
    let mut ops = Vec::with_capacity(16 * attack.len());
    for l1 in MaskOp::ALL {
        for l2 in MaskOp::ALL {
            let l = kron(&l1.matrix(), &l2.matrix());
            let pre = check.mul(&l.adjoint())?;
            for k in attack {
                ops.push(pre.mul(k)?.mul(&l)?.scale(quarter));
            }
        }
    }
    Ok(superoperator(&ops))
}

/// Per-pair Kraus sets of `spec` for an `n_pairs` ciphertext.
pub(crate) fn per_pair_kraus(spec: &AttackSpec, n_pairs: usize) -> Result<Vec<Option<Vec<ComplexMatrix>>>> {
    spec.validate(n_pairs)?;
    let targets = spec.target_pairs(n_pairs)?;
    let kraus = spec.pair_kraus()?;
    Ok((0..n_pairs)
        .map(|k| if targets.contains(&k) { kraus.clone() } else { None })
        .collect())
}

/// Exact pass probability for a fixed signature with per-pair attacks.
pub(crate) fn pass_probability_fixed(
    payload: &QuantumState,
    sig: &Signature,
    per_pair: &[Option<Vec<ComplexMatrix>>],
) -> Result<f64> {
    let mut rho = entangle_pairs(&attach_signature(payload, sig)?)?.to_density();
    for (k, kraus) in per_pair.iter().enumerate() {
        let s = pair_check_superop(kraus.as_deref(), sig.bits()[k])?;
        let (q, sq) = pair_qubits(k);
        rho = rho.apply_superoperator(&s, &[q, sq])?;
    }
    Ok(rho.trace().clamp(0.0, 1.0))
}

/// Exact pass probability, averaged over signatures when `sig` is `None`.
pub(crate) fn pass_probability(
    payload: &QuantumState,
    sig: Option<&Signature>,
    per_pair: &[Option<Vec<ComplexMatrix>>],
) -> Result<f64> {
    let n = payload.n_qubits();
    match sig {
        Some(s) => pass_probability_fixed(payload, s, per_pair),
        None => {
            let total = 1usize << n;
            let mut acc = 0.0;
            for v in 0..total {
                let s = Signature::new(int_to_bits(v, n))?;
                acc += pass_probability_fixed(payload, &s, per_pair)?;
            }
            Ok(acc / total as f64)
        }
    }
}

fn check_payload(payload: &QuantumState, max: usize) -> Result<()> {
    let n = payload.n_qubits();
    if n == 0 {
        return Err(Error::InvalidArgument("payload must have at least one qubit".into()));
    }
    if n > max {
        return Err(Error::TooManyQubits { n, max });
    }
    Ok(())
}

/// Per-pair `(g, h)` factors with `P = g + h (alpha beta* + alpha* beta)` for
/// a one-qubit payload, when the attack has a closed form.
fn pair_factors(spec: &AttackSpec) -> Option<(f64, f64)> {
    match spec {
        AttackSpec::None => Some((1.0, 0.0)),
        AttackSpec::IrSingle { measure, resend, .. } => Some((pb_single_side(measure, resend), 0.0)),
        AttackSpec::IrPair { x1, x2, x3, x4, .. } => {
            let v = [*x1, *x2, *x3, *x4];
            Some((pair_g(&v), pair_h(&v)))
        }
        AttackSpec::ReplaceRandom { .. } => Some((0.5, 0.0)),
        AttackSpec::ProbeCircuit { .. } => None,
    }
}

/// Product of one-qubit marginals, if `payload` equals it.
fn product_marginals(payload: &QuantumState) -> Result<Option<Vec<QuantumState>>> {
    let n = payload.n_qubits();
    let marginals = (0..n)
        .map(|q| payload.partial_trace(&[q]))
        .collect::<Result<Vec<_>>>()?;
    let mut product = QuantumState::scalar();
    for m in &marginals {
        product = product.tensor(m)?;
    }
    let diff = product.density_matrix().max_abs_diff(&payload.density_matrix());
    Ok((diff <= 1e-12).then_some(marginals))
}

/// Closed form for `spec` on `payload`, when one applies.
pub(crate) fn closed_form(payload: &QuantumState, spec: &AttackSpec) -> Result<Option<f64>> {
    let n = payload.n_qubits();
    let Some((g, h)) = pair_factors(spec) else {
        return Ok(None);
    };
    let targets = spec.target_pairs(n)?;
    let factors = |k: usize| if targets.contains(&k) { (g, h) } else { (1.0, 0.0) };
    if h == 0.0 {
        return Ok(Some((0..n).map(|k| factors(k).0).product()));
    }
    if n == 2 {
        return pb_entangled_closed_form(payload, factors(0), factors(1)).map(Some);
    }
    let Some(marginals) = product_marginals(payload)? else {
        return Ok(None);
    };
    let mut p = 1.0;
    for (k, m) in marginals.iter().enumerate() {
        let (g, h) = factors(k);
        p *= g + h * coherence(m)?;
    }
    Ok(Some(p))
}

fn checked(exact: f64, closed: Option<f64>) -> Result<()> {
    match closed {
        Some(c) if (exact - c).abs() > AGREEMENT_TOL => Err(Error::Inconsistent { exact, closed: c }),
        _ => Ok(()),
    }
}

/// Exact pass probability of `payload` (key fixed to the identity) under
/// `spec`, averaged over every basis mask and, when `sig` is `None`, every
/// signature. Attaches the matching closed form where one exists.
pub fn pb_exact(payload: &QuantumState, sig: Option<&Signature>, spec: &AttackSpec) -> Result<PassProbabilityReport> {
    check_payload(payload, MAX_EXACT_QUBITS)?;
    let n = payload.n_qubits();
    if let Some(s) = sig {
        if s.len() != n {
            return Err(Error::LengthMismatch {
                what: "signature",
                expected: n,
                found: s.len(),
            });
        }
    }
    let per_pair = per_pair_kraus(spec, n)?;
    let exact = pass_probability(payload, sig, &per_pair)?;
    let closed = closed_form(payload, spec)?;
    checked(exact, closed)?;
    Ok(PassProbabilityReport {
        exact,
        closed_form: closed,
        mc_estimate: None,
        attack: spec.clone(),
        payload: PayloadDescriptor::of(payload),
    })
}

/// Exact pass probability of a two-qubit payload with pair `k` attacked by
/// `specs[k]` (each spec's own pair list is ignored). When both attacks have
/// closed forms the factorized two-pair expression is checked against it.
pub fn pb_entangled_pairs(payload: &QuantumState, specs: &[AttackSpec; 2]) -> Result<f64> {
    if payload.n_qubits() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: payload.n_qubits(),
        });
    }
    let per_pair = specs.iter().map(|s| s.pair_kraus()).collect::<Result<Vec<_>>>()?;
    let exact = pass_probability(payload, None, &per_pair)?;
    if let (Some(a), Some(b)) = (pair_factors(&specs[0]), pair_factors(&specs[1])) {
        checked(exact, Some(pb_entangled_closed_form(payload, a, b)?))?;
    }
    Ok(exact)
}
