//! Dense complex linear algebra and state primitives for small registers.

mod kernel;
mod matrix;
mod state;

use serde::{Deserialize, Serialize};

pub use matrix::{gates, kron, kron_all, ComplexMatrix, C64};
pub use state::{Measurement, QuantumState, Representation};

pub(crate) use kernel::superoperator;
pub(crate) use state::{int_to_bits, trace_product};

use crate::error::{Error, Result};

/// Tolerance for state invariants (norm, trace, Hermiticity, unitarity).
pub const STATE_TOL: f64 = 1e-10;
/// Tolerance for comparisons against independent oracles.
pub const ORACLE_TOL: f64 = 1e-12;
/// Hard cap on register size.
pub const MAX_QUBITS: usize = 12;

/// Unit vector on the Bloch sphere.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct BlochVector {
    x: f64,
    y: f64,
    z: f64,
}

impl BlochVector {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let norm = (x * x + y * y + z * z).sqrt();
        if (norm - 1.0).abs() > STATE_TOL {
            return Err(Error::NonUnitVector(norm));
        }
        Ok(Self { x, y, z })
    }

    /// Projects an arbitrary non-zero vector onto the sphere.
    pub fn normalized(x: f64, y: f64, z: f64) -> Result<Self> {
        let norm = (x * x + y * y + z * z).sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NonUnitVector(norm));
        }
        Ok(Self {
            x: x / norm,
            y: y / norm,
            z: z / norm,
        })
    }

    /// Polar angle `theta` from +z, azimuth `phi` from +x.
    pub fn from_angles(theta: f64, phi: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        Self {
            x: st * cp,
            y: st * sp,
            z: ct,
        }
    }

    pub fn plus_z() -> Self {
        Self { x: 0.0, y: 0.0, z: 1.0 }
    }

    pub fn plus_x() -> Self {
        Self { x: 1.0, y: 0.0, z: 0.0 }
    }

    pub fn plus_y() -> Self {
        Self { x: 0.0, y: 1.0, z: 0.0 }
    }

    /// The basis halfway between the rectilinear and diagonal bases.
    pub fn breidbart() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self { x: h, y: 0.0, z: h }
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn components(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn neg(&self) -> Self {
        Self {
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    /// `v . sigma`
    pub fn dot_sigma(&self) -> ComplexMatrix {
        ComplexMatrix::new(
            2,
            2,
            vec![
                C64::new(self.z, 0.0),
                C64::new(self.x, -self.y),
                C64::new(self.x, self.y),
                C64::new(-self.z, 0.0),
            ],
        )
        .expect("2x2")
    }

    /// Normalized ket with this Bloch vector.
    pub fn ket(&self) -> [C64; 2] {
        let theta = self.z.clamp(-1.0, 1.0).acos();
        let phi = self.y.atan2(self.x);
        let half = theta / 2.0;
        [C64::new(half.cos(), 0.0), C64::from_polar(half.sin(), phi)]
    }
}

impl TryFrom<[f64; 3]> for BlochVector {
    type Error = Error;

    fn try_from(v: [f64; 3]) -> Result<Self> {
        Self::new(v[0], v[1], v[2])
    }
}

impl From<BlochVector> for [f64; 3] {
    fn from(v: BlochVector) -> Self {
        v.components()
    }
}

/// Rank-one projector `(I + (-1)^sign v.sigma) / 2`.
pub fn bloch_projector(v: &BlochVector, sign: u8) -> ComplexMatrix {
    let s = if sign & 1 == 0 { 0.5 } else { -0.5 };
    ComplexMatrix::identity(2)
        .scale(C64::new(0.5, 0.0))
        .add(&v.dot_sigma().scale(C64::new(s, 0.0)))
        .expect("2x2")
}

/// Full `2^n x 2^n` operator acting as `op` on `targets`, identity elsewhere.
pub fn embed_operator(op: &ComplexMatrix, targets: &[usize], n_qubits: usize) -> Result<ComplexMatrix> {
    if n_qubits > MAX_QUBITS {
        return Err(Error::TooManyQubits {
            n: n_qubits,
            max: MAX_QUBITS,
        });
    }
    let place = kernel::Placement::new(n_qubits, targets)?;
    place.check_operator(op)?;
    let dim = 1usize << n_qubits;
    let mut out = ComplexMatrix::zeros(dim, dim);
    let mut col = vec![C64::new(0.0, 0.0); dim];
    for j in 0..dim {
        col.iter_mut().for_each(|c| *c = C64::new(0.0, 0.0));
        col[j] = C64::new(1.0, 0.0);
        for (i, v) in place.apply_vector(op, &col).into_iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    Ok(out)
}

/// `Tr(a b)`.
pub fn trace_inner(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<C64> {
    if !a.is_square() || !b.is_square() || a.rows() != b.rows() {
        return Err(Error::DimensionMismatch {
            expected: a.rows(),
            found: b.rows(),
        });
    }
    Ok(trace_product(a, b))
}

/// `<psi| rho |psi>` for a pure reference state `psi`.
pub fn fidelity(pure: &QuantumState, candidate: &QuantumState) -> Result<f64> {
    let Some(psi) = pure.amplitudes() else {
        return Err(Error::NotPure);
    };
    if pure.n_qubits() != candidate.n_qubits() {
        return Err(Error::DimensionMismatch {
            expected: pure.n_qubits(),
            found: candidate.n_qubits(),
        });
    }
    let f = match candidate.amplitudes() {
        Some(phi) => psi.iter().zip(phi).map(|(a, b)| a.conj() * b).sum::<C64>().norm_sqr(),
        None => {
            let rho = candidate.density_matrix();
            let rp = rho.mul_vec(psi)?;
            psi.iter().zip(&rp).map(|(a, b)| a.conj() * b).sum::<C64>().re
        }
    };
    Ok(f.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    /// Full-register unitary built by padding `gate` with identities. Only
    /// valid for contiguous ascending targets.
    fn expand_contiguous(gate: &ComplexMatrix, first: usize, n: usize) -> ComplexMatrix {
        let k = gate.rows().trailing_zeros() as usize;
        let left = ComplexMatrix::identity(1 << first);
        let right = ComplexMatrix::identity(1 << (n - first - k));
        kron(&kron(&left, gate), &right)
    }

    #[test]
    fn embed_matches_kron_padding() {
        let g = kron(&gates::hadamard(), &gates::pauli_y());
        let got = embed_operator(&g, &[1, 2], 3).unwrap();
        assert!(got.max_abs_diff(&expand_contiguous(&g, 1, 3)) <= ORACLE_TOL);
        let cnot_10 = embed_operator(&gates::cnot(), &[1, 0], 2).unwrap();
        let swap = gates::swap();
        let oracle = swap.mul(&gates::cnot()).unwrap().mul(&swap).unwrap();
        assert!(cnot_10.max_abs_diff(&oracle) <= ORACLE_TOL);
    }

    #[test]
    fn superoperator_matches_kraus_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let rho = QuantumState::random_density(3, 4, &mut rng).unwrap();
        let h = 0.5f64.sqrt();
        let kraus = vec![
            kron(&gates::hadamard(), &gates::pauli_y()).scale(C64::new(h, 0.0)),
            gates::cnot().scale(C64::new(h, 0.0)),
        ];
        let s = superoperator(&kraus);
        let a = rho.apply_superoperator(&s, &[2, 0]).unwrap();
        let b = rho.apply_kraus(&kraus, &[2, 0]).unwrap();
        assert!(a.density_matrix().max_abs_diff(&b.density_matrix()) <= ORACLE_TOL);
    }

    #[test]
    fn cnot_on_basis_states() {
        let s00 = QuantumState::from_bits(&[0, 0]).unwrap();
        let out = s00.apply_gate(&gates::cnot(), &[0, 1]).unwrap();
        assert_eq!(out, s00);

        let s10 = QuantumState::from_bits(&[1, 0]).unwrap();
        let out = s10.apply_gate(&gates::cnot(), &[0, 1]).unwrap();
        assert_eq!(out, QuantumState::from_bits(&[1, 1]).unwrap());
    }

    #[test]
    fn apply_gate_matches_kron_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let psi = QuantumState::haar_random(3, &mut rng).unwrap();
        let amps = psi.amplitudes().unwrap();
        let gate = kron(&gates::hadamard(), &gates::pauli_y()).mul(&gates::cnot()).unwrap();
        for first in 0..2 {
            let full = expand_contiguous(&gate, first, 3);
            let oracle = full.mul_vec(amps).unwrap();
            let got = psi.apply_gate(&gate, &[first, first + 1]).unwrap();
            let diff = got
                .amplitudes()
                .unwrap()
                .iter()
                .zip(&oracle)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(diff <= ORACLE_TOL, "diff {diff}");
        }
        // reversed target order equals swapping around the gate
        let swapped = psi
            .apply_gate(&gates::swap(), &[0, 1])
            .unwrap()
            .apply_gate(&gate, &[0, 1])
            .unwrap()
            .apply_gate(&gates::swap(), &[0, 1])
            .unwrap();
        let reversed = psi.apply_gate(&gate, &[1, 0]).unwrap();
        assert!(fidelity(&swapped, &reversed).unwrap() > 1.0 - 1e-12);
    }

    #[test]
    fn apply_gate_errors() {
        let psi = QuantumState::basis(2, 0).unwrap();
        assert!(matches!(
            psi.apply_gate(&gates::cnot(), &[0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            psi.apply_gate(&gates::cnot(), &[1, 1]),
            Err(Error::DuplicateTarget(1))
        ));
        assert!(matches!(
            psi.apply_gate(&gates::hadamard(), &[2]),
            Err(Error::QubitOutOfRange { .. })
        ));
        let not_unitary = ComplexMatrix::from_real(2, 2, &[1.0, 1.0, 0.0, 1.0]).unwrap();
        assert!(matches!(psi.apply_gate(&not_unitary, &[0]), Err(Error::NotUnitary(_))));
    }

    #[test]
    fn density_gate_matches_vector_gate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let psi = QuantumState::haar_random(3, &mut rng).unwrap();
        let g = kron(&gates::breidbart_unitary(), &gates::hadamard());
        let v = psi.apply_gate(&g, &[2, 0]).unwrap();
        let d = psi.to_density().apply_gate(&g, &[2, 0]).unwrap();
        assert!(v.density_matrix().max_abs_diff(&d.density_matrix()) <= ORACLE_TOL);
    }

    #[test]
    fn partial_trace_product_and_bell() {
        let s = QuantumState::from_bits(&[0, 1]).unwrap();
        let r = s.partial_trace(&[0]).unwrap();
        assert_eq!(r.density_matrix(), ComplexMatrix::diagonal(&[c(1.0), c(0.0)]));

        let h = FRAC_1_SQRT_2;
        let bell = QuantumState::from_amplitudes(vec![c(h), c(0.0), c(0.0), c(h)]).unwrap();
        let half = ComplexMatrix::identity(2).scale(c(0.5));
        for keep in [[0], [1]] {
            let r = bell.partial_trace(&keep).unwrap();
            assert!(r.density_matrix().max_abs_diff(&half) <= ORACLE_TOL);
        }
        assert!(matches!(bell.partial_trace(&[2]), Err(Error::QubitOutOfRange { .. })));
    }

    #[test]
    fn partial_trace_matches_double_index_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rho = QuantumState::random_density(3, 8, &mut rng).unwrap();
        let m = rho.density_matrix();
        // keep qubits {0, 2}, trace qubit 1: r[(a c),(a' c')] = sum_b m[(a b c),(a' b c')]
        let mut oracle = ComplexMatrix::zeros(4, 4);
        for a in 0..2 {
            for cq in 0..2 {
                for a2 in 0..2 {
                    for c2 in 0..2 {
                        let mut acc = C64::new(0.0, 0.0);
                        for b in 0..2 {
                            acc += m[(a * 4 + b * 2 + cq, a2 * 4 + b * 2 + c2)];
                        }
                        oracle[(a * 2 + cq, a2 * 2 + c2)] = acc;
                    }
                }
            }
        }
        let got = rho.partial_trace(&[2, 0]).unwrap();
        assert!(got.density_matrix().max_abs_diff(&oracle) <= ORACLE_TOL);
        assert!((got.trace() - 1.0).abs() <= STATE_TOL);
    }

    #[test]
    fn measure_basis_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p0 = ComplexMatrix::diagonal(&[c(1.0), c(0.0)]);
        let p1 = ComplexMatrix::diagonal(&[c(0.0), c(1.0)]);
        let zero = QuantumState::basis(1, 0).unwrap();
        let m = zero.measure_projective(&[p0.clone(), p1.clone()], &mut rng).unwrap();
        assert_eq!(m.outcome, 0);
        assert_eq!(m.probability, 1.0);

        let plus = zero.apply_gate(&gates::hadamard(), &[0]).unwrap();
        let m = plus.measure_projective(&[p0.clone(), p1.clone()], &mut rng).unwrap();
        assert!((m.probability - 0.5).abs() <= ORACLE_TOL);
        assert!((m.state.trace() - 1.0).abs() <= STATE_TOL);

        let bad = [p0.clone(), p0];
        assert!(matches!(
            plus.measure_projective(&bad, &mut rng),
            Err(Error::InvalidProjectors(_))
        ));
    }

    #[test]
    fn born_probabilities_match_quadratic_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let psi = QuantumState::haar_random(2, &mut rng).unwrap();
        let amps = psi.amplitudes().unwrap().to_vec();
        // Bell-basis projectors
        let h = FRAC_1_SQRT_2;
        let bells = [
            [c(h), c(0.0), c(0.0), c(h)],
            [c(h), c(0.0), c(0.0), c(-h)],
            [c(0.0), c(h), c(h), c(0.0)],
            [c(0.0), c(h), c(-h), c(0.0)],
        ];
        let projs: Vec<ComplexMatrix> = bells.iter().map(|b| ComplexMatrix::outer(b, b)).collect();
        for p in &projs {
            let oracle: f64 = {
                let pv = p.mul_vec(&amps).unwrap();
                amps.iter().zip(&pv).map(|(a, b)| a.conj() * b).sum::<C64>().re
            };
            assert!((psi.expectation(p).unwrap().re - oracle).abs() <= ORACLE_TOL);
        }
        let m = psi.measure_projective(&projs, &mut rng).unwrap();
        let expected = psi.expectation(&projs[m.outcome]).unwrap().re;
        assert!((m.probability - expected).abs() <= ORACLE_TOL);
    }

    #[test]
    fn bloch_projector_examples() {
        let z = bloch_projector(&BlochVector::plus_z(), 0);
        assert!(z.max_abs_diff(&ComplexMatrix::diagonal(&[c(1.0), c(0.0)])) <= ORACLE_TOL);

        let x = bloch_projector(&BlochVector::plus_x(), 0);
        let plus = QuantumState::basis(1, 0)
            .unwrap()
            .apply_gate(&gates::hadamard(), &[0])
            .unwrap();
        assert!(x.max_abs_diff(&plus.density_matrix()) <= ORACLE_TOL);

        let b = bloch_projector(&BlochVector::breidbart(), 0);
        let d = 0.5 / 2f64.sqrt();
        assert!((b[(0, 0)].re - (0.5 + d)).abs() <= ORACLE_TOL);
        assert!((b[(1, 1)].re - (0.5 - d)).abs() <= ORACLE_TOL);
        assert!(matches!(BlochVector::new(1.0, 1.0, 0.0), Err(Error::NonUnitVector(_))));
    }

    #[test]
    fn trace_inner_examples() {
        let i2 = ComplexMatrix::identity(2);
        assert_eq!(trace_inner(&i2, &i2).unwrap(), c(2.0));
        assert_eq!(trace_inner(&gates::pauli_x(), &gates::pauli_y()).unwrap(), c(0.0));
        assert!(trace_inner(&i2, &ComplexMatrix::identity(4)).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let a = random_unit(&mut rng);
            let b = random_unit(&mut rng);
            let got = trace_inner(&bloch_projector(&a, 0), &bloch_projector(&b, 0)).unwrap();
            assert!((got.re - 0.5 * (1.0 + a.dot(&b))).abs() <= ORACLE_TOL);
            assert!(got.im.abs() <= ORACLE_TOL);
        }
    }

    fn random_unit(rng: &mut ChaCha8Rng) -> BlochVector {
        use rand::Rng;
        let cos_t: f64 = rng.random_range(-1.0..1.0);
        let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        BlochVector::from_angles(cos_t.acos(), phi)
    }

    #[test]
    fn fidelity_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let psi = QuantumState::haar_random(2, &mut rng).unwrap();
        assert!((fidelity(&psi, &psi.to_density()).unwrap() - 1.0).abs() <= ORACLE_TOL);
        let zero = QuantumState::basis(1, 0).unwrap();
        let mixed = QuantumState::maximally_mixed(1).unwrap();
        assert!((fidelity(&zero, &mixed).unwrap() - 0.5).abs() <= ORACLE_TOL);
        assert!(matches!(fidelity(&mixed, &zero), Err(Error::NotPure)));
        assert!(fidelity(&zero, &psi).is_err());
    }

    #[test]
    fn haar_qubit_mean_fidelity_is_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let zero = QuantumState::basis(1, 0).unwrap();
        let n = 100_000;
        let samples: Vec<f64> = (0..n)
            .map(|_| fidelity(&zero, &QuantumState::haar_qubit(&mut rng)).unwrap())
            .collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let stderr = (var / n as f64).sqrt();
        assert!((mean - 0.5).abs() <= 3.0 * stderr, "mean {mean} stderr {stderr}");
    }

    #[test]
    fn scalar_state_is_tensor_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let psi = QuantumState::haar_random(2, &mut rng).unwrap();
        assert_eq!(QuantumState::scalar().tensor(&psi).unwrap(), psi);
        assert_eq!(psi.tensor(&QuantumState::scalar()).unwrap(), psi);
    }

    #[test]
    fn from_density_rejects_invalid() {
        let neg = ComplexMatrix::diagonal(&[c(1.5), c(-0.5)]);
        assert!(matches!(QuantumState::from_density(neg), Err(Error::InvalidDensity(_))));
        let trace2 = ComplexMatrix::identity(2);
        assert!(QuantumState::from_density(trace2).is_err());
        let ok = ComplexMatrix::identity(2).scale(c(0.5));
        assert!(QuantumState::from_density(ok).is_ok());
    }

    #[test]
    fn cap_is_enforced() {
        assert!(matches!(
            QuantumState::basis(MAX_QUBITS + 1, 0),
            Err(Error::TooManyQubits { .. })
        ));
    }
}
