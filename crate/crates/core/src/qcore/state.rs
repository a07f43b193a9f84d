use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::kernel::{self, Placement};
use super::matrix::{ComplexMatrix, C64, ONE, ZERO};
use super::{MAX_QUBITS, STATE_TOL};
use crate::error::{Error, Result};

/// Storage form of a register.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum Representation {
    Vector { amplitudes: Vec<C64> },
    Density { matrix: ComplexMatrix },
}

/// A normalized pure or mixed state over `n_qubits` qubits.
///
/// Qubit 0 is the leftmost tensor factor (most significant bit of a basis
/// index). `n_qubits == 0` is the scalar state `1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantumState {
    n_qubits: usize,
    #[serde(flatten)]
    repr: Representation,
}

/// Result of a projective measurement.
#[derive(Clone, Debug)]
pub struct Measurement {
    pub outcome: usize,
    pub state: QuantumState,
    /// Exact Born probability of the sampled outcome.
    pub probability: f64,
}

fn qubits_for_dim(dim: usize) -> Result<usize> {
    if dim == 0 || !dim.is_power_of_two() {
        return Err(Error::InvalidArgument(format!("dimension {dim} is not a power of two")));
    }
    let n = dim.trailing_zeros() as usize;
    if n > MAX_QUBITS {
        return Err(Error::TooManyQubits { n, max: MAX_QUBITS });
    }
    Ok(n)
}

fn check_cap(n: usize) -> Result<()> {
    if n > MAX_QUBITS {
        Err(Error::TooManyQubits { n, max: MAX_QUBITS })
    } else {
        Ok(())
    }
}

impl QuantumState {
    pub fn from_amplitudes(amplitudes: Vec<C64>) -> Result<Self> {
        let n_qubits = qubits_for_dim(amplitudes.len())?;
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > STATE_TOL {
            return Err(Error::NotNormalized(norm));
        }
        Ok(Self {
            n_qubits,
            repr: Representation::Vector { amplitudes },
        })
    }

    /// Normalizes `amplitudes` before wrapping them.
    pub fn from_unnormalized(mut amplitudes: Vec<C64>) -> Result<Self> {
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NotNormalized(norm));
        }
        for a in &mut amplitudes {
            *a /= norm;
        }
        Self::from_amplitudes(amplitudes)
    }

    pub fn from_density(matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidDensity("matrix is not square".into()));
        }
        let n_qubits = qubits_for_dim(matrix.rows())?;
        if !matrix.is_hermitian(STATE_TOL) {
            return Err(Error::InvalidDensity("matrix is not Hermitian".into()));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(Error::InvalidDensity(format!("trace is {tr}")));
        }
        let min_eig = min_eigenvalue(&matrix);
        if min_eig < -STATE_TOL {
            return Err(Error::InvalidDensity(format!("negative eigenvalue {min_eig:e}")));
        }
        Ok(Self {
            n_qubits,
            repr: Representation::Density { matrix },
        })
    }

    /// Wraps a density buffer produced by trace-preserving internal operations.
    pub(crate) fn density_unchecked(n_qubits: usize, matrix: ComplexMatrix) -> Self {
        debug_assert_eq!(matrix.rows(), 1 << n_qubits);
        Self {
            n_qubits,
            repr: Representation::Density { matrix },
        }
    }

    pub(crate) fn vector_unchecked(n_qubits: usize, amplitudes: Vec<C64>) -> Self {
        debug_assert_eq!(amplitudes.len(), 1 << n_qubits);
        Self {
            n_qubits,
            repr: Representation::Vector { amplitudes },
        }
    }

    /// The zero-qubit state; the identity for [`QuantumState::tensor`].
    pub fn scalar() -> Self {
        Self::vector_unchecked(0, vec![ONE])
    }

    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        check_cap(n_qubits)?;
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(Error::InvalidArgument(format!(
                "basis index {index} out of range for {n_qubits} qubits"
            )));
        }
        let mut amplitudes = vec![ZERO; dim];
        amplitudes[index] = ONE;
        Ok(Self::vector_unchecked(n_qubits, amplitudes))
    }

    /// Computational basis state `|b_0 b_1 ... >`.
    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::InvalidArgument("bits must be 0 or 1".into()));
        }
        let index = bits.iter().fold(0usize, |acc, &b| acc << 1 | b as usize);
        Self::basis(bits.len(), index)
    }

    pub fn maximally_mixed(n_qubits: usize) -> Result<Self> {
        check_cap(n_qubits)?;
        let dim = 1usize << n_qubits;
        Ok(Self::density_unchecked(
            n_qubits,
            ComplexMatrix::identity(dim).scale(C64::new(1.0 / dim as f64, 0.0)),
        ))
    }

    /// Single-qubit mixed state `(I + a.sigma)/2`, `|a| <= 1`.
    pub fn from_bloch_ball(a: [f64; 3]) -> Result<Self> {
        let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1.0 + STATE_TOL {
            return Err(Error::NonUnitVector(norm));
        }
        let m = ComplexMatrix::new(
            2,
            2,
            vec![
                C64::new((1.0 + a[2]) / 2.0, 0.0),
                C64::new(a[0] / 2.0, -a[1] / 2.0),
                C64::new(a[0] / 2.0, a[1] / 2.0),
                C64::new((1.0 - a[2]) / 2.0, 0.0),
            ],
        )?;
        Ok(Self::density_unchecked(1, m))
    }

    /// Haar-random pure state from normalized complex Gaussian amplitudes.
    pub fn haar_random<R: Rng + ?Sized>(n_qubits: usize, rng: &mut R) -> Result<Self> {
        check_cap(n_qubits)?;
        let amps = (0..1usize << n_qubits)
            .map(|_| C64::new(StandardNormal.sample(&mut *rng), StandardNormal.sample(&mut *rng)))
            .collect();
        Self::from_unnormalized(amps)
    }

    /// Haar-random qubit `cos(t/2)|0> + e^{i phi} sin(t/2)|1>` with `cos t`
    /// uniform on `[-1, 1]` and `phi` uniform, times a uniform global phase.
    pub fn haar_qubit<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let cos_t: f64 = rng.random_range(-1.0..=1.0);
        let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let global: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let half = cos_t.clamp(-1.0, 1.0).acos() / 2.0;
        let g = C64::from_polar(1.0, global);
        Self::vector_unchecked(1, vec![g * half.cos(), g * C64::from_polar(half.sin(), phi)])
    }

    /// Random mixed state `A A^dagger / Tr` with Gaussian `A` of the given rank.
    pub fn random_density<R: Rng + ?Sized>(n_qubits: usize, rank: usize, rng: &mut R) -> Result<Self> {
        check_cap(n_qubits)?;
        let dim = 1usize << n_qubits;
        let rank = rank.clamp(1, dim);
        let data = (0..dim * rank)
            .map(|_| C64::new(StandardNormal.sample(&mut *rng), StandardNormal.sample(&mut *rng)))
            .collect();
        let a = ComplexMatrix::new(dim, rank, data)?;
        let m = a.mul(&a.adjoint())?;
        let tr = m.trace().re;
        Ok(Self::density_unchecked(n_qubits, m.scale(C64::new(1.0 / tr, 0.0))))
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn representation(&self) -> &Representation {
        &self.repr
    }

    pub fn is_vector(&self) -> bool {
        matches!(self.repr, Representation::Vector { .. })
    }

    pub fn amplitudes(&self) -> Option<&[C64]> {
        match &self.repr {
            Representation::Vector { amplitudes } => Some(amplitudes),
            Representation::Density { .. } => None,
        }
    }

    pub fn density_matrix(&self) -> ComplexMatrix {
        match &self.repr {
            Representation::Vector { amplitudes } => ComplexMatrix::outer(amplitudes, amplitudes),
            Representation::Density { matrix } => matrix.clone(),
        }
    }

    pub fn to_density(&self) -> Self {
        Self::density_unchecked(self.n_qubits, self.density_matrix())
    }

    /// `Tr rho^2`.
    pub fn purity(&self) -> f64 {
        match &self.repr {
            Representation::Vector { .. } => 1.0,
            Representation::Density { matrix } => matrix.data().iter().map(|z| z.norm_sqr()).sum(),
        }
    }

    /// Deviation from the state invariants: norm for vectors; Hermiticity,
    /// trace and smallest eigenvalue for density matrices.
    pub fn invariant_defect(&self) -> f64 {
        match &self.repr {
            Representation::Vector { amplitudes } => (amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() - 1.0).abs(),
            Representation::Density { matrix } => {
                let herm = matrix.max_abs_diff(&matrix.adjoint());
                let tr = (matrix.trace() - ONE).norm();
                let neg = (-min_eigenvalue(matrix)).max(0.0);
                herm.max(tr).max(neg)
            }
        }
    }

    /// `self (x) other`; `self` occupies the leading qubits.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let n = self.n_qubits + other.n_qubits;
        check_cap(n)?;
        match (&self.repr, &other.repr) {
            (Representation::Vector { amplitudes: a }, Representation::Vector { amplitudes: b }) => {
                let amps = a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect();
                Ok(Self::vector_unchecked(n, amps))
            }
            _ => Ok(Self::density_unchecked(
                n,
                super::matrix::kron(&self.density_matrix(), &other.density_matrix()),
            )),
        }
    }

    /// Reorders qubits so that new qubit `k` is old qubit `perm[k]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n_qubits;
        if perm.len() != n {
            return Err(Error::LengthMismatch {
                what: "permutation",
                expected: n,
                found: perm.len(),
            });
        }
        Placement::new(n, perm)?;
        let dim = self.dim();
        let map: Vec<usize> = (0..dim).map(|i| kernel::permuted_index(i, n, perm)).collect();
        match &self.repr {
            Representation::Vector { amplitudes } => {
                let mut out = vec![ZERO; dim];
                for (i, a) in amplitudes.iter().enumerate() {
                    out[map[i]] = *a;
                }
                Ok(Self::vector_unchecked(n, out))
            }
            Representation::Density { matrix } => {
                let mut out = ComplexMatrix::zeros(dim, dim);
                for i in 0..dim {
                    for j in 0..dim {
                        out[(map[i], map[j])] = matrix[(i, j)];
                    }
                }
                Ok(Self::density_unchecked(n, out))
            }
        }
    }

    /// Applies a unitary `gate` to `targets` (in gate-local order), identity elsewhere.
    pub fn apply_gate(&self, gate: &ComplexMatrix, targets: &[usize]) -> Result<Self> {
        let defect = gate.unitarity_defect();
        if defect > STATE_TOL {
            return Err(Error::NotUnitary(defect));
        }
        self.apply_operator(gate, targets)
    }

    /// Applies an arbitrary operator without renormalizing. Internal callers
    /// use this for unitaries already validated elsewhere.
    pub(crate) fn apply_operator(&self, op: &ComplexMatrix, targets: &[usize]) -> Result<Self> {
        let place = Placement::new(self.n_qubits, targets)?;
        place.check_operator(op)?;
        Ok(match &self.repr {
            Representation::Vector { amplitudes } => {
                Self::vector_unchecked(self.n_qubits, place.apply_vector(op, amplitudes))
            }
            Representation::Density { matrix } => {
                let dim = self.dim();
                let out = place.conjugate(op, matrix.data());
                Self::density_unchecked(self.n_qubits, ComplexMatrix::new(dim, dim, out)?)
            }
        })
    }

    /// Applies the channel `rho -> sum_k K_k rho K_k^dagger` on `targets`.
    /// The Kraus set must be trace preserving.
    pub fn apply_kraus(&self, kraus: &[ComplexMatrix], targets: &[usize]) -> Result<Self> {
        check_trace_preserving(kraus)?;
        let place = Placement::new(self.n_qubits, targets)?;
        for k in kraus {
            place.check_operator(k)?;
        }
        let rho = self.density_matrix();
        let dim = self.dim();
        let out = place.kraus(kraus, rho.data());
        Ok(Self::density_unchecked(
            self.n_qubits,
            ComplexMatrix::new(dim, dim, out)?,
        ))
    }

    /// Applies a superoperator on `targets` (see [`super::superoperator`]),
    /// with no trace-preservation requirement.
    pub(crate) fn apply_superoperator(&self, s: &ComplexMatrix, targets: &[usize]) -> Result<Self> {
        let place = Placement::new(self.n_qubits, targets)?;
        let g = 1usize << targets.len();
        if s.rows() != g * g || s.cols() != g * g {
            return Err(Error::DimensionMismatch {
                expected: g * g,
                found: s.rows(),
            });
        }
        let rho = self.density_matrix();
        let dim = self.dim();
        let out = place.superop(s, rho.data());
        Ok(Self::density_unchecked(
            self.n_qubits,
            ComplexMatrix::new(dim, dim, out)?,
        ))
    }

    /// Samples one branch of a trace-preserving Kraus set, as if the
    /// environment were measured. Returns the branch index, the renormalized
    /// state and the branch probability.
    pub(crate) fn sample_kraus<R: Rng + ?Sized>(
        &self,
        kraus: &[ComplexMatrix],
        targets: &[usize],
        rng: &mut R,
    ) -> Result<(usize, Self, f64)> {
        let branches = kraus
            .iter()
            .map(|k| self.apply_operator(k, targets))
            .collect::<Result<Vec<_>>>()?;
        let probs: Vec<f64> = branches.iter().map(|b| b.trace().max(0.0)).collect();
        let idx = sample_index(&probs, rng);
        let p = probs[idx];
        Ok((idx, branches[idx].scaled(1.0 / p), p))
    }

    /// Reduced state over `keep`, returned in ascending qubit order.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self> {
        let mut keep = keep.to_vec();
        keep.sort_unstable();
        Placement::new(self.n_qubits, &keep)?;
        let rho = self.density_matrix();
        let kd = 1usize << keep.len();
        let out = kernel::partial_trace(rho.data(), self.n_qubits, &keep);
        Ok(Self::density_unchecked(keep.len(), ComplexMatrix::new(kd, kd, out)?))
    }

    /// `Tr(rho P)` (or `<psi|P|psi>`) for a full-register operator.
    pub fn expectation(&self, op: &ComplexMatrix) -> Result<C64> {
        if op.rows() != self.dim() || op.cols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: op.rows(),
            });
        }
        Ok(match &self.repr {
            Representation::Vector { amplitudes } => {
                let pv = op.mul_vec(amplitudes)?;
                amplitudes.iter().zip(&pv).map(|(a, b)| a.conj() * b).sum()
            }
            Representation::Density { matrix } => trace_product(matrix, op),
        })
    }

    /// Projective measurement with a complete set of orthogonal projectors.
    pub fn measure_projective<R: Rng + ?Sized>(
        &self,
        projectors: &[ComplexMatrix],
        rng: &mut R,
    ) -> Result<Measurement> {
        validate_projectors(projectors, self.dim())?;
        let probs = projectors
            .iter()
            .map(|p| self.expectation(p).map(|z| z.re.max(0.0)))
            .collect::<Result<Vec<_>>>()?;
        let outcome = sample_index(&probs, rng);
        let p = probs[outcome];
        let proj = &projectors[outcome];
        let state = match &self.repr {
            Representation::Vector { amplitudes } => {
                let v = proj.mul_vec(amplitudes)?;
                let s = 1.0 / p.sqrt();
                Self::vector_unchecked(self.n_qubits, v.into_iter().map(|a| a * s).collect())
            }
            Representation::Density { matrix } => {
                let m = proj.mul(matrix)?.mul(proj)?;
                Self::density_unchecked(self.n_qubits, m.scale(C64::new(1.0 / p, 0.0)))
            }
        };
        Ok(Measurement {
            outcome,
            state,
            probability: p,
        })
    }

    /// Probability that `qubits` read `bits` in the computational basis.
    pub fn probability_of_bits(&self, qubits: &[usize], bits: &[u8]) -> Result<f64> {
        if qubits.len() != bits.len() {
            return Err(Error::LengthMismatch {
                what: "measured bits",
                expected: qubits.len(),
                found: bits.len(),
            });
        }
        Placement::new(self.n_qubits, qubits)?;
        let mask = place_mask(self.n_qubits, qubits);
        let want = place_value(self.n_qubits, qubits, bits);
        Ok(match &self.repr {
            Representation::Vector { amplitudes } => amplitudes
                .iter()
                .enumerate()
                .filter(|(i, _)| i & mask == want)
                .map(|(_, a)| a.norm_sqr())
                .sum(),
            Representation::Density { matrix } => (0..self.dim())
                .filter(|i| i & mask == want)
                .map(|i| matrix[(i, i)].re)
                .sum(),
        })
    }

    /// Measures `qubits` in the computational basis. Returns the bits read,
    /// the renormalized post-measurement state and the exact outcome probability.
    pub fn measure_qubits<R: Rng + ?Sized>(&self, qubits: &[usize], rng: &mut R) -> Result<(Vec<u8>, Self, f64)> {
        Placement::new(self.n_qubits, qubits)?;
        let k = qubits.len();
        let probs = (0..1usize << k)
            .map(|v| self.probability_of_bits(qubits, &int_to_bits(v, k)))
            .collect::<Result<Vec<_>>>()?;
        let outcome = sample_index(&probs, rng);
        let bits = int_to_bits(outcome, k);
        let p = probs[outcome];
        let post = self.project_bits(qubits, &bits)?;
        Ok((bits, post.scaled(1.0 / p), p))
    }

    /// Unnormalized projection onto `qubits == bits`.
    pub(crate) fn project_bits(&self, qubits: &[usize], bits: &[u8]) -> Result<Self> {
        let mask = place_mask(self.n_qubits, qubits);
        let want = place_value(self.n_qubits, qubits, bits);
        Ok(match &self.repr {
            Representation::Vector { amplitudes } => Self::vector_unchecked(
                self.n_qubits,
                amplitudes
                    .iter()
                    .enumerate()
                    .map(|(i, a)| if i & mask == want { *a } else { ZERO })
                    .collect(),
            ),
            Representation::Density { matrix } => {
                let dim = self.dim();
                let mut m = matrix.clone();
                for i in 0..dim {
                    for j in 0..dim {
                        if i & mask != want || j & mask != want {
                            m[(i, j)] = ZERO;
                        }
                    }
                }
                Self::density_unchecked(self.n_qubits, m)
            }
        })
    }

    /// Projects `qubit` onto `bit` and removes it, renormalizing the rest.
    pub(crate) fn remove_qubit(&self, qubit: usize, bit: u8) -> Result<Self> {
        Placement::new(self.n_qubits, &[qubit])?;
        let n = self.n_qubits;
        match &self.repr {
            Representation::Vector { amplitudes } => {
                let shift = n - 1 - qubit;
                let low = (1usize << shift) - 1;
                let kept = (0..1usize << (n - 1))
                    .map(|r| {
                        let idx = (r & !low) << 1 | (bit as usize & 1) << shift | (r & low);
                        amplitudes[idx]
                    })
                    .collect();
                Self::from_unnormalized(kept)
            }
            Representation::Density { .. } => {
                let p = self.probability_of_bits(&[qubit], &[bit])?;
                if p <= 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "qubit {qubit} has zero probability of reading {bit}"
                    )));
                }
                let keep: Vec<usize> = (0..n).filter(|&q| q != qubit).collect();
                Ok(self
                    .project_bits(&[qubit], &[bit])?
                    .partial_trace(&keep)?
                    .scaled(1.0 / p))
            }
        }
    }

    /// Multiplies probabilities by `factor` (amplitudes by its square root).
    pub(crate) fn scaled(&self, factor: f64) -> Self {
        match &self.repr {
            Representation::Vector { amplitudes } => {
                let s = factor.sqrt();
                Self::vector_unchecked(self.n_qubits, amplitudes.iter().map(|a| a * s).collect())
            }
            Representation::Density { matrix } => {
                Self::density_unchecked(self.n_qubits, matrix.scale(C64::new(factor, 0.0)))
            }
        }
    }

    /// `Tr rho` (or `<psi|psi>`); 1 for normalized states.
    pub fn trace(&self) -> f64 {
        match &self.repr {
            Representation::Vector { amplitudes } => amplitudes.iter().map(|a| a.norm_sqr()).sum(),
            Representation::Density { matrix } => matrix.trace().re,
        }
    }
}

fn place_mask(n: usize, qubits: &[usize]) -> usize {
    qubits.iter().fold(0, |acc, &q| acc | 1 << (n - 1 - q))
}

fn place_value(n: usize, qubits: &[usize], bits: &[u8]) -> usize {
    qubits
        .iter()
        .zip(bits)
        .fold(0, |acc, (&q, &b)| acc | (b as usize & 1) << (n - 1 - q))
}

pub(crate) fn int_to_bits(v: usize, k: usize) -> Vec<u8> {
    (0..k).map(|b| ((v >> (k - 1 - b)) & 1) as u8).collect()
}

fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let total: f64 = probs.iter().sum();
    let mut u = rng.random::<f64>() * total;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        last = i;
        if u < p {
            return i;
        }
        u -= p;
    }
    last
}

/// `Tr(a b)` without forming the product.
pub(crate) fn trace_product(a: &ComplexMatrix, b: &ComplexMatrix) -> C64 {
    let n = a.rows();
    let mut acc = ZERO;
    for i in 0..n {
        for k in 0..a.cols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

fn validate_projectors(projectors: &[ComplexMatrix], dim: usize) -> Result<()> {
    if projectors.is_empty() {
        return Err(Error::InvalidProjectors("empty projector set".into()));
    }
    let mut sum = ComplexMatrix::zeros(dim, dim);
    for (i, p) in projectors.iter().enumerate() {
        if p.rows() != dim || p.cols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: p.rows(),
            });
        }
        if !p.is_hermitian(STATE_TOL) {
            return Err(Error::InvalidProjectors(format!("projector {i} is not Hermitian")));
        }
        if p.mul(p)?.max_abs_diff(p) > STATE_TOL {
            return Err(Error::InvalidProjectors(format!("projector {i} is not idempotent")));
        }
        sum.add_assign_scaled(p, ONE);
    }
    let defect = sum.max_abs_diff(&ComplexMatrix::identity(dim));
    if defect > STATE_TOL {
        return Err(Error::InvalidProjectors(format!(
            "projectors sum to identity only within {defect:e}"
        )));
    }
    Ok(())
}

pub(crate) fn check_trace_preserving(kraus: &[ComplexMatrix]) -> Result<()> {
    let Some(first) = kraus.first() else {
        return Err(Error::InvalidArgument("empty Kraus set".into()));
    };
    let d = first.cols();
    let mut sum = ComplexMatrix::zeros(d, d);
    for k in kraus {
        sum.add_assign_scaled(&k.adjoint().mul(k)?, ONE);
    }
    let defect = sum.max_abs_diff(&ComplexMatrix::identity(d));
    if defect > STATE_TOL {
        return Err(Error::InvalidArgument(format!(
            "Kraus operators are not trace preserving (defect {defect:e})"
        )));
    }
    Ok(())
}

/// Smallest eigenvalue of a Hermitian matrix.
pub(crate) fn min_eigenvalue(m: &ComplexMatrix) -> f64 {
    let n = m.rows();
    let dm = nalgebra::DMatrix::from_fn(n, n, |i, j| {
        // symmetrize to absorb rounding in the strict upper/lower halves
        (m[(i, j)] + m[(j, i)].conj()) * 0.5
    });
    dm.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}
