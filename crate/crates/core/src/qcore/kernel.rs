//! Index-level kernels for applying small operators to selected qubits of a
//! dense register. Qubit 0 is the most significant bit of a basis index.

use super::matrix::{ComplexMatrix, C64, ZERO};
use crate::error::{Error, Result};

/// Validated placement of a `2^k`-dimensional operator on `k` qubits of an
/// `n`-qubit register.
pub(crate) struct Placement {
    dim: usize,
    /// Bits of the register not touched by the operator.
    rest_mask: usize,
    /// Register offset for each local basis index of the operator.
    offsets: Vec<usize>,
}

impl Placement {
    pub(crate) fn new(n_qubits: usize, targets: &[usize]) -> Result<Self> {
        let mut seen = 0usize;
        for &t in targets {
            if t >= n_qubits {
                return Err(Error::QubitOutOfRange { index: t, n_qubits });
            }
            let bit = 1 << (n_qubits - 1 - t);
            if seen & bit != 0 {
                return Err(Error::DuplicateTarget(t));
            }
            seen |= bit;
        }
        let k = targets.len();
        let offsets = (0..1usize << k)
            .map(|local| {
                targets
                    .iter()
                    .enumerate()
                    .filter(|(b, _)| (local >> (k - 1 - b)) & 1 == 1)
                    .fold(0, |acc, (_, &t)| acc | 1 << (n_qubits - 1 - t))
            })
            .collect();
        Ok(Self {
            dim: 1 << n_qubits,
            rest_mask: seen,
            offsets,
        })
    }

    pub(crate) fn check_operator(&self, op: &ComplexMatrix) -> Result<()> {
        if op.rows() != self.offsets.len() || op.cols() != self.offsets.len() {
            return Err(Error::DimensionMismatch {
                expected: self.offsets.len(),
                found: op.rows().max(op.cols()),
            });
        }
        Ok(())
    }

    fn bases(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.dim).filter(move |b| b & self.rest_mask == 0)
    }

    /// `op` applied to a state vector.
    pub(crate) fn apply_vector(&self, op: &ComplexMatrix, v: &[C64]) -> Vec<C64> {
        let g = self.offsets.len();
        let mut out = vec![ZERO; self.dim];
        let mut local = vec![ZERO; g];
        for base in self.bases() {
            for (c, slot) in local.iter_mut().enumerate() {
                *slot = v[base | self.offsets[c]];
            }
            for r in 0..g {
                let mut acc = ZERO;
                for (c, x) in local.iter().enumerate() {
                    acc += op[(r, c)] * x;
                }
                out[base | self.offsets[r]] = acc;
            }
        }
        out
    }

    /// `op * m` where `op` acts on the row index of the full `dim x dim` matrix.
    fn apply_left(&self, op: &ComplexMatrix, m: &[C64]) -> Vec<C64> {
        let d = self.dim;
        let g = self.offsets.len();
        let mut out = vec![ZERO; d * d];
        let mut local = vec![ZERO; g];
        for base in self.bases() {
            for col in 0..d {
                for (c, slot) in local.iter_mut().enumerate() {
                    *slot = m[(base | self.offsets[c]) * d + col];
                }
                for r in 0..g {
                    let mut acc = ZERO;
                    for (c, x) in local.iter().enumerate() {
                        acc += op[(r, c)] * x;
                    }
                    out[(base | self.offsets[r]) * d + col] = acc;
                }
            }
        }
        out
    }

    /// `m * op^dagger` where `op` acts on the column index.
    fn apply_right_adjoint(&self, op: &ComplexMatrix, m: &[C64]) -> Vec<C64> {
        let d = self.dim;
        let g = self.offsets.len();
        let mut out = vec![ZERO; d * d];
        let mut local = vec![ZERO; g];
        for row in 0..d {
            let src = &m[row * d..(row + 1) * d];
            let dst = &mut out[row * d..(row + 1) * d];
            for base in self.bases() {
                for (c, slot) in local.iter_mut().enumerate() {
                    *slot = src[base | self.offsets[c]];
                }
                for r in 0..g {
                    let mut acc = ZERO;
                    for (c, x) in local.iter().enumerate() {
                        acc += op[(r, c)].conj() * x;
                    }
                    dst[base | self.offsets[r]] = acc;
                }
            }
        }
        out
    }

    /// `op * rho * op^dagger` for a row-major density buffer.
    pub(crate) fn conjugate(&self, op: &ComplexMatrix, rho: &[C64]) -> Vec<C64> {
        let left = self.apply_left(op, rho);
        self.apply_right_adjoint(op, &left)
    }

    /// `sum_k K_k rho K_k^dagger`.
    pub(crate) fn kraus(&self, ops: &[ComplexMatrix], rho: &[C64]) -> Vec<C64> {
        let mut acc = vec![ZERO; self.dim * self.dim];
        for k in ops {
            for (a, b) in acc.iter_mut().zip(self.conjugate(k, rho)) {
                *a += b;
            }
        }
        acc
    }
}

impl Placement {
    /// Applies a superoperator `s` (indexed `(i' * g + j', i * g + j)` on the
    /// local operator space) to a row-major density buffer.
    pub(crate) fn superop(&self, s: &ComplexMatrix, rho: &[C64]) -> Vec<C64> {
        let d = self.dim;
        let g = self.offsets.len();
        let mut out = vec![ZERO; d * d];
        let mut block = vec![ZERO; g * g];
        let bases: Vec<usize> = self.bases().collect();
        for &rb in &bases {
            for &cb in &bases {
                for i in 0..g {
                    for j in 0..g {
                        block[i * g + j] = rho[(rb | self.offsets[i]) * d + (cb | self.offsets[j])];
                    }
                }
                for a in 0..g * g {
                    let mut acc = ZERO;
                    for (b, x) in block.iter().enumerate() {
                        acc += s[(a, b)] * x;
                    }
                    out[(rb | self.offsets[a / g]) * d + (cb | self.offsets[a % g])] = acc;
                }
            }
        }
        out
    }
}

/// Superoperator `sum_k K (x) conj(K)` of a Kraus set on a `g`-dimensional space.
pub(crate) fn superoperator(kraus: &[ComplexMatrix]) -> ComplexMatrix {
    let g = kraus.first().map_or(1, |k| k.rows());
    let mut s = ComplexMatrix::zeros(g * g, g * g);
    for k in kraus {
        for ip in 0..g {
            for jp in 0..g {
                for i in 0..g {
                    let a = k[(ip, i)];
                    if a == ZERO {
                        continue;
                    }
                    for j in 0..g {
                        s[(ip * g + jp, i * g + j)] += a * k[(jp, j)].conj();
                    }
                }
            }
        }
    }
    s
}

/// Reduced density matrix over `keep` (ascending order) from a full `2^n` buffer.
pub(crate) fn partial_trace(rho: &[C64], n_qubits: usize, keep: &[usize]) -> Vec<C64> {
    let traced: Vec<usize> = (0..n_qubits).filter(|q| !keep.contains(q)).collect();
    let keep_place = Placement::new(n_qubits, keep).expect("validated by caller");
    let traced_place = Placement::new(n_qubits, &traced).expect("complement is valid");
    let d = 1usize << n_qubits;
    let kd = keep_place.offsets.len();
    let mut out = vec![ZERO; kd * kd];
    for i in 0..kd {
        for j in 0..kd {
            let mut acc = ZERO;
            for &t in &traced_place.offsets {
                let r = keep_place.offsets[i] | t;
                let c = keep_place.offsets[j] | t;
                acc += rho[r * d + c];
            }
            out[i * kd + j] = acc;
        }
    }
    out
}

/// Moves qubit `perm[k]` of the source register to position `k`.
pub(crate) fn permuted_index(index: usize, n_qubits: usize, perm: &[usize]) -> usize {
    let mut out = 0;
    for (k, &src) in perm.iter().enumerate() {
        let bit = (index >> (n_qubits - 1 - src)) & 1;
        out |= bit << (n_qubits - 1 - k);
    }
    out
}
