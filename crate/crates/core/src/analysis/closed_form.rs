//! Closed-form pass probabilities and the bound function `f`.

use crate::qcore::{BlochVector, QuantumState, C64, STATE_TOL};
use crate::{Error, Result};

/// Pass probability `(2 + X X' + Z Z') / 4` of one intercept/resend on one
/// side of a pair with measure vector `x` and resend vector `xp`.
pub fn pb_single_side(x: &BlochVector, xp: &BlochVector) -> f64 {
    (2.0 + x.x() * xp.x() + x.z() * xp.z()) / 4.0
}

/// Coherence-free part `g` of the pair pass probability.
pub fn pair_g(v: &[BlochVector; 4]) -> f64 {
    let [x1, x2, x3, x4] = v;
    0.5 + (x1.x() * x3.x() + x1.z() * x3.z()) * (x2.x() * x4.x() + x2.z() * x4.z()) / 8.0
}

/// Coefficient `h` of the payload coherence `alpha beta* + alpha* beta`.
pub fn pair_h(v: &[BlochVector; 4]) -> f64 {
    let [x1, x2, x3, x4] = v;
    -x1.y() * x2.y() * (x3.z() - x3.x()) * (x4.z() - x4.x()) / 8.0
}

/// Pass probability of a one-qubit payload `alpha|0> + beta|1>` under
/// independent intercept/resend on both qubits of its pair, with vectors
/// ordered `[x1, x2, x3, x4]` (measure Q, measure S, resend Q, resend S).
pub fn pb_pair(alpha: C64, beta: C64, v: &[BlochVector; 4]) -> Result<f64> {
    let norm = alpha.norm_sqr() + beta.norm_sqr();
    if (norm - 1.0).abs() > STATE_TOL {
        return Err(Error::AmplitudesNotNormalized(norm));
    }
    Ok(pair_g(v) + 2.0 * (alpha * beta.conj()).re * pair_h(v))
}

/// `alpha beta* + alpha* beta` generalized to a one-qubit density matrix.
pub fn coherence(rho: &QuantumState) -> Result<f64> {
    if rho.n_qubits() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: rho.n_qubits(),
        });
    }
    Ok(2.0 * rho.density_matrix()[(0, 1)].re)
}

/// Cross-pair coherences `(s1, s2, s3)` of a two-qubit payload: the sums of
/// `c_ij c*_{i j'}` with the second, first, and both indices flipped.
pub fn entangled_coherences(rho: &QuantumState) -> Result<[f64; 3]> {
    if rho.n_qubits() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: rho.n_qubits(),
        });
    }
    let m = rho.density_matrix();
    let sum = |flip: usize| (0..4).map(|a| m[(a, a ^ flip)].re).sum::<f64>();
    Ok([sum(1), sum(2), sum(3)])
}

/// Two attacked pairs with per-pair `(g, h)` factors on a two-qubit payload.
pub fn pb_entangled_closed_form(rho: &QuantumState, first: (f64, f64), second: (f64, f64)) -> Result<f64> {
    let [s1, s2, s3] = entangled_coherences(rho)?;
    let (g, h) = first;
    let (gp, hp) = second;
    Ok(g * gp + s1 * g * hp + s2 * h * gp + s3 * h * hp)
}

fn check_non_negative(v: &[BlochVector; 4]) -> Result<()> {
    let tol = 1e-12;
    if v.iter().flat_map(|b| b.components()).any(|c| c < -tol) {
        return Err(Error::NegativeComponent);
    }
    Ok(())
}

/// `(X1X3+Z1Z3)(X2X4+Z2Z4) + Y1Y2(X3+Z3)(X4+Z4)` on non-negative unit vectors.
pub fn f_value(v: &[BlochVector; 4]) -> Result<f64> {
    check_non_negative(v)?;
    let (a, b) = ab_vectors(v);
    Ok(a[0] * b[0] + a[1] * b[1])
}

/// The two-component factors `A = (X1X3+Z1Z3, Y1(X3+Z3))` and
/// `B = (X2X4+Z2Z4, Y2(X4+Z4))` with `f = A . B`.
pub fn ab_vectors(v: &[BlochVector; 4]) -> ([f64; 2], [f64; 2]) {
    let [x1, x2, x3, x4] = v;
    (
        [x1.x() * x3.x() + x1.z() * x3.z(), x1.y() * (x3.x() + x3.z())],
        [x2.x() * x4.x() + x2.z() * x4.z(), x2.y() * (x4.x() + x4.z())],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn z() -> BlochVector {
        BlochVector::plus_z()
    }

    fn random_vector<R: Rng>(rng: &mut R, non_negative: bool) -> BlochVector {
        loop {
            let mut c: [f64; 3] = [0.0; 3];
            for x in c.iter_mut() {
                *x = rng.random_range(-1.0..1.0);
            }
            if non_negative {
                c = c.map(f64::abs);
            }
            if let Ok(v) = BlochVector::normalized(c[0], c[1], c[2]) {
                return v;
            }
        }
    }

    #[test]
    fn single_side_examples() {
        assert_eq!(pb_single_side(&z(), &z()), 0.75);
        assert_eq!(pb_single_side(&z(), &z().neg()), 0.25);
        assert_eq!(pb_single_side(&BlochVector::plus_y(), &BlochVector::plus_y()), 0.5);
    }

    #[test]
    fn pair_examples() {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        let h = C64::new(FRAC_1_SQRT_2, 0.0);
        assert_eq!(pb_pair(one, zero, &[z(), z(), z(), z()]).unwrap(), 0.625);
        assert_eq!(pb_pair(h, h, &[z(), z(), z(), z()]).unwrap(), 0.625);
        let x = BlochVector::plus_x();
        // Equal x-axis vectors on S keep the factor X2X4 + Z2Z4 at 1.
        assert_eq!(pb_pair(one, zero, &[z(), x, z(), x]).unwrap(), 0.625);
        assert_eq!(pb_pair(one, zero, &[z(), x, z(), z()]).unwrap(), 0.5);
        assert!(matches!(
            pb_pair(one, one, &[z(), z(), z(), z()]),
            Err(Error::AmplitudesNotNormalized(_))
        ));
    }

    #[test]
    fn f_examples() {
        assert_eq!(f_value(&[z(), z(), z(), z()]).unwrap(), 1.0);
        let y = BlochVector::plus_y();
        let b = BlochVector::breidbart();
        assert!((f_value(&[y, y, b, b]).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(f_value(&[z().neg(), z(), z(), z()]), Err(Error::NegativeComponent));
    }

    #[test]
    fn ab_vector_chain_holds_pointwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10_000 {
            let v = [0; 4].map(|_| random_vector(&mut rng, true));
            let (a, b) = ab_vectors(&v);
            let na2 = a[0] * a[0] + a[1] * a[1];
            let nb2 = b[0] * b[0] + b[1] * b[1];
            let tol = 1e-12;
            assert!(na2 <= 1.0 + v[0].y() * v[0].y() + tol);
            assert!(na2 <= 2.0 + tol && nb2 <= 2.0 + tol);
            assert!(nb2 <= 1.0 + v[1].y() * v[1].y() + tol);
            let f = f_value(&v).unwrap();
            assert!(f <= na2.sqrt() * nb2.sqrt() + tol);
            assert!(f <= 2.0 + tol);
        }
    }

    #[test]
    fn pair_value_never_exceeds_three_quarters_on_random_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let v = [0; 4].map(|_| random_vector(&mut rng, false));
            let psi = QuantumState::haar_qubit(&mut rng);
            let a = psi.amplitudes().unwrap();
            assert!(pb_pair(a[0], a[1], &v).unwrap() <= 0.75 + 1e-12);
        }
    }

    #[test]
    fn entangled_coherences_of_bell_state() {
        let h = C64::new(FRAC_1_SQRT_2, 0.0);
        let zero = C64::new(0.0, 0.0);
        let bell = QuantumState::from_amplitudes(vec![h, zero, zero, h]).unwrap();
        let s = entangled_coherences(&bell).unwrap();
        assert!(s[0].abs() < 1e-15 && s[1].abs() < 1e-15 && (s[2] - 1.0).abs() < 1e-15);
    }
}
