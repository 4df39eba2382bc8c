//! Cyclic Jacobi eigensolver for complex Hermitian matrices.
//!
//! Each sweep visits every off-diagonal pivot (p, q) and applies a unitary
//! plane rotation that zeroes it. For a Hermitian pivot `a_pq = |a| e^{i phi}`
//! the rotation is the real Jacobi rotation composed with the phase
//! `diag(1, e^{-i phi})` on the pivot plane. Matrices here never exceed
//! 32x32, where Jacobi is both accurate and fast enough.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::numerics::mat::ComplexMatrix;
use crate::scalar::Scalar;

/// Convergence: off-diagonal Frobenius norm relative to the full norm.
const OFFDIAG_REL_TOL: f64 = 1e-13;
const MAX_SWEEPS: usize = 100;

/// Eigendecomposition `M = V diag(values) V^dagger` of a Hermitian matrix.
///
/// Eigenvalues are real and sorted ascending; `vectors` holds the
/// corresponding unitary eigenvector columns.
#[derive(Debug, Clone)]
pub struct EigenDecomposition<T> {
    pub values: Vec<T>,
    pub vectors: ComplexMatrix<T>,
}

impl<T: Scalar> EigenDecomposition<T> {
    pub fn min_eigenvalue(&self) -> T {
        self.values[0]
    }

    pub fn max_eigenvalue(&self) -> T {
        self.values[self.values.len() - 1]
    }

    /// Rebuild `V diag(values) V^dagger`.
    pub fn reconstruct(&self) -> ComplexMatrix<T> {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            for i in 0..n {
                scaled[(i, j)] *= self.values[j];
            }
        }
        scaled.matmul(&self.vectors.adjoint())
    }

    /// Apply a function to the eigenvalues and rebuild the operator.
    pub fn map_eigenvalues(&self, f: impl Fn(T) -> T) -> ComplexMatrix<T> {
        let mapped = Self {
            values: self.values.iter().map(|&v| f(v)).collect(),
            vectors: self.vectors.clone(),
        };
        mapped.reconstruct()
    }
}

fn offdiag_frobenius<T: Scalar>(m: &ComplexMatrix<T>) -> T {
    let n = m.rows();
    let mut acc = T::zero();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += m[(i, j)].norm_sqr();
            }
        }
    }
    acc.sqrt()
}

fn frobenius<T: Scalar>(m: &ComplexMatrix<T>) -> T {
    m.data()
        .iter()
        .map(|z| z.norm_sqr())
        .fold(T::zero(), |a, b| a + b)
        .sqrt()
}

/// Eigendecomposition of a complex Hermitian matrix.
///
/// Fails on non-square or non-Hermitian input. The input is symmetrized
/// once up front so that sub-tolerance asymmetry cannot bias the sweep.
pub fn hermitian_eig<T: Scalar>(m: &ComplexMatrix<T>) -> Result<EigenDecomposition<T>> {
    m.require_hermitian()?;
    let n = m.rows();
    let mut a = m.hermitize();
    let mut v = ComplexMatrix::<T>::identity(n);

    let norm = frobenius(&a);
    // The nominal relative tolerance, floored at what the scalar type can
    // actually resolve.
    let tol = T::real(OFFDIAG_REL_TOL).max(T::epsilon() * T::real(0.5)) * norm;

    if n > 1 && norm > T::zero() {
        let mut converged = false;
        for _sweep in 0..MAX_SWEEPS {
            if offdiag_frobenius(&a) <= tol {
                converged = true;
                break;
            }
            for p in 0..n - 1 {
                for q in p + 1..n {
                    rotate(&mut a, &mut v, p, q);
                }
            }
        }
        if !converged && offdiag_frobenius(&a) > tol {
            return Err(Error::EigNoConvergence {
                sweeps: MAX_SWEEPS,
                offdiag: offdiag_frobenius(&a).to_f64().unwrap_or(f64::NAN),
            });
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<T> = (0..n).map(|i| a[(i, i)].re).collect();
    order.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).expect("finite eigenvalues"));

    let values: Vec<T> = order.iter().map(|&i| diag[i]).collect();
    let mut vectors = ComplexMatrix::<T>::zeros(n, n);
    for (new_col, &old_col) in order.iter().enumerate() {
        for row in 0..n {
            vectors[(row, new_col)] = v[(row, old_col)];
        }
    }

    Ok(EigenDecomposition { values, vectors })
}

/// One Jacobi rotation zeroing the pivot `a[p][q]`, accumulated into `v`.
fn rotate<T: Scalar>(a: &mut ComplexMatrix<T>, v: &mut ComplexMatrix<T>, p: usize, q: usize) {
    let apq = a[(p, q)];
    let mag = apq.norm();
    if mag == T::zero() {
        return;
    }
    // Phase that makes the pivot real: conj(phase) * a_pq = |a_pq|.
    let phase = apq / mag;

    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    let theta = (aqq - app) / (T::real(2.0) * mag);
    // Smaller-angle root of t^2 + 2 theta t - 1 = 0.
    let t = if theta >= T::zero() {
        T::one() / (theta + (T::one() + theta * theta).sqrt())
    } else {
        -T::one() / (-theta + (T::one() + theta * theta).sqrt())
    };
    let c = T::one() / (T::one() + t * t).sqrt();
    let s = t * c;

    // Unitary rotation on the (p, q) plane:
    //   U[p][p] = c         U[p][q] = s
    //   U[q][p] = -s e^-ip  U[q][q] = c e^-ip
    let cc = Complex::new(c, T::zero());
    let sc = Complex::new(s, T::zero());
    let phase_conj = phase.conj();

    let n = a.rows();
    // Column update A <- A U.
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * cc - akq * sc * phase_conj;
        a[(k, q)] = akp * sc + akq * cc * phase_conj;
    }
    // Row update A <- U^dagger A.
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = apk * cc - aqk * sc * phase;
        a[(q, k)] = apk * sc + aqk * cc * phase;
    }
    // The pivot is zero by construction; pin it to keep the sweep clean.
    a[(p, q)] = Complex::new(T::zero(), T::zero());
    a[(q, p)] = Complex::new(T::zero(), T::zero());
    a[(p, p)] = Complex::new(a[(p, p)].re, T::zero());
    a[(q, q)] = Complex::new(a[(q, q)].re, T::zero());

    // Accumulate V <- V U.
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * cc - vkq * sc * phase_conj;
        v[(k, q)] = vkp * sc + vkq * cc * phase_conj;
    }
}

/// Sum of absolute eigenvalues of a Hermitian matrix (Schatten 1-norm).
pub fn trace_norm<T: Scalar>(m: &ComplexMatrix<T>) -> Result<T> {
    let eig = hermitian_eig(m)?;
    Ok(eig
        .values
        .iter()
        .map(|&v| v.abs())
        .fold(T::zero(), |a, b| a + b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng::Prng;

    type M = ComplexMatrix<f64>;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn identity_has_unit_eigenvalues() {
        let eig = hermitian_eig(&M::identity(2)).unwrap();
        assert_eq!(eig.values, vec![1.0, 1.0]);
    }

    #[test]
    fn diagonal_matrix_sorted_ascending() {
        let m = M::from_rows(&[vec![(3.0, 0.0), (0.0, 0.0)], vec![(0.0, 0.0), (-1.0, 0.0)]]);
        let eig = hermitian_eig(&m).unwrap();
        assert_eq!(eig.values, vec![-1.0, 3.0]);
    }

    #[test]
    fn pauli_x_eigenvalues() {
        // Characteristic polynomial of [[0,1],[1,0]] is l^2 - 1, roots -1 and 1.
        let m = M::from_rows(&[vec![(0.0, 0.0), (1.0, 0.0)], vec![(1.0, 0.0), (0.0, 0.0)]]);
        let eig = hermitian_eig(&m).unwrap();
        assert!((eig.values[0] + 1.0).abs() < 1e-14);
        assert!((eig.values[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = M::from_rows(&[vec![(0.0, 0.0), (1.0, 0.0)], vec![(0.5, 0.0), (0.0, 0.0)]]);
        assert!(hermitian_eig(&m).is_err());
    }

    #[test]
    fn rejects_non_square() {
        let m = M::zeros(2, 3);
        assert!(hermitian_eig(&m).is_err());
    }

    fn random_hermitian(rng: &mut Prng, n: usize) -> M {
        let mut m = M::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = c(rng.next_f64() * 2.0 - 1.0, 0.0);
            for j in i + 1..n {
                let z = c(rng.next_f64() * 2.0 - 1.0, rng.next_f64() * 2.0 - 1.0);
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        m
    }

    #[test]
    fn random_hermitian_reconstruction_and_orthonormality() {
        let mut rng = Prng::new(2024);
        for &n in &[4usize, 16] {
            for _ in 0..100 {
                let m = random_hermitian(&mut rng, n);
                let eig = hermitian_eig(&m).unwrap();
                let resid = (&eig.reconstruct() - &m).max_abs();
                let scale = 1.0_f64.max(m.max_abs());
                assert!(resid <= 1e-10 * scale, "residual {resid} at n={n}");
                let vtv = eig.vectors.adjoint().matmul(&eig.vectors);
                let orth = (&vtv - &M::identity(n)).max_abs();
                assert!(orth <= 1e-10, "orthonormality {orth} at n={n}");
                for w in eig.values.windows(2) {
                    assert!(w[0] <= w[1]);
                }
            }
        }
    }

    #[test]
    fn trace_norm_examples() {
        assert_eq!(trace_norm(&M::zeros(3, 3)).unwrap(), 0.0);
        let m = M::from_rows(&[vec![(0.5, 0.0), (0.0, 0.0)], vec![(0.0, 0.0), (-0.5, 0.0)]]);
        assert!((trace_norm(&m).unwrap() - 1.0).abs() < 1e-14);
        // rho - rho vanishes for any rho
        let mut rng = Prng::new(5);
        let r = random_hermitian(&mut rng, 4);
        assert!(trace_norm(&(&r - &r)).unwrap() < 1e-15);
    }
}
