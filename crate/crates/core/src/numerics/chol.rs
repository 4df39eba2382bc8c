//! Cholesky factorization of Hermitian positive-definite matrices.
//!
//! This is the positive-definiteness probe and log-det kernel of the
//! barrier solver: factorization failure doubles as the infeasibility
//! signal, so failure is reported as `None` rather than an error.

use num_complex::Complex;

use crate::numerics::mat::ComplexMatrix;
use crate::scalar::Scalar;

/// Lower-triangular factor `L` with `M = L L^dagger`.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    l: ComplexMatrix<T>,
}

impl<T: Scalar> Cholesky<T> {
    /// Factor a Hermitian matrix; `None` if it is not positive definite.
    pub fn new(m: &ComplexMatrix<T>) -> Option<Self> {
        debug_assert!(m.is_square());
        let n = m.rows();
        let mut l = ComplexMatrix::<T>::zeros(n, n);
        for j in 0..n {
            let mut d = m[(j, j)].re;
            for k in 0..j {
                d -= l[(j, k)].norm_sqr();
            }
            if !(d > T::zero()) || !d.is_finite() {
                return None;
            }
            let djj = d.sqrt();
            l[(j, j)] = Complex::new(djj, T::zero());
            for i in j + 1..n {
                let mut s = m[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = s / djj;
            }
        }
        Some(Self { l })
    }

    /// `log det M = 2 sum_j log L[j][j]`.
    pub fn log_det(&self) -> T {
        let n = self.l.rows();
        let two = T::real(2.0);
        (0..n)
            .map(|j| self.l[(j, j)].re.ln())
            .fold(T::zero(), |a, b| a + b)
            * two
    }

    /// Full inverse `M^{-1}`, Hermitian.
    pub fn inverse(&self) -> ComplexMatrix<T> {
        let n = self.l.rows();
        let mut inv = ComplexMatrix::<T>::zeros(n, n);
        let zero = Complex::new(T::zero(), T::zero());
        let one = Complex::new(T::one(), T::zero());
        // Solve L y = e_col, then L^dagger x = y, column by column.
        let mut y = vec![zero; n];
        for col in 0..n {
            for i in 0..n {
                let mut s = if i == col { one } else { zero };
                for (k, &yk) in y.iter().enumerate().take(i) {
                    s -= self.l[(i, k)] * yk;
                }
                y[i] = s / self.l[(i, i)].re;
            }
            for i in (0..n).rev() {
                let mut s = y[i];
                for k in i + 1..n {
                    s -= self.l[(k, i)].conj() * inv[(k, col)];
                }
                inv[(i, col)] = s / self.l[(i, i)].re;
            }
        }
        // Symmetrize away the last bits of rounding noise.
        inv.hermitize()
    }
}
