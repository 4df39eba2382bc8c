//! Moore-Penrose pseudoinverse of real matrices.
//!
//! Built from the eigendecomposition of `A^T A`: with `A = U S V^T`,
//! `A^T A = V S^2 V^T` and `A^+ = V S^{+2} V^T A^T`. Singular values below
//! `relative_tolerance * sigma_max` are treated as zero. Fine for the
//! well-conditioned 36x16 / 17x16 design matrices used here.

use crate::error::Result;
use crate::numerics::eig::hermitian_eig;
use crate::numerics::mat::{ComplexMatrix, RealMatrix};
use crate::scalar::Scalar;

/// Default relative singular-value cutoff.
pub const DEFAULT_PINV_TOL: f64 = 1e-12;

/// Moore-Penrose pseudoinverse `A^+` (dimensions `cols x rows`).
pub fn pseudoinverse<T: Scalar>(a: &RealMatrix<T>, relative_tolerance: T) -> Result<RealMatrix<T>> {
    let at = a.transpose();
    let gram = at.matmul(a); // A^T A, symmetric PSD, n x n
    let eig = hermitian_eig(&ComplexMatrix::from_real(&gram))?;

    let n = gram.rows();
    let lambda_max = eig.max_eigenvalue().max(T::zero());
    let sigma_max = lambda_max.sqrt();
    let cutoff = sigma_max * relative_tolerance;

    // V diag(1/lambda | sigma > cutoff) V^T, all real since A^T A is real.
    let mut filtered = RealMatrix::<T>::zeros(n, n);
    for k in 0..n {
        let lambda = eig.values[k];
        let sigma = lambda.max(T::zero()).sqrt();
        if sigma <= cutoff || sigma == T::zero() {
            continue;
        }
        let w = T::one() / lambda;
        for i in 0..n {
            let vi = eig.vectors[(i, k)].re;
            for j in 0..n {
                let vj = eig.vectors[(j, k)].re;
                filtered[(i, j)] += w * vi * vj;
            }
        }
    }
    Ok(filtered.matmul(&at))
}

/// Number of singular values above `relative_tolerance * sigma_max`.
///
/// Squaring into the Gram matrix puts the eigenvalue noise floor at about
/// machine epsilon relative to `lambda_max`, so the cutoff never goes below
/// that floor.
pub fn numerical_rank<T: Scalar>(a: &RealMatrix<T>, relative_tolerance: T) -> Result<usize> {
    let gram = a.transpose().matmul(a);
    let eig = hermitian_eig(&ComplexMatrix::from_real(&gram))?;
    let lambda_max = eig.max_eigenvalue().max(T::zero());
    if lambda_max == T::zero() {
        return Ok(0);
    }
    let floor = T::epsilon() * T::real(64.0);
    let cutoff = lambda_max * (relative_tolerance * relative_tolerance).max(floor);
    Ok(eig.values.iter().filter(|&&l| l > cutoff).count())
}
