//! Dense complex-matrix kernels and deterministic randomness used by the
//! rest of the crate: Hermitian eigendecomposition, Cholesky, Kronecker
//! products, trace norms, pseudoinverse and Poisson sampling.

pub mod chol;
pub mod eig;
pub mod mat;
pub mod pinv;
pub mod rng;

pub use chol::Cholesky;
pub use eig::{hermitian_eig, trace_norm, EigenDecomposition};
pub use mat::{kron, ComplexMatrix, RealMatrix};
pub use pinv::{numerical_rank, pseudoinverse, DEFAULT_PINV_TOL};
pub use rng::{poisson_sample, Prng};
