//! Device-dependent state estimation.
//!
//! Linear inversion solves the tomography system through the pseudoinverse
//! of the design matrix and may return a non-physical estimate; the diluted
//! maximum-likelihood iteration minimizes the Kullback-Leibler divergence
//! over physical states and is also used as the second stage of the hybrid
//! device-independent pipeline.

use crate::error::{Error, Result};
use crate::numerics::eig::hermitian_eig;
use crate::numerics::mat::ComplexMatrix;
use crate::numerics::pinv::{numerical_rank, pseudoinverse, DEFAULT_PINV_TOL};
use crate::scalar::Scalar;
use crate::scenario::TomographyDesign;
use crate::simulation::DensityMatrix;

/// Kullback-Leibler divergence `sum_i f(i) log(f(i) / p(i))`.
///
/// Terms with `f(i) = 0` contribute nothing; a positive `f(i)` against a
/// vanishing `p(i)` yields positive infinity.
pub fn kl_divergence<T: Scalar>(f: &[T], p: &[T]) -> Result<T> {
    if f.len() != p.len() {
        return Err(Error::DimensionMismatch {
            expected: f.len(),
            got: p.len(),
        });
    }
    let tol = T::DISTRIBUTION_TOL;
    for (&fi, &pi) in f.iter().zip(p) {
        if fi < T::zero() || pi < T::zero() {
            return Err(Error::InvalidArgument(
                "distributions must be entrywise nonnegative".into(),
            ));
        }
    }
    let sum_f: T = f.iter().copied().sum();
    let sum_p: T = p.iter().copied().sum();
    if (sum_f - T::one()).abs() > tol || (sum_p - T::one()).abs() > tol {
        return Err(Error::InvalidArgument(format!(
            "distributions must sum to 1 (got {sum_f} and {sum_p})"
        )));
    }
    Ok(kl_unchecked(f, p))
}

/// KL sum without the input validation; callers guarantee the contract.
fn kl_unchecked<T: Scalar>(f: &[T], p: &[T]) -> T {
    let floor = T::real(1e-300);
    let mut acc = T::zero();
    for (&fi, &pi) in f.iter().zip(p) {
        if fi > T::zero() {
            if pi <= floor {
                return T::infinity();
            }
            acc += fi * (fi / pi).ln();
        }
    }
    acc
}

/// Linear-inversion output: Hermitian with unit trace, possibly indefinite.
#[derive(Debug, Clone)]
pub struct RawStateEstimate<T> {
    pub matrix: ComplexMatrix<T>,
    /// How far the identity component of the solution was from 1 before it
    /// was pinned back.
    pub trace_correction: T,
}

impl<T: Scalar> RawStateEstimate<T> {
    pub fn min_eigenvalue(&self) -> Result<T> {
        Ok(hermitian_eig(&self.matrix)?.min_eigenvalue())
    }
}

/// Least-squares tomography: `T = B^+ f`, `rho = (1/4) sum_i T_i Gamma_i`.
pub fn linear_inversion<T: Scalar>(
    frequencies: &[T],
    design: &TomographyDesign<T>,
) -> Result<RawStateEstimate<T>> {
    if frequencies.len() != design.len() {
        return Err(Error::DimensionMismatch {
            expected: design.len(),
            got: frequencies.len(),
        });
    }
    let rank = numerical_rank(&design.b_matrix, T::real(1e-10))?;
    if rank != design.b_matrix.cols() {
        return Err(Error::RankDeficient(rank, design.b_matrix.cols()));
    }
    let pinv = pseudoinverse(&design.b_matrix, T::real(DEFAULT_PINV_TOL))?;
    let mut t = pinv.mul_vec(frequencies);

    // The identity component is the trace; pin it to 1 and record the drift.
    let trace_correction = (t[0] - T::one()).abs();
    t[0] = T::one();

    let quarter = T::real(0.25);
    let mut rho = ComplexMatrix::<T>::zeros(4, 4);
    for (ti, gamma) in t.iter().zip(&design.pauli_basis) {
        rho = &rho + &gamma.scale_real(*ti * quarter);
    }
    Ok(RawStateEstimate {
        matrix: rho.hermitize(),
        trace_correction,
    })
}

/// Tuning knobs of the diluted maximum-likelihood iteration.
#[derive(Debug, Clone)]
pub struct MleConfig {
    /// Starting dilution parameter.
    pub epsilon0: f64,
    /// Terminate once the dilution parameter falls below this.
    pub epsilon_min: f64,
    /// Minimal KL improvement that still counts as progress once the
    /// dilution parameter has bottomed out.
    pub kl_tol: f64,
    /// Hard cap on candidate evaluations.
    pub max_iters: usize,
    /// Floor applied to predicted probabilities inside the update ratio.
    pub prob_floor: f64,
    /// Record the KL value of every accepted iterate.
    pub record_kl_trace: bool,
}

impl Default for MleConfig {
    fn default() -> Self {
        Self {
            epsilon0: 1e6,
            epsilon_min: 1e-10,
            kl_tol: 1e-14,
            max_iters: 100_000,
            prob_floor: 1e-15,
            record_kl_trace: false,
        }
    }
}

/// Result of a maximum-likelihood estimation.
#[derive(Debug, Clone)]
pub struct MleResult<T> {
    pub state: DensityMatrix<T>,
    pub final_kl: T,
    pub iterations: usize,
    pub final_epsilon: T,
    pub converged: bool,
    /// KL values of the accepted iterates (empty unless requested).
    pub kl_trace: Vec<T>,
}

/// Diluted iterative maximum-likelihood estimation.
///
/// Starting from the maximally mixed state, each step forms
/// `R = sum_i (f_i / P_i) M_i` and proposes
/// `rho' = N[(1 + eps R) rho (1 + eps R)]`. A proposal is accepted only if
/// the KL divergence strictly decreases; otherwise the dilution parameter
/// is divided by 10 and the step is retried from the same state.
pub fn mle_estimate<T: Scalar>(
    frequencies: &[T],
    design: &TomographyDesign<T>,
    config: &MleConfig,
) -> Result<MleResult<T>> {
    if frequencies.len() != design.len() {
        return Err(Error::DimensionMismatch {
            expected: design.len(),
            got: frequencies.len(),
        });
    }
    if frequencies.iter().any(|&f| f < T::zero()) {
        return Err(Error::InvalidArgument(
            "frequencies must be nonnegative".into(),
        ));
    }
    let sum_f: T = frequencies.iter().copied().sum();
    if (sum_f - T::one()).abs() > T::DISTRIBUTION_TOL {
        return Err(Error::InvalidArgument(format!(
            "frequencies must sum to 1, got {sum_f}"
        )));
    }

    let floor = T::real(config.prob_floor);
    let identity = ComplexMatrix::<T>::identity(4);
    let predicted = |rho: &ComplexMatrix<T>| -> Vec<T> {
        design
            .povm
            .iter()
            .map(|(_, m)| m.trace_product(rho).re.max(floor))
            .collect()
    };

    let mut rho = identity.scale_real(T::real(0.25));
    let mut probs = predicted(&rho);
    let mut kl = kl_unchecked(frequencies, &probs);
    let mut epsilon = T::real(config.epsilon0);
    let epsilon_min = T::real(config.epsilon_min);
    let kl_tol = T::real(config.kl_tol);
    // The improvement-based stop only applies once dilution has bottomed out.
    let at_minimal_epsilon = |eps: T| -> bool { eps <= epsilon_min * T::real(1.0 + 1e-9) };

    let mut trace = Vec::new();
    if config.record_kl_trace {
        trace.push(kl);
    }

    let mut iterations = 0usize;
    let mut converged = false;
    // R depends only on the current state; recompute it only after moves.
    let mut r_op = build_r_operator(frequencies, &probs, design);
    while iterations < config.max_iters {
        iterations += 1;
        let step = &identity + &r_op.scale_real(epsilon);
        let candidate_raw = step.matmul(&rho).matmul(&step).hermitize();
        let trace_val = candidate_raw.trace().re;
        let candidate = candidate_raw.scale_real(T::one() / trace_val);
        let cand_probs = predicted(&candidate);
        let cand_kl = kl_unchecked(frequencies, &cand_probs);

        if cand_kl < kl {
            let improvement = kl - cand_kl;
            rho = candidate;
            probs = cand_probs;
            kl = cand_kl;
            if config.record_kl_trace {
                trace.push(kl);
            }
            if improvement < kl_tol && at_minimal_epsilon(epsilon) {
                converged = true;
                break;
            }
            r_op = build_r_operator(frequencies, &probs, design);
        } else {
            epsilon /= T::real(10.0);
            if epsilon < epsilon_min {
                converged = true;
                break;
            }
        }
    }

    let state = DensityMatrix::new(clean_state(&rho))?;
    Ok(MleResult {
        state,
        final_kl: kl,
        iterations,
        final_epsilon: epsilon,
        converged,
        kl_trace: trace,
    })
}

fn build_r_operator<T: Scalar>(
    frequencies: &[T],
    probs: &[T],
    design: &TomographyDesign<T>,
) -> ComplexMatrix<T> {
    let mut r = ComplexMatrix::<T>::zeros(4, 4);
    for ((_, m), (&f, &p)) in design.povm.iter().zip(frequencies.iter().zip(probs)) {
        if f > T::zero() {
            r = &r + &m.scale_real(f / p);
        }
    }
    r
}

/// Clip the tiniest negative eigenvalues produced by rounding and restore
/// unit trace, leaving anything beyond the PSD tolerance to the validator.
fn clean_state<T: Scalar>(rho: &ComplexMatrix<T>) -> ComplexMatrix<T> {
    let trace = rho.trace().re;
    let normalized = rho.scale_real(T::one() / trace).hermitize();
    if let Ok(eig) = hermitian_eig(&normalized) {
        let min = eig.min_eigenvalue();
        if min < T::zero() && min >= -T::real(1e-10) {
            let clipped = eig.map_eigenvalues(|v| v.max(T::zero()));
            let tr = clipped.trace().re;
            return clipped.scale_real(T::one() / tr).hermitize();
        }
    }
    normalized
}
