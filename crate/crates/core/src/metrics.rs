//! State-quality figures of merit used by the benchmark.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::numerics::eig::trace_norm;
use crate::numerics::mat::ComplexMatrix;
use crate::scalar::Scalar;

/// Overlap `<psi| rho |psi>` of an estimate with a pure target state.
///
/// `rho` may be any Hermitian matrix (linear-inversion estimates included),
/// so the result can leave `[0, 1]`. The imaginary part must vanish.
pub fn fidelity_pure<T: Scalar>(rho: &ComplexMatrix<T>, target: &[Complex<T>]) -> Result<T> {
    if rho.rows() != target.len() || !rho.is_square() {
        return Err(Error::DimensionMismatch {
            expected: target.len(),
            got: rho.rows(),
        });
    }
    let norm_sq: T = target.iter().map(|z| z.norm_sqr()).sum();
    if (norm_sq - T::one()).abs() > T::STRUCTURAL_TOL {
        return Err(Error::InvalidArgument(format!(
            "target state vector is not normalized (norm^2 = {norm_sq})"
        )));
    }
    let overlap = rho.quadratic_form(target);
    if overlap.im.abs() > T::PSD_TOL {
        return Err(Error::NotHermitian(overlap.im.to_f64().unwrap_or(f64::NAN)));
    }
    Ok(overlap.re)
}

/// `|| rho1 - rho2 ||_1`, the sum of absolute eigenvalues of the difference
/// (no 1/2 prefactor).
pub fn trace_distance<T: Scalar>(rho1: &ComplexMatrix<T>, rho2: &ComplexMatrix<T>) -> Result<T> {
    trace_norm(&(rho1 - rho2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::{make_test_state, target_ket, DensityMatrix, TestStateKind};

    #[test]
    fn fidelity_of_target_with_itself_is_one() {
        let psi = target_ket::<f64>(TestStateKind::Tau2);
        let rho = DensityMatrix::from_pure(&psi).unwrap();
        let f = fidelity_pure(rho.matrix(), &psi).unwrap();
        assert!((f - 1.0).abs() < 1e-14);
    }

    #[test]
    fn fidelity_of_maximally_mixed_is_quarter() {
        let psi = target_ket::<f64>(TestStateKind::Tau1);
        let rho = DensityMatrix::<f64>::maximally_mixed();
        let f = fidelity_pure(rho.matrix(), &psi).unwrap();
        assert!((f - 0.25).abs() < 1e-14);
    }

    #[test]
    fn fidelity_of_tau2_is_mixture_value() {
        let tau2 = make_test_state::<f64>(TestStateKind::Tau2);
        let psi = target_ket::<f64>(TestStateKind::Tau2);
        let f = fidelity_pure(tau2.matrix(), &psi).unwrap();
        assert!((f - 0.99625).abs() < 1e-12);
    }

    #[test]
    fn fidelity_rejects_unnormalized_target() {
        let rho = DensityMatrix::<f64>::maximally_mixed();
        let bad = vec![Complex::new(1.0, 0.0); 4];
        assert!(fidelity_pure(rho.matrix(), &bad).is_err());
    }

    #[test]
    fn trace_distance_identical_states() {
        let tau = make_test_state::<f64>(TestStateKind::Tau3);
        let d = trace_distance(tau.matrix(), tau.matrix()).unwrap();
        assert!(d < 1e-15);
    }

    #[test]
    fn trace_distance_orthogonal_pure_states() {
        // |00><00| vs |11><11|: the difference has eigenvalues +1 and -1.
        let zero = Complex::new(0.0, 0.0);
        let one = Complex::new(1.0, 0.0);
        let a = DensityMatrix::from_pure(&[one, zero, zero, zero]).unwrap();
        let b = DensityMatrix::from_pure(&[zero, zero, zero, one]).unwrap();
        let d: f64 = trace_distance(a.matrix(), b.matrix()).unwrap();
        assert!((d - 2.0).abs() < 1e-14);
    }

    #[test]
    fn noiseless_linear_inversion_reproduces_state_overlap() {
        // With exact probabilities the inversion returns the state itself,
        // so its fidelity equals <chi| tau |chi> = lambda + (1 - lambda)/4.
        use crate::estimators::linear_inversion;
        use crate::scenario::{build_joint_povm, BellScenario};
        use crate::simulation::born_probabilities;

        let design = build_joint_povm(&BellScenario::<f64>::canonical()).unwrap();
        for kind in TestStateKind::ALL {
            let tau = make_test_state::<f64>(kind);
            let ket = target_ket::<f64>(kind);
            let f = born_probabilities(&tau, &design);
            let est = linear_inversion(&f, &design).unwrap();
            let fid = fidelity_pure(&est.matrix, &ket).unwrap();
            let lambda = kind.noise_weight();
            let expected = lambda + (1.0 - lambda) / 4.0;
            assert!((fid - expected).abs() < 1e-12, "{kind}: {fid} vs {expected}");
        }
    }

    #[test]
    fn trace_distance_is_symmetric() {
        let a = make_test_state::<f64>(TestStateKind::Tau1);
        let b = make_test_state::<f64>(TestStateKind::Tau3);
        let d1 = trace_distance(a.matrix(), b.matrix()).unwrap();
        let d2 = trace_distance(b.matrix(), a.matrix()).unwrap();
        assert!((d1 - d2).abs() < 1e-14);
    }
}
