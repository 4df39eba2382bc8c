//! Device-independent regularization.
//!
//! Conditional frequencies are projected onto the moment-matrix relaxation
//! of the quantum set at the level `{1, A_x, B_y, A_x B_y}` by minimizing
//! the KL divergence, then lifted back to an unconditional distribution
//! that feeds the ordinary maximum-likelihood stage.

pub mod moment;
pub mod monomial;
pub mod solver;

use crate::error::{Error, Result};
use crate::estimators::{mle_estimate, MleConfig, MleResult};
use crate::scalar::Scalar;
use crate::scenario::TomographyDesign;
use crate::simulation::{conditional_frequencies, CountTable, DensityMatrix};

pub use moment::{build_moment_index, quantum_moment_matrix, MomentIndex};
pub use monomial::{reduce_word, relaxation_basis, Monomial};
pub use solver::{regularize, RegularizedBehavior, SolverConfig};

/// A nonsignaling behavior in its minimal parametrization: the outcome-0
/// marginals `<A_x>`, `<B_y>` and the joint moments `<A_x B_y>`.
///
/// Normalization and nonsignaling hold by construction: the conditional
/// table is an affine image of these fifteen numbers, and the marginals are
/// read straight from the representation without ever consulting the other
/// party's setting.
#[derive(Debug, Clone, PartialEq)]
pub struct Behavior<T> {
    pub exp_a: [T; 3],
    pub exp_b: [T; 3],
    /// Row-major over (x, y).
    pub exp_ab: [T; 9],
}

impl<T: Scalar> Behavior<T> {
    /// The uniformly random behavior, P(ab|xy) = 1/4.
    pub fn uniform() -> Self {
        let half = T::real(0.5);
        let quarter = T::real(0.25);
        Self {
            exp_a: [half; 3],
            exp_b: [half; 3],
            exp_ab: [quarter; 9],
        }
    }

    /// Exact behavior of a state under the canonical projective measurements.
    pub fn from_state(rho: &DensityMatrix<T>) -> Self {
        let index = build_moment_index();
        let coords = index.coords_of_state(rho);
        Self::from_coords(&index, &coords)
    }

    pub(crate) fn from_coords(index: &MomentIndex, coords: &[T]) -> Self {
        Self {
            exp_a: index.a_coords.map(|c| coords[c]),
            exp_b: index.b_coords.map(|c| coords[c]),
            exp_ab: index.ab_coords.map(|c| coords[c]),
        }
    }

    /// P(a = 0 | x), independent of y by construction.
    pub fn marginal_a(&self, x: u8) -> T {
        self.exp_a[(x - 1) as usize]
    }

    /// P(b = 0 | y), independent of x by construction.
    pub fn marginal_b(&self, y: u8) -> T {
        self.exp_b[(y - 1) as usize]
    }

    /// The conditional probabilities for the setting block `s = 3(x-1)+(y-1)`,
    /// ordered `[P(00|xy), P(01|xy), P(10|xy), P(11|xy)]`.
    pub fn conditional_block(&self, s: usize) -> [T; 4] {
        let a = self.exp_a[s / 3];
        let b = self.exp_b[s % 3];
        let ab = self.exp_ab[s];
        conditional_from_moments(a, b, ab)
    }

    /// The full 36-entry conditional table, nine blocks of four.
    pub fn conditional_table(&self) -> Vec<[T; 4]> {
        (0..9).map(|s| self.conditional_block(s)).collect()
    }
}

/// The affine map from (marginals, joint moment) to a conditional block.
/// Every materialization of behavior probabilities goes through this one
/// function so tables are bit-for-bit images of the representation.
#[inline]
pub(crate) fn conditional_from_moments<T: Scalar>(a: T, b: T, ab: T) -> [T; 4] {
    [ab, a - ab, b - ab, ((T::one() - a) - b) + ab]
}

/// Multiply a conditional behavior back with the input frequencies:
/// `P_uncond(abxy) = P(ab|xy) f(xy)`, ordered like the full design's POVM.
pub fn lift_to_joint<T: Scalar>(behavior: &Behavior<T>, f_xy: &[T]) -> Result<Vec<T>> {
    validate_input_distribution(f_xy)?;
    let mut out = Vec::with_capacity(36);
    for (s, &w) in f_xy.iter().enumerate() {
        let block = behavior.conditional_block(s);
        for p in block {
            out.push(p * w);
        }
    }
    Ok(out)
}

pub(crate) fn validate_input_distribution<T: Scalar>(f_xy: &[T]) -> Result<()> {
    if f_xy.len() != 9 {
        return Err(Error::DimensionMismatch {
            expected: 9,
            got: f_xy.len(),
        });
    }
    if f_xy.iter().any(|&w| w < T::zero()) {
        return Err(Error::InvalidArgument(
            "input frequencies must be nonnegative".into(),
        ));
    }
    let sum: T = f_xy.iter().copied().sum();
    if (sum - T::one()).abs() > T::DISTRIBUTION_TOL {
        return Err(Error::InvalidArgument(format!(
            "input frequencies must sum to 1, got {sum}"
        )));
    }
    Ok(())
}

/// The full hybrid pipeline on a full-design count table: conditional
/// frequencies, device-independent regularization, lift, then the usual
/// maximum-likelihood stage against the trusted measurements.
pub fn hybrid_estimate<T: Scalar>(
    counts: &CountTable,
    design: &TomographyDesign<T>,
    solver_config: &SolverConfig,
    mle_config: &MleConfig,
) -> Result<(MleResult<T>, RegularizedBehavior<T>)> {
    let (f_cond, f_xy) = conditional_frequencies::<T>(counts)?;
    let reg = regularize(&f_cond, &f_xy, solver_config)?;
    let lifted = lift_to_joint(&reg.behavior, &f_xy)?;
    let mle = mle_estimate(&lifted, design, mle_config)?;
    Ok((mle, reg))
}

/// Helper shared by tests and diagnostics: the exact conditional behavior of
/// a state as nine probability blocks, plus the uniform input distribution.
pub fn exact_conditional_input<T: Scalar>(rho: &DensityMatrix<T>) -> (Vec<[T; 4]>, Vec<T>) {
    let behavior = Behavior::from_state(rho);
    let ninth = T::one() / T::real(9.0);
    (behavior.conditional_table(), vec![ninth; 9])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::{make_test_state, TestStateKind};

    #[test]
    fn uniform_behavior_blocks() {
        let u = Behavior::<f64>::uniform();
        for s in 0..9 {
            for p in u.conditional_block(s) {
                assert!((p - 0.25).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn conditional_blocks_are_normalized_and_nonnegative_for_states() {
        for kind in TestStateKind::ALL {
            let tau = make_test_state::<f64>(kind);
            let b = Behavior::from_state(&tau);
            for s in 0..9 {
                let block = b.conditional_block(s);
                let sum: f64 = block.iter().sum();
                assert!((sum - 1.0).abs() < 1e-12);
                assert!(block.iter().all(|&p| p > -1e-12));
            }
        }
    }

    #[test]
    fn behavior_of_bell_state_has_perfect_correlations() {
        // For |psi> = (|00> + |11>)/sqrt(2) measured along sigma_3 x sigma_3,
        // outcomes agree: P(00|33) = P(11|33) = 1/2.
        let psi = crate::simulation::target_ket::<f64>(TestStateKind::Tau2);
        let rho = DensityMatrix::from_pure(&psi).unwrap();
        let b = Behavior::from_state(&rho);
        let block = b.conditional_block(8); // (x, y) = (3, 3)
        assert!((block[0] - 0.5).abs() < 1e-14);
        assert!(block[1].abs() < 1e-14);
        assert!(block[2].abs() < 1e-14);
        assert!((block[3] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn lift_uniform_behavior_uniform_inputs() {
        let lifted = lift_to_joint(&Behavior::<f64>::uniform(), &[1.0 / 9.0; 9]).unwrap();
        assert_eq!(lifted.len(), 36);
        for p in &lifted {
            assert!((p - 1.0 / 36.0).abs() < 1e-15);
        }
    }

    #[test]
    fn lift_preserves_input_marginals_exactly() {
        let tau = make_test_state::<f64>(TestStateKind::Tau3);
        let behavior = Behavior::from_state(&tau);
        let mut f_xy = vec![0.0; 9];
        // A lopsided but normalized input distribution.
        let weights = [1.0, 2.0, 3.0, 1.0, 1.0, 2.0, 4.0, 1.0, 3.0];
        let total: f64 = weights.iter().sum();
        for (w, out) in weights.iter().zip(f_xy.iter_mut()) {
            *out = w / total;
        }
        let lifted = lift_to_joint(&behavior, &f_xy).unwrap();
        let total: f64 = lifted.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        for s in 0..9 {
            let marginal: f64 = lifted[4 * s..4 * s + 4].iter().sum();
            // sum_ab P(ab|xy) f(xy): the block sums to f(xy) up to rounding
            // of the affine identity.
            assert!((marginal - f_xy[s]).abs() < 1e-15);
        }
    }

    #[test]
    fn lift_rejects_bad_inputs() {
        let b = Behavior::<f64>::uniform();
        assert!(lift_to_joint(&b, &[0.2; 9]).is_err());
        assert!(lift_to_joint(&b, &[1.0 / 8.0; 8]).is_err());
    }

    #[test]
    fn hybrid_recovers_state_from_effectively_noiseless_counts() {
        // Counts proportional to the exact probabilities at enormous N make
        // every stage operate in its noiseless regime.
        use crate::estimators::MleConfig;
        use crate::numerics::eig::trace_norm;
        use crate::scenario::{build_joint_povm, BellScenario, DesignKind, PovmLabel};
        use crate::simulation::{born_probabilities, CountTable};

        let design = build_joint_povm(&BellScenario::<f64>::canonical()).unwrap();
        let tau = make_test_state::<f64>(TestStateKind::Tau2);
        let probs = born_probabilities(&tau, &design);
        let mut counts = std::collections::BTreeMap::new();
        for ((label, _), p) in design.povm.iter().zip(&probs) {
            if let PovmLabel::Event { a, b, x, y } = *label {
                counts.insert((a, b, x, y), (1e9 * p).round() as u64);
            }
        }
        let table = CountTable {
            kind: DesignKind::Full,
            counts,
        };
        let (mle, reg) = hybrid_estimate(
            &table,
            &design,
            &SolverConfig::default(),
            &MleConfig::default(),
        )
        .unwrap();
        assert!(reg.final_kl < 1e-5);
        let dist = trace_norm(&(mle.state.matrix() - tau.matrix())).unwrap();
        assert!(dist <= 1e-3, "hybrid distance {dist}");
        assert!(mle.state.min_eigenvalue().unwrap() >= -1e-10);
    }
}
