//! The 3-input / 2-output bipartite Bell scenario and its tomography designs.
//!
//! Each party measures one of three Pauli observables; folding the uniform
//! input distribution into the operators yields a 36-element joint POVM that
//! is tomographically complete for two qubits. A restricted 17-element
//! design (16 observed events plus one complement element) covers the case
//! where only a subset of events is recorded.

use crate::error::{Error, Result};
use crate::numerics::eig::hermitian_eig;
use crate::numerics::mat::{kron, ComplexMatrix, RealMatrix};
use crate::numerics::pinv::numerical_rank;
use crate::scalar::Scalar;

/// Party label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Party {
    A,
    B,
}

/// Measurement scenario: inputs per party, outputs per setting, and the
/// input distribution P(xy). Only the uniform 3x3x2x2 case is exercised.
#[derive(Debug, Clone)]
pub struct BellScenario<T> {
    pub inputs_per_party: usize,
    pub outputs_per_setting: usize,
    /// P(xy), row-major over (x, y), summing to one.
    pub input_distribution: Vec<T>,
}

impl<T: Scalar> BellScenario<T> {
    /// Two parties, three settings, two outcomes, inputs uniform at 1/9.
    pub fn canonical() -> Self {
        let p = T::one() / T::real(9.0);
        Self {
            inputs_per_party: 3,
            outputs_per_setting: 2,
            input_distribution: vec![p; 9],
        }
    }

    /// P(xy) for settings `x, y` in `1..=3`.
    pub fn input_prob(&self, x: usize, y: usize) -> T {
        self.input_distribution[(x - 1) * self.inputs_per_party + (y - 1)]
    }
}

/// Label attached to a POVM element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PovmLabel {
    /// Observed event (a, b, x, y).
    Event { a: u8, b: u8, x: u8, y: u8 },
    /// Identity minus the observed elements of a restricted design.
    Complement,
}

impl std::fmt::Display for PovmLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PovmLabel::Event { a, b, x, y } => write!(f, "({a},{b},{x},{y})"),
            PovmLabel::Complement => write!(f, "complement"),
        }
    }
}

/// Which of the two designs a table or vector refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DesignKind {
    Full,
    Partial,
}

impl std::fmt::Display for DesignKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DesignKind::Full => write!(f, "full"),
            DesignKind::Partial => write!(f, "partial"),
        }
    }
}

/// A tomography design: ordered POVM, Pauli basis and the linear map
/// between Pauli components and outcome probabilities.
#[derive(Debug, Clone)]
pub struct TomographyDesign<T> {
    pub kind: DesignKind,
    /// Ordered POVM elements with their labels.
    pub povm: Vec<(PovmLabel, ComplexMatrix<T>)>,
    /// The 16 two-qubit Pauli products, `basis[4j + k] = sigma_j x sigma_k`.
    pub pauli_basis: Vec<ComplexMatrix<T>>,
    /// `b[(mu, i)] = tr(M_mu Gamma_i) / 4`, one row per POVM element.
    pub b_matrix: RealMatrix<T>,
}

impl<T: Scalar> TomographyDesign<T> {
    pub fn len(&self) -> usize {
        self.povm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.povm.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = &PovmLabel> {
        self.povm.iter().map(|(l, _)| l)
    }

    pub fn position(&self, label: &PovmLabel) -> Option<usize> {
        self.povm.iter().position(|(l, _)| l == label)
    }
}

/// Observed-event bookkeeping for the restricted design.
#[derive(Debug, Clone)]
pub struct EventSubset<T> {
    /// Kept events, in design order.
    pub kept_events: Vec<PovmLabel>,
    /// Normalization subset whose POVM elements sum to `alpha * identity`.
    pub normalization_subset: Vec<PovmLabel>,
    pub alpha: T,
}

/// The four single-qubit Pauli matrices, `[identity, sigma_1, sigma_2, sigma_3]`.
pub fn pauli_matrices<T: Scalar>() -> [ComplexMatrix<T>; 4] {
    [
        ComplexMatrix::identity(2),
        ComplexMatrix::from_rows(&[vec![(0.0, 0.0), (1.0, 0.0)], vec![(1.0, 0.0), (0.0, 0.0)]]),
        ComplexMatrix::from_rows(&[vec![(0.0, 0.0), (0.0, -1.0)], vec![(0.0, 1.0), (0.0, 0.0)]]),
        ComplexMatrix::from_rows(&[vec![(1.0, 0.0), (0.0, 0.0)], vec![(0.0, 0.0), (-1.0, 0.0)]]),
    ]
}

/// Local projector `(1 + (-1)^a sigma_x) / 2` for outcome `a` of setting `x`.
///
/// The same construction serves both parties; the `party` argument only
/// validates intent at call sites.
pub fn build_local_projector<T: Scalar>(
    _party: Party,
    outcome: u8,
    setting: u8,
) -> Result<ComplexMatrix<T>> {
    if outcome > 1 {
        return Err(Error::InvalidArgument(format!(
            "outcome must be 0 or 1, got {outcome}"
        )));
    }
    if !(1..=3).contains(&setting) {
        return Err(Error::InvalidArgument(format!(
            "setting must be 1..=3, got {setting}"
        )));
    }
    let paulis = pauli_matrices::<T>();
    let sign = if outcome == 0 { T::one() } else { -T::one() };
    let half = T::real(0.5);
    Ok((&ComplexMatrix::identity(2) + &paulis[setting as usize].scale_real(sign)).scale_real(half))
}

/// The 16 products `sigma_j x sigma_k`, flattened as `i = 4j + k`.
pub fn build_pauli_basis<T: Scalar>() -> Vec<ComplexMatrix<T>> {
    let paulis = pauli_matrices::<T>();
    let mut basis = Vec::with_capacity(16);
    for j in 0..4 {
        for k in 0..4 {
            basis.push(kron(&paulis[j], &paulis[k]));
        }
    }
    basis
}

fn b_matrix_for<T: Scalar>(
    povm: &[(PovmLabel, ComplexMatrix<T>)],
    basis: &[ComplexMatrix<T>],
) -> RealMatrix<T> {
    let quarter = T::real(0.25);
    let mut b = RealMatrix::zeros(povm.len(), basis.len());
    for (mu, (_, m)) in povm.iter().enumerate() {
        for (i, gamma) in basis.iter().enumerate() {
            b[(mu, i)] = m.trace_product(gamma).re * quarter;
        }
    }
    b
}

fn check_povm<T: Scalar>(povm: &[(PovmLabel, ComplexMatrix<T>)]) -> Result<()> {
    let tol = T::STRUCTURAL_TOL;
    let mut sum = ComplexMatrix::<T>::zeros(4, 4);
    for (label, m) in povm {
        let eig = hermitian_eig(m)?;
        if eig.min_eigenvalue() < -tol {
            return Err(Error::InvalidArgument(format!(
                "POVM element {label} is not positive semidefinite (min eigenvalue {:e})",
                eig.min_eigenvalue()
            )));
        }
        sum = &sum + m;
    }
    let defect = (&sum - &ComplexMatrix::identity(4)).max_abs();
    if defect > tol {
        return Err(Error::InvalidArgument(format!(
            "POVM does not sum to the identity (defect {defect:e})"
        )));
    }
    Ok(())
}

/// Full 36-element joint design `M_abxy = P(xy) (M^A_a|x x M^B_b|y)`,
/// ordered by (x, y, a, b).
pub fn build_joint_povm<T: Scalar>(scenario: &BellScenario<T>) -> Result<TomographyDesign<T>> {
    let mut povm = Vec::with_capacity(36);
    for x in 1..=3u8 {
        for y in 1..=3u8 {
            let pxy = scenario.input_prob(x as usize, y as usize);
            for a in 0..2u8 {
                for b in 0..2u8 {
                    let ma = build_local_projector::<T>(Party::A, a, x)?;
                    let mb = build_local_projector::<T>(Party::B, b, y)?;
                    let m = kron(&ma, &mb).scale_real(pxy);
                    povm.push((PovmLabel::Event { a, b, x, y }, m));
                }
            }
        }
    }
    check_povm(&povm)?;
    let pauli_basis = build_pauli_basis::<T>();
    let b_matrix = b_matrix_for(&povm, &pauli_basis);
    Ok(TomographyDesign {
        kind: DesignKind::Full,
        povm,
        pauli_basis,
        b_matrix,
    })
}

/// Per-party observed (outcome, setting) pairs of the restricted design:
/// both outcomes of setting 1, outcome 0 of settings 2 and 3.
const KEPT_LOCAL: [(u8, u8); 4] = [(0, 1), (1, 1), (0, 2), (0, 3)];

/// Restricted design: the 16 kept events (product of the per-party pairs)
/// plus a complement element, together with the normalization subset
/// `J = {(a, b, 1, 1)}` whose POVM elements sum to `alpha * identity`.
pub fn build_partial_design<T: Scalar>(
    scenario: &BellScenario<T>,
) -> Result<(TomographyDesign<T>, EventSubset<T>)> {
    let tol = T::STRUCTURAL_TOL;

    let mut kept: Vec<(PovmLabel, ComplexMatrix<T>)> = Vec::with_capacity(16);
    for x in 1..=3u8 {
        for y in 1..=3u8 {
            let pxy = scenario.input_prob(x as usize, y as usize);
            for a in 0..2u8 {
                for b in 0..2u8 {
                    if KEPT_LOCAL.contains(&(a, x)) && KEPT_LOCAL.contains(&(b, y)) {
                        let ma = build_local_projector::<T>(Party::A, a, x)?;
                        let mb = build_local_projector::<T>(Party::B, b, y)?;
                        let m = kron(&ma, &mb).scale_real(pxy);
                        kept.push((PovmLabel::Event { a, b, x, y }, m));
                    }
                }
            }
        }
    }
    debug_assert_eq!(kept.len(), 16);

    // Normalization subset: all four outcomes of the complete setting (1, 1).
    let normalization_subset: Vec<PovmLabel> = kept
        .iter()
        .filter(|(l, _)| matches!(l, PovmLabel::Event { x: 1, y: 1, .. }))
        .map(|(l, _)| *l)
        .collect();
    let mut m_norm = ComplexMatrix::<T>::zeros(4, 4);
    for (label, m) in &kept {
        if normalization_subset.contains(label) {
            m_norm = &m_norm + m;
        }
    }
    let alpha = m_norm.trace().re / T::real(4.0);
    let defect = (&m_norm - &ComplexMatrix::identity(4).scale_real(alpha)).max_abs();
    if defect > tol {
        return Err(Error::InvalidArgument(format!(
            "normalization subset does not sum to alpha * identity (defect {defect:e})"
        )));
    }

    let mut sum_kept = ComplexMatrix::<T>::zeros(4, 4);
    for (_, m) in &kept {
        sum_kept = &sum_kept + m;
    }
    let complement = &ComplexMatrix::identity(4) - &sum_kept;

    let kept_events: Vec<PovmLabel> = kept.iter().map(|(l, _)| *l).collect();
    let mut povm = kept;
    povm.push((PovmLabel::Complement, complement));
    check_povm(&povm)?;

    let pauli_basis = build_pauli_basis::<T>();
    let b_matrix = b_matrix_for(&povm, &pauli_basis);
    let rank = numerical_rank(&b_matrix, T::real(1e-10))?;
    if rank != 16 {
        return Err(Error::RankDeficient(rank, 16));
    }

    Ok((
        TomographyDesign {
            kind: DesignKind::Partial,
            povm,
            pauli_basis,
            b_matrix,
        },
        EventSubset {
            kept_events,
            normalization_subset,
            alpha,
        },
    ))
}
