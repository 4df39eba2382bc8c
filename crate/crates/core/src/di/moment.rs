//! Symbolic structure of the 16x16 moment matrix and its quantum oracle.
//!
//! Cell (u, v) of the moment matrix holds the expectation of the canonical
//! reduction of `u^dagger v`. Reductions are grouped into variables, words
//! related by adjoints share one variable (with a conjugation flag), and
//! self-adjoint words give real variables. The index also exposes a flat
//! real coordinate vector (real part per variable, plus imaginary part for
//! the complex ones) together with per-coordinate sparsity patterns, which
//! is what the barrier solver differentiates through.

use std::collections::BTreeMap;

use num_complex::Complex;

use crate::di::monomial::{reduce_word, relaxation_basis, Monomial};
use crate::numerics::mat::{kron, ComplexMatrix};
use crate::scalar::Scalar;
use crate::scenario::{build_local_projector, Party};
use crate::simulation::DensityMatrix;

/// A matrix cell a coordinate feeds: (row, column, complex coefficient).
pub type CellCoefficient = (usize, usize, (f64, f64));

/// What a cell of the moment matrix refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellRef {
    /// The constant 1 at (identity, identity).
    One,
    /// Variable `id`, conjugated if `conj` is set.
    Var { id: usize, conj: bool },
}

/// One free moment.
#[derive(Debug, Clone)]
pub struct Variable {
    /// Canonical representative of the {w, w^dagger} class.
    pub word: Monomial,
    /// Self-adjoint words carry real moments.
    pub is_real: bool,
    /// Index of the real-part coordinate.
    pub re_coord: usize,
    /// Index of the imaginary-part coordinate (complex variables only).
    pub im_coord: Option<usize>,
}

/// Symbolic 16x16 moment matrix over the relaxation basis.
#[derive(Debug, Clone)]
pub struct MomentIndex {
    pub basis: Vec<Monomial>,
    /// Row-major cell references.
    cells: Vec<CellRef>,
    pub variables: Vec<Variable>,
    /// Total number of real coordinates.
    pub coord_count: usize,
    /// For each coordinate, the cells it feeds.
    supports: Vec<Vec<CellCoefficient>>,
    /// Coordinates of the probability moments <A_x>, <B_y>, <A_x B_y>.
    pub a_coords: [usize; 3],
    pub b_coords: [usize; 3],
    /// Row-major over (x, y).
    pub ab_coords: [usize; 9],
}

impl MomentIndex {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn cell(&self, row: usize, col: usize) -> CellRef {
        self.cells[row * self.basis.len() + col]
    }

    /// Assemble the numeric moment matrix from a coordinate vector.
    pub fn assemble<T: Scalar>(&self, coords: &[T]) -> ComplexMatrix<T> {
        debug_assert_eq!(coords.len(), self.coord_count);
        let n = self.dim();
        let mut m = ComplexMatrix::<T>::zeros(n, n);
        m[(0, 0)] = Complex::new(T::one(), T::zero());
        for (k, support) in self.supports.iter().enumerate() {
            let theta = coords[k];
            for &(i, j, (cre, cim)) in support {
                let coef = Complex::new(T::real(cre), T::real(cim));
                m[(i, j)] += coef * theta;
            }
        }
        m
    }

    /// Gradient of `-log det M` in coordinates: `-tr(M^{-1} H_k)` per
    /// coordinate `k`, given the inverse of the assembled matrix.
    pub fn barrier_gradient<T: Scalar>(&self, m_inv: &ComplexMatrix<T>, out: &mut [T]) {
        debug_assert_eq!(out.len(), self.coord_count);
        for (k, support) in self.supports.iter().enumerate() {
            let mut acc = T::zero();
            for &(i, j, (cre, cim)) in support {
                let coef = Complex::new(T::real(cre), T::real(cim));
                acc += (m_inv[(j, i)] * coef).re;
            }
            out[k] = -acc;
        }
    }

    /// Coordinates of the exact quantum moments of a state measured with the
    /// canonical projectors.
    pub fn coords_of_state<T: Scalar>(&self, rho: &DensityMatrix<T>) -> Vec<T> {
        let mut coords = vec![T::zero(); self.coord_count];
        for var in &self.variables {
            let op = word_operator::<T>(&var.word);
            let z = op.trace_product(rho.matrix());
            coords[var.re_coord] = z.re;
            if let Some(im) = var.im_coord {
                coords[im] = z.im;
            }
        }
        coords
    }

    /// Number of free variables (moment classes), excluding the constant.
    pub fn variable_count(&self) -> usize {
        self.variables.len()
    }
}

/// Build the symbolic index for the level `{1, A_x, B_y, A_x B_y}`.
pub fn build_moment_index() -> MomentIndex {
    let basis = relaxation_basis();
    let n = basis.len();
    let mut cells = vec![CellRef::One; n * n];
    let mut lookup: BTreeMap<Monomial, usize> = BTreeMap::new();
    let mut variables: Vec<Variable> = Vec::new();
    let mut coord_count = 0usize;

    for (i, u) in basis.iter().enumerate() {
        for (j, v) in basis.iter().enumerate() {
            let word = reduce_word(u, v);
            let cell = if word.is_identity() {
                CellRef::One
            } else {
                let adjoint = word.adjoint();
                let rep = if word <= adjoint {
                    word.clone()
                } else {
                    adjoint
                };
                let conj = rep != word;
                let id = *lookup.entry(rep.clone()).or_insert_with(|| {
                    let is_real = rep.is_self_adjoint();
                    let re_coord = coord_count;
                    coord_count += 1;
                    let im_coord = if is_real {
                        None
                    } else {
                        coord_count += 1;
                        Some(coord_count - 1)
                    };
                    variables.push(Variable {
                        word: rep.clone(),
                        is_real,
                        re_coord,
                        im_coord,
                    });
                    variables.len() - 1
                });
                CellRef::Var { id, conj }
            };
            cells[i * n + j] = cell;
        }
    }

    // Per-coordinate sparsity: the cell value is theta_re + i theta_im,
    // conjugated cells flip the sign of the imaginary coefficient.
    let mut supports = vec![Vec::new(); coord_count];
    for i in 0..n {
        for j in 0..n {
            if let CellRef::Var { id, conj } = cells[i * n + j] {
                let var = &variables[id];
                supports[var.re_coord].push((i, j, (1.0, 0.0)));
                if let Some(im) = var.im_coord {
                    let sign = if conj { -1.0 } else { 1.0 };
                    supports[im].push((i, j, (0.0, sign)));
                }
            }
        }
    }

    let coord_of = |word: &Monomial| -> usize {
        let id = lookup[word];
        variables[id].re_coord
    };
    let a_coords = [1, 2, 3].map(|x| coord_of(&Monomial::a(x)));
    let b_coords = [1, 2, 3].map(|y| coord_of(&Monomial::b(y)));
    let mut ab_coords = [0usize; 9];
    for x in 1..=3u8 {
        for y in 1..=3u8 {
            ab_coords[((x - 1) * 3 + (y - 1)) as usize] = coord_of(&Monomial::ab(x, y));
        }
    }

    MomentIndex {
        basis,
        cells,
        variables,
        coord_count,
        supports,
        a_coords,
        b_coords,
        ab_coords,
    }
}

/// The 4x4 operator of a word under the canonical measurements
/// `A_x = (1 + sigma_x)/2 (x) 1`, `B_y = 1 (x) (1 + sigma_y)/2`.
pub fn word_operator<T: Scalar>(word: &Monomial) -> ComplexMatrix<T> {
    let mut a_op = ComplexMatrix::<T>::identity(2);
    for &x in word.a_word() {
        let p = build_local_projector::<T>(Party::A, 0, x).expect("valid setting");
        a_op = a_op.matmul(&p);
    }
    let mut b_op = ComplexMatrix::<T>::identity(2);
    for &y in word.b_word() {
        let p = build_local_projector::<T>(Party::B, 0, y).expect("valid setting");
        b_op = b_op.matmul(&p);
    }
    kron(&a_op, &b_op)
}

/// Exact moment matrix of a quantum state under the canonical measurements,
/// evaluated cell by cell as `tr(rho op(u)^dagger op(v))` without any word
/// reduction. Serves as the independent oracle for the symbolic index.
pub fn quantum_moment_matrix<T: Scalar>(rho: &DensityMatrix<T>) -> ComplexMatrix<T> {
    let basis = relaxation_basis();
    let n = basis.len();
    let ops: Vec<ComplexMatrix<T>> = basis.iter().map(word_operator).collect();
    let mut m = ComplexMatrix::<T>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let prod = ops[i].adjoint().matmul(&ops[j]);
            m[(i, j)] = prod.trace_product(rho.matrix());
        }
    }
    m.hermitize()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::eig::hermitian_eig;
    use crate::numerics::rng::Prng;
    use crate::simulation::random_density_matrix;

    #[test]
    fn identity_cell_is_constant() {
        let index = build_moment_index();
        assert_eq!(index.cell(0, 0), CellRef::One);
        for i in 1..index.dim() {
            assert_ne!(index.cell(i, i), CellRef::One);
        }
    }

    #[test]
    fn idempotence_merges_cells() {
        // A1 * (A1 B2) reduces to A1 B2, so cell(A1, A1B2) must reference
        // the same variable as cell(1, A1B2), unconjugated.
        let index = build_moment_index();
        let row_a1 = 1; // basis order: 1, A1, A2, A3, B1..B3, A1B1, A1B2, ...
        let col_a1b2 = 8;
        assert_eq!(index.basis[row_a1], Monomial::a(1));
        assert_eq!(index.basis[col_a1b2], Monomial::ab(1, 2));
        let via_identity = index.cell(0, col_a1b2);
        let via_a1 = index.cell(row_a1, col_a1b2);
        assert_eq!(via_identity, via_a1);
        // The diagonal of a joint projector also carries its own moment.
        assert_eq!(index.cell(col_a1b2, col_a1b2), via_identity);
        // Same pattern for the single-party projectors.
        assert_eq!(index.cell(row_a1, row_a1), index.cell(0, row_a1));
        assert_eq!(index.cell(4, 4), index.cell(0, 4)); // B1
    }

    #[test]
    fn variable_census() {
        // 15 real probability moments plus the complex auxiliary classes:
        // 3 <A A'>, 3 <B B'>, 9 <A A' B>, 9 <A B B'>, 18 <A A' B B'>.
        let index = build_moment_index();
        let real = index.variables.iter().filter(|v| v.is_real).count();
        let complex = index.variables.len() - real;
        assert_eq!(real, 15);
        assert_eq!(complex, 42);
        assert_eq!(index.coord_count, 15 + 2 * 42);
    }

    #[test]
    fn assembled_matrix_is_hermitian_for_any_coordinates() {
        let index = build_moment_index();
        let mut rng = Prng::new(70);
        for _ in 0..10 {
            let coords: Vec<f64> = (0..index.coord_count)
                .map(|_| rng.next_f64() * 2.0 - 1.0)
                .collect();
            let m = index.assemble(&coords);
            assert!(
                m.hermitian_defect() == 0.0,
                "assembly must be exactly Hermitian"
            );
        }
    }

    #[test]
    fn assembly_matches_raw_operator_oracle() {
        let index = build_moment_index();
        let mut rng = Prng::new(71);
        for _ in 0..10 {
            let rho = random_density_matrix::<f64>(&mut rng);
            let assembled = index.assemble(&index.coords_of_state(&rho));
            let raw = quantum_moment_matrix(&rho);
            assert!((&assembled - &raw).max_abs() < 1e-12);
        }
    }

    #[test]
    fn maximally_mixed_moments() {
        // At rho = 1/4: <A_x> = 1/2 and <A_x B_y> = 1/4.
        let rho = DensityMatrix::<f64>::maximally_mixed();
        let m = quantum_moment_matrix(&rho);
        for col in 1..=3 {
            assert!((m[(0, col)].re - 0.5).abs() < 1e-14);
            assert!(m[(0, col)].im.abs() < 1e-14);
        }
        for col in 7..16 {
            assert!((m[(0, col)].re - 0.25).abs() < 1e-14);
        }
        // Strictly interior: the eigenvalue floor feeds the solver start.
        let eig = hermitian_eig(&m).unwrap();
        assert!(
            eig.min_eigenvalue() > 1e-3,
            "min eig {}",
            eig.min_eigenvalue()
        );
    }

    #[test]
    fn quantum_moment_matrices_are_positive() {
        let mut rng = Prng::new(72);
        for _ in 0..100 {
            let rho = random_density_matrix::<f64>(&mut rng);
            let m = quantum_moment_matrix(&rho);
            let eig = hermitian_eig(&m).unwrap();
            assert!(
                eig.min_eigenvalue() >= -1e-12,
                "moment matrix not PSD: {}",
                eig.min_eigenvalue()
            );
        }
    }
}
