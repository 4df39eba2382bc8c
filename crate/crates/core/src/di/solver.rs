//! Log-det barrier solver for the KL projection onto the moment relaxation.
//!
//! The problem is `min g(theta)` subject to `M(theta) > 0`, where `g` is the
//! input-weighted KL divergence between observed conditional frequencies and
//! the behavior encoded in `theta`, and `M` is the 16x16 moment matrix.
//! Path following minimizes `t g(theta) - log det M(theta)` for a growing
//! barrier weight `t`; each subproblem takes damped Newton steps on the
//! analytic merit Hessian with monotone Armijo backtracking, falling back
//! to steepest descent if the Hessian factorization ever fails.
//!
//! The subproblems are invariant under global conjugation of the moments
//! (which fixes the behavior and transposes `M`) and strictly convex, so
//! their minimizers have exactly real moments and the whole central path
//! lives in the real subspace. The inner iterations therefore run in real
//! symmetric arithmetic over one coordinate per variable; the assembled
//! complex moment matrix is still what feasibility is certified on.

use num_complex::Complex;

use crate::di::moment::{build_moment_index, CellRef, MomentIndex};
use crate::di::monomial::Monomial;
use crate::di::{conditional_from_moments, validate_input_distribution, Behavior};
use crate::error::{Error, Result};
use crate::numerics::eig::hermitian_eig;
use crate::scalar::Scalar;
use crate::simulation::DensityMatrix;

/// Armijo sufficient-decrease constant.
const ARMIJO_C: f64 = 1e-4;
/// Backtracking shrink factor.
const ARMIJO_SHRINK: f64 = 0.5;
/// Give up on a line search after this many shrinks.
const MAX_HALVINGS: usize = 200;

/// Barrier path-following parameters.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Stop once `dim / t` falls below this duality-gap proxy.
    pub gap_tol: f64,
    /// Inner gradient-norm target.
    pub inner_tol: f64,
    /// Initial barrier weight.
    pub t0: f64,
    /// Barrier weight multiplier between stages.
    pub t_factor: f64,
    /// Candidate-evaluation cap per stage.
    pub max_inner_iters: usize,
    /// Record the merit value of every accepted inner step, per stage.
    pub record_merit_trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            gap_tol: 1e-7,
            inner_tol: 1e-8,
            t0: 1.0,
            t_factor: 10.0,
            max_inner_iters: 5000,
            record_merit_trace: false,
        }
    }
}

/// Output of the regularization: the projected behavior plus feasibility
/// and optimality certificates.
#[derive(Debug, Clone)]
pub struct RegularizedBehavior<T> {
    pub behavior: Behavior<T>,
    /// The auxiliary moments that are not behavior probabilities.
    pub free_moments: Vec<(Monomial, Complex<T>)>,
    /// KL divergence between the input and the returned behavior.
    pub final_kl: T,
    /// Smallest eigenvalue of the final moment matrix.
    pub min_moment_eig: T,
    /// Barrier weight of the last stage solved.
    pub barrier_t_final: T,
    /// Largest merit change over accepted inner steps; negative when the
    /// descent was monotone throughout.
    pub max_merit_increase: T,
    /// Total accepted plus rejected inner iterations.
    pub inner_iterations: usize,
    /// Accepted merit values per barrier stage (when recording is on).
    pub merit_trace: Vec<Vec<T>>,
}

/// The optimization problem restricted to the real-moment subspace: one
/// coordinate per variable of the symbolic index.
struct Problem<'a, T> {
    index: &'a MomentIndex,
    dim: usize,
    nvars: usize,
    /// Cells of each variable, both triangles.
    supports: Vec<Vec<(usize, usize)>>,
    a_vars: [usize; 3],
    b_vars: [usize; 3],
    ab_vars: [usize; 9],
    f_cond: &'a [[T; 4]],
    f_xy: &'a [T],
}

impl<'a, T: Scalar> Problem<'a, T> {
    fn new(index: &'a MomentIndex, f_cond: &'a [[T; 4]], f_xy: &'a [T]) -> Self {
        let dim = index.dim();
        let nvars = index.variables.len();
        let mut supports = vec![Vec::new(); nvars];
        for i in 0..dim {
            for j in 0..dim {
                if let CellRef::Var { id, .. } = index.cell(i, j) {
                    supports[id].push((i, j));
                }
            }
        }
        let var_of_recoord = |re: usize| -> usize {
            index
                .variables
                .iter()
                .position(|v| v.re_coord == re)
                .expect("probability moment variable")
        };
        Self {
            index,
            dim,
            nvars,
            supports,
            a_vars: index.a_coords.map(var_of_recoord),
            b_vars: index.b_coords.map(var_of_recoord),
            ab_vars: index.ab_coords.map(var_of_recoord),
            f_cond,
            f_xy,
        }
    }

    /// Real moment coordinates of a state (imaginary parts are discarded;
    /// they vanish for the points the solver visits).
    fn coords_of_state(&self, rho: &DensityMatrix<T>) -> Vec<T> {
        let full = self.index.coords_of_state(rho);
        self.index
            .variables
            .iter()
            .map(|v| full[v.re_coord])
            .collect()
    }

    /// Expand real coordinates back to the full (re, im) coordinate vector.
    fn expand(&self, v: &[T]) -> Vec<T> {
        let mut full = vec![T::zero(); self.index.coord_count];
        for (var, &value) in self.index.variables.iter().zip(v) {
            full[var.re_coord] = value;
        }
        full
    }

    /// Assemble the real symmetric moment matrix, row-major.
    fn assemble(&self, v: &[T], out: &mut [T]) {
        out.fill(T::zero());
        out[0] = T::one();
        for (support, &value) in self.supports.iter().zip(v) {
            for &(i, j) in support {
                out[i * self.dim + j] += value;
            }
        }
    }

    fn block_probabilities(&self, v: &[T], s: usize) -> [T; 4] {
        let a = v[self.a_vars[s / 3]];
        let b = v[self.b_vars[s % 3]];
        let ab = v[self.ab_vars[s]];
        conditional_from_moments(a, b, ab)
    }

    /// The KL objective; infinite when a supported probability vanishes.
    fn divergence(&self, v: &[T]) -> T {
        let floor = T::real(1e-300);
        let mut total = T::zero();
        for s in 0..9 {
            let w = self.f_xy[s];
            if w == T::zero() {
                continue;
            }
            let p = self.block_probabilities(v, s);
            for (&f, &pk) in self.f_cond[s].iter().zip(&p) {
                if f > T::zero() {
                    if pk <= floor {
                        return T::infinity();
                    }
                    total += w * f * (f / pk).ln();
                }
            }
        }
        total
    }

    /// Full merit gradient: `t grad g - grad log det M`, with `m_inv` the
    /// inverse of the assembled matrix at `v`.
    fn merit_gradient(&self, v: &[T], t: T, m_inv: &[T], out: &mut [T]) {
        for (k, support) in self.supports.iter().enumerate() {
            let mut acc = T::zero();
            for &(i, j) in support {
                acc += m_inv[j * self.dim + i];
            }
            out[k] = -acc;
        }
        for s in 0..9 {
            let w = self.f_xy[s];
            if w == T::zero() {
                continue;
            }
            let p = self.block_probabilities(v, s);
            let mut r = [T::zero(); 4];
            for k in 0..4 {
                let f = self.f_cond[s][k];
                if f > T::zero() {
                    r[k] = w * f / p[k];
                }
            }
            out[self.ab_vars[s]] += t * (-r[0] + r[1] + r[2] - r[3]);
            out[self.a_vars[s / 3]] += t * (-r[1] + r[3]);
            out[self.b_vars[s % 3]] += t * (-r[2] + r[3]);
        }
    }

    /// Full merit Hessian `t Hess(g) + Hess(-log det M)` in the real
    /// coordinates, row-major `nvars x nvars`. The barrier block is
    /// `tr(M^-1 H_k M^-1 H_l)` over the indicator patterns; the divergence
    /// block follows from the affine probability map per setting block.
    fn merit_hessian(&self, v: &[T], t: T, m_inv: &[T], out: &mut [T]) {
        let n = self.dim;
        let nv = self.nvars;
        for k in 0..nv {
            for l in k..nv {
                let mut acc = T::zero();
                for &(i, j) in &self.supports[k] {
                    for &(p, q) in &self.supports[l] {
                        acc += m_inv[j * n + p] * m_inv[q * n + i];
                    }
                }
                out[k * nv + l] = acc;
                out[l * nv + k] = acc;
            }
        }
        // Jacobian rows of [p00, p01, p10, p11] with respect to
        // (m_ab, m_a, m_b) are (1,-1,-1,1), (0,1,0,-1), (0,0,1,-1).
        const JACOBIAN: [[f64; 4]; 3] = [
            [1.0, -1.0, -1.0, 1.0],
            [0.0, 1.0, 0.0, -1.0],
            [0.0, 0.0, 1.0, -1.0],
        ];
        for s in 0..9 {
            let w = self.f_xy[s];
            if w == T::zero() {
                continue;
            }
            let p = self.block_probabilities(v, s);
            let mut curvature = [T::zero(); 4];
            for k in 0..4 {
                let f = self.f_cond[s][k];
                if f > T::zero() {
                    curvature[k] = t * w * f / (p[k] * p[k]);
                }
            }
            let vars = [self.ab_vars[s], self.a_vars[s / 3], self.b_vars[s % 3]];
            for (r, &var_r) in vars.iter().enumerate() {
                for (c, &var_c) in vars.iter().enumerate() {
                    let mut acc = T::zero();
                    for k in 0..4 {
                        acc += curvature[k] * T::real(JACOBIAN[r][k] * JACOBIAN[c][k]);
                    }
                    out[var_r * nv + var_c] += acc;
                }
            }
        }
    }
}

/// In-place lower Cholesky of a real symmetric matrix; `None` when it is
/// not positive definite. Returns the log-determinant.
fn cholesky_real<T: Scalar>(m: &[T], n: usize, l: &mut [T]) -> Option<T> {
    l.copy_from_slice(m);
    let mut log_det = T::zero();
    for j in 0..n {
        let mut d = l[j * n + j];
        for k in 0..j {
            let v = l[j * n + k];
            d -= v * v;
        }
        if !(d > T::zero()) || !d.is_finite() {
            return None;
        }
        let djj = d.sqrt();
        log_det += djj.ln();
        l[j * n + j] = djj;
        for i in j + 1..n {
            let mut s = l[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / djj;
        }
    }
    // Zero the upper triangle so downstream loops can rely on it.
    for i in 0..n {
        for j in i + 1..n {
            l[i * n + j] = T::zero();
        }
    }
    Some(log_det + log_det)
}

/// Symmetric inverse from a lower Cholesky factor.
fn inverse_from_cholesky<T: Scalar>(l: &[T], n: usize, inv: &mut [T], work: &mut [T]) {
    for col in 0..n {
        // Forward solve L y = e_col.
        for i in 0..n {
            let mut s = if i == col { T::one() } else { T::zero() };
            for k in col..i {
                s -= l[i * n + k] * work[k];
            }
            work[i] = if i >= col {
                s / l[i * n + i]
            } else {
                T::zero()
            };
        }
        // Back solve L^T x = y.
        for i in (0..n).rev() {
            let mut s = work[i];
            for k in i + 1..n {
                s -= l[k * n + i] * inv[k * n + col];
            }
            inv[i * n + col] = s / l[i * n + i];
        }
    }
    // Exact symmetry keeps the gradient clean.
    for i in 0..n {
        for j in i + 1..n {
            let avg = (inv[i * n + j] + inv[j * n + i]) * T::real(0.5);
            inv[i * n + j] = avg;
            inv[j * n + i] = avg;
        }
    }
}

struct Workspace<T> {
    matrix: Vec<T>,
    factor: Vec<T>,
    inverse: Vec<T>,
    column: Vec<T>,
    candidate: Vec<T>,
    grad: Vec<T>,
    direction: Vec<T>,
    hessian: Vec<T>,
    hessian_factor: Vec<T>,
}

impl<T: Scalar> Workspace<T> {
    fn new(dim: usize, nvars: usize) -> Self {
        Self {
            matrix: vec![T::zero(); dim * dim],
            factor: vec![T::zero(); dim * dim],
            inverse: vec![T::zero(); dim * dim],
            column: vec![T::zero(); dim],
            candidate: vec![T::zero(); nvars],
            grad: vec![T::zero(); nvars],
            direction: vec![T::zero(); nvars],
            hessian: vec![T::zero(); nvars * nvars],
            hessian_factor: vec![T::zero(); nvars * nvars],
        }
    }
}

/// Solve `L L^T x = b` in place of `x` given the lower factor `L`.
fn cholesky_solve<T: Scalar>(l: &[T], n: usize, b: &[T], x: &mut [T]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in i + 1..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
}

/// Merit value at `v`, or `None` when `v` is infeasible. On success the
/// Cholesky factor of the assembled matrix is left in `factor`.
fn merit_value<T: Scalar>(
    problem: &Problem<T>,
    v: &[T],
    t: T,
    matrix: &mut [T],
    factor: &mut [T],
) -> Option<T> {
    problem.assemble(v, matrix);
    let log_det = cholesky_real(matrix, problem.dim, factor)?;
    let divergence = problem.divergence(v);
    if !divergence.is_finite() {
        return None;
    }
    let merit = t * divergence - log_det;
    merit.is_finite().then_some(merit)
}

fn norm2<T: Scalar>(v: &[T]) -> T {
    v.iter().map(|&x| x * x).sum::<T>().sqrt()
}

struct StageOutcome<T> {
    iterations: usize,
    max_merit_increase: T,
    trace: Vec<T>,
}

/// Minimize the merit at fixed `t`, updating `v` in place.
fn solve_stage<T: Scalar>(
    problem: &Problem<T>,
    v: &mut [T],
    t: T,
    config: &SolverConfig,
    ws: &mut Workspace<T>,
) -> Result<StageOutcome<T>> {
    let armijo_c = T::real(ARMIJO_C);
    let shrink = T::real(ARMIJO_SHRINK);
    let inner_tol = T::real(config.inner_tol);
    let n = problem.dim;

    let mut merit =
        merit_value(problem, v, t, &mut ws.matrix, &mut ws.factor).ok_or_else(|| {
            Error::InvalidArgument("barrier stage started from an infeasible point".into())
        })?;
    inverse_from_cholesky(&ws.factor, n, &mut ws.inverse, &mut ws.column);
    let mut grad = std::mem::take(&mut ws.grad);
    let mut direction = std::mem::take(&mut ws.direction);
    problem.merit_gradient(v, t, &ws.inverse, &mut grad);

    let mut trace = Vec::new();
    if config.record_merit_trace {
        trace.push(merit);
    }
    let mut max_merit_increase = T::neg_infinity();
    // Accepted improvements below the rounding resolution of the merit value
    // carry no information; a run of them means the stage is done.
    let mut unresolvable_streak = 0usize;

    let mut iterations = 0usize;
    'outer: while iterations < config.max_inner_iters {
        iterations += 1;
        let grad_norm = norm2(&grad);
        if grad_norm <= inner_tol {
            break;
        }

        // Damped Newton direction; the merit Hessian is positive definite,
        // so the solve only fails on rounding, where steepest descent is a
        // safe substitute.
        problem.merit_hessian(v, t, &ws.inverse, &mut ws.hessian);
        let newton_ok = cholesky_real(&ws.hessian, problem.nvars, &mut ws.hessian_factor)
            .map(|_| cholesky_solve(&ws.hessian_factor, problem.nvars, &grad, &mut direction))
            .is_some();
        let mut slope = T::zero();
        if newton_ok {
            for (d, &g) in direction.iter_mut().zip(grad.iter()) {
                *d = -*d;
                slope += *d * g;
            }
        }
        if !newton_ok || !(slope < T::zero()) {
            let scale = T::one() / T::one().max(grad_norm);
            slope = T::zero();
            for (d, &g) in direction.iter_mut().zip(grad.iter()) {
                *d = -g * scale;
                slope += *d * g;
            }
        }

        let mut alpha = T::one();
        let mut accepted: Option<(T, T)> = None;
        let mut feasible_seen = false;
        for _ in 0..=MAX_HALVINGS {
            for ((c, &x), &d) in ws.candidate.iter_mut().zip(v.iter()).zip(direction.iter()) {
                *c = x + alpha * d;
            }
            if let Some(cand_merit) =
                merit_value(problem, &ws.candidate, t, &mut ws.matrix, &mut ws.factor)
            {
                feasible_seen = true;
                if cand_merit <= merit + armijo_c * alpha * slope {
                    accepted = Some((cand_merit, alpha));
                    break;
                }
            }
            alpha *= shrink;
        }

        match accepted {
            Some((cand_merit, alpha_used)) => {
                let merit_change = cand_merit - merit;
                max_merit_increase = max_merit_increase.max(merit_change);
                if config.record_merit_trace {
                    trace.push(cand_merit);
                }
                let resolution = T::epsilon() * T::real(16.0) * (T::one() + merit.abs());
                if -merit_change <= resolution {
                    unresolvable_streak += 1;
                } else {
                    unresolvable_streak = 0;
                }

                // ws.factor still holds the accepted candidate's factor from
                // the line search.
                for (x, &d) in v.iter_mut().zip(direction.iter()) {
                    *x += alpha_used * d;
                }
                merit = cand_merit;
                inverse_from_cholesky(&ws.factor, n, &mut ws.inverse, &mut ws.column);
                problem.merit_gradient(v, t, &ws.inverse, &mut grad);
                if unresolvable_streak >= 3 {
                    break 'outer;
                }
            }
            None => {
                if !feasible_seen {
                    return Err(Error::SolverStall {
                        t: t.to_f64().unwrap_or(f64::NAN),
                        iter: iterations,
                        grad_norm: grad_norm.to_f64().unwrap_or(f64::NAN),
                        merit: merit.to_f64().unwrap_or(f64::NAN),
                    });
                }
                // Feasible candidates existed but none could beat the merit
                // by a resolvable margin: the stage is converged to floating
                // point precision.
                break;
            }
        }
    }

    ws.grad = grad;
    ws.direction = direction;
    Ok(StageOutcome {
        iterations,
        max_merit_increase,
        trace,
    })
}

/// KL projection of conditional frequencies onto the moment relaxation.
///
/// `f_cond` holds nine blocks `[f(00|xy), f(01|xy), f(10|xy), f(11|xy)]`
/// (row-major over settings), each summing to one; `f_xy` is the input
/// distribution weighting the per-setting divergences. The walk starts from
/// the exact moment matrix of the maximally mixed state, which is strictly
/// inside the cone.
pub fn regularize<T: Scalar>(
    f_cond: &[[T; 4]],
    f_xy: &[T],
    config: &SolverConfig,
) -> Result<RegularizedBehavior<T>> {
    if f_cond.len() != 9 {
        return Err(Error::DimensionMismatch {
            expected: 9,
            got: f_cond.len(),
        });
    }
    validate_input_distribution(f_xy)?;
    let tol = T::DISTRIBUTION_TOL;
    for (s, block) in f_cond.iter().enumerate() {
        if block.iter().any(|&f| f < T::zero()) {
            return Err(Error::InvalidArgument(format!(
                "conditional frequencies of setting block {s} contain negatives"
            )));
        }
        let sum: T = block.iter().copied().sum();
        if (sum - T::one()).abs() > tol {
            return Err(Error::InvalidArgument(format!(
                "conditional frequencies of setting block {s} sum to {sum}, expected 1"
            )));
        }
    }
    if !(config.t0 > 0.0) || !(config.t_factor > 1.0) || !(config.gap_tol > 0.0) {
        return Err(Error::InvalidArgument(
            "solver config requires t0 > 0, t_factor > 1 and gap_tol > 0".into(),
        ));
    }

    let index = build_moment_index();
    let problem = Problem::new(&index, f_cond, f_xy);
    let mut ws = Workspace::new(problem.dim, problem.nvars);

    let mut v = problem.coords_of_state(&DensityMatrix::<T>::maximally_mixed());
    let dim = T::real(index.dim() as f64);
    let gap_tol = T::real(config.gap_tol);
    let t_factor = T::real(config.t_factor);

    let mut t = T::real(config.t0);
    let mut inner_iterations = 0usize;
    let mut max_merit_increase = T::neg_infinity();
    let mut merit_trace = Vec::new();
    loop {
        let outcome = solve_stage(&problem, &mut v, t, config, &mut ws)?;
        inner_iterations += outcome.iterations;
        max_merit_increase = max_merit_increase.max(outcome.max_merit_increase);
        if config.record_merit_trace {
            merit_trace.push(outcome.trace);
        }
        if dim / t < gap_tol {
            break;
        }
        t *= t_factor;
    }

    let full_coords = problem.expand(&v);
    let final_matrix = index.assemble(&full_coords);
    let min_moment_eig = hermitian_eig(&final_matrix)?.min_eigenvalue();
    let behavior = Behavior::from_coords(&index, &full_coords);
    let final_kl = problem.divergence(&v);

    let prob_vars: Vec<usize> = problem
        .a_vars
        .iter()
        .chain(&problem.b_vars)
        .chain(&problem.ab_vars)
        .copied()
        .collect();
    let free_moments = index
        .variables
        .iter()
        .enumerate()
        .filter(|(k, _)| !prob_vars.contains(k))
        .map(|(k, var)| (var.word.clone(), Complex::new(v[k], T::zero())))
        .collect();

    Ok(RegularizedBehavior {
        behavior,
        free_moments,
        final_kl,
        min_moment_eig,
        barrier_t_final: t,
        max_merit_increase,
        inner_iterations,
        merit_trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::di::exact_conditional_input;
    use crate::numerics::rng::Prng;
    use crate::simulation::{make_test_state, random_density_matrix, TestStateKind};

    fn uniform_input() -> (Vec<[f64; 4]>, Vec<f64>) {
        (vec![[0.25; 4]; 9], vec![1.0 / 9.0; 9])
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let index = build_moment_index();
        let tau = make_test_state::<f64>(TestStateKind::Tau1);
        let (f_cond, f_xy) = exact_conditional_input(&tau);
        let problem = Problem::new(&index, &f_cond, &f_xy);
        let mut ws = Workspace::new(problem.dim, problem.nvars);
        // Probe around a strictly interior point.
        let coords = problem.coords_of_state(&DensityMatrix::<f64>::maximally_mixed());
        for &t in &[1.0, 100.0] {
            merit_value(&problem, &coords, t, &mut ws.matrix, &mut ws.factor).unwrap();
            inverse_from_cholesky(&ws.factor, problem.dim, &mut ws.inverse, &mut ws.column);
            let mut grad = vec![0.0; problem.nvars];
            problem.merit_gradient(&coords, t, &ws.inverse, &mut grad);
            let h = 1e-6;
            let mut rng = Prng::new(90);
            for _ in 0..25 {
                let k = (rng.next_u64() % problem.nvars as u64) as usize;
                let mut up = coords.clone();
                up[k] += h;
                let mut dn = coords.clone();
                dn[k] -= h;
                let fu = merit_value(&problem, &up, t, &mut ws.matrix, &mut ws.factor).unwrap();
                let fd = merit_value(&problem, &dn, t, &mut ws.matrix, &mut ws.factor).unwrap();
                let numeric = (fu - fd) / (2.0 * h);
                assert!(
                    (numeric - grad[k]).abs() <= 1e-4 * (1.0 + numeric.abs()),
                    "coordinate {k} at t={t}: analytic {} vs numeric {numeric}",
                    grad[k]
                );
            }
        }
    }

    #[test]
    fn real_cholesky_agrees_with_complex_route() {
        let index = build_moment_index();
        let mut rng = Prng::new(93);
        let rho = random_density_matrix::<f64>(&mut rng);
        let (f_cond, f_xy) = exact_conditional_input(&rho);
        let problem = Problem::new(&index, &f_cond, &f_xy);
        let v = problem.coords_of_state(&rho);

        let mut m = vec![0.0; 16 * 16];
        problem.assemble(&v, &mut m);
        let complex = index.assemble(&problem.expand(&v));
        for i in 0..16 {
            for j in 0..16 {
                assert!((complex[(i, j)].re - m[i * 16 + j]).abs() < 1e-14);
                assert!(complex[(i, j)].im.abs() < 1e-14);
            }
        }
        let mut l = vec![0.0; 16 * 16];
        let log_det = cholesky_real(&m, 16, &mut l).unwrap();
        let eig = hermitian_eig(&complex).unwrap();
        let expected: f64 = eig.values.iter().map(|x| x.ln()).sum();
        assert!((log_det - expected).abs() < 1e-9);
    }

    #[test]
    fn uniform_input_returns_uniform_behavior() {
        let (f_cond, f_xy) = uniform_input();
        let reg = regularize(&f_cond, &f_xy, &SolverConfig::default()).unwrap();
        assert!(reg.final_kl <= 1e-8, "final KL {}", reg.final_kl);
        for s in 0..9 {
            for p in reg.behavior.conditional_block(s) {
                assert!((p - 0.25).abs() < 1e-4, "P = {p}");
            }
        }
        assert!(reg.min_moment_eig > 0.0);
        assert!(reg.max_merit_increase <= 0.0);
    }

    #[test]
    fn exact_behavior_projects_onto_itself() {
        let tau = make_test_state::<f64>(TestStateKind::Tau2);
        let (f_cond, f_xy) = exact_conditional_input(&tau);
        let reg = regularize(&f_cond, &f_xy, &SolverConfig::default()).unwrap();
        assert!(reg.final_kl <= 1e-5, "final KL {}", reg.final_kl);
        for (s, block) in f_cond.iter().enumerate() {
            let got = reg.behavior.conditional_block(s);
            for (k, (&g, &f)) in got.iter().zip(block).enumerate() {
                assert!((g - f).abs() <= 1e-3, "block {s} entry {k}: {g} vs {f}");
            }
        }
    }

    #[test]
    fn exact_behaviors_of_random_states_are_feasible_points() {
        let mut rng = Prng::new(91);
        for _ in 0..5 {
            let rho = random_density_matrix::<f64>(&mut rng);
            let (f_cond, f_xy) = exact_conditional_input(&rho);
            let reg = regularize(&f_cond, &f_xy, &SolverConfig::default()).unwrap();
            assert!(reg.final_kl <= 1e-5, "final KL {}", reg.final_kl);
            assert!(reg.min_moment_eig >= -1e-9);
        }
    }

    #[test]
    fn output_blocks_are_exact_images_of_the_representation() {
        let (f_cond, f_xy) = uniform_input();
        let reg = regularize(&f_cond, &f_xy, &SolverConfig::default()).unwrap();
        let b = &reg.behavior;
        for s in 0..9 {
            let block = b.conditional_block(s);
            let again = conditional_from_moments(b.exp_a[s / 3], b.exp_b[s % 3], b.exp_ab[s]);
            assert_eq!(block, again);
        }
    }

    #[test]
    fn noisy_input_stays_monotone_and_feasible() {
        let tau = make_test_state::<f64>(TestStateKind::Tau2);
        let design =
            crate::scenario::build_joint_povm(&crate::scenario::BellScenario::canonical()).unwrap();
        let mut rng = Prng::new(94);
        for _ in 0..3 {
            let counts = crate::simulation::sample_counts(&mut rng, &tau, &design, 1000.0).unwrap();
            let (f_cond, f_xy) =
                crate::simulation::conditional_frequencies::<f64>(&counts).unwrap();
            let reg = regularize(&f_cond, &f_xy, &SolverConfig::default()).unwrap();
            assert!(reg.max_merit_increase <= 0.0);
            assert!(reg.min_moment_eig >= -1e-9);
            assert!(reg.final_kl >= 0.0);
            for s in 0..9 {
                for p in reg.behavior.conditional_block(s) {
                    assert!(p >= 1e-12, "behavior probability {p} left the interior");
                }
            }
        }
    }

    #[test]
    fn extreme_deterministic_input_stays_feasible() {
        // Perfectly correlated observed frequencies sit on the boundary of
        // the nonsignaling set; the projection must stay interior and finite.
        let mut f_cond = vec![[0.25; 4]; 9];
        for s in [0usize, 4, 8] {
            f_cond[s] = [1.0, 0.0, 0.0, 0.0];
        }
        let f_xy = vec![1.0 / 9.0; 9];
        let reg: RegularizedBehavior<f64> =
            regularize(&f_cond, &f_xy, &SolverConfig::default()).unwrap();
        assert!(reg.final_kl.is_finite() && reg.final_kl >= 0.0);
        assert!(reg.min_moment_eig > 0.0);
        for s in 0..9 {
            for p in reg.behavior.conditional_block(s) {
                assert!(p > 0.0 && p < 1.0, "P = {p}");
            }
        }
        assert!(reg.max_merit_increase <= 0.0);
    }

    #[test]
    fn tiny_sample_counts_still_regularize() {
        let design = crate::scenario::build_joint_povm(&crate::scenario::BellScenario::canonical())
            .unwrap();
        let tau = make_test_state::<f64>(TestStateKind::Tau2);
        let mut rng = Prng::new(95);
        let mut done = 0;
        while done < 3 {
            let counts =
                crate::simulation::sample_counts(&mut rng, &tau, &design, 30.0).unwrap();
            let Ok((f_cond, f_xy)) =
                crate::simulation::conditional_frequencies::<f64>(&counts)
            else {
                continue; // a setting pair saw no events; draw again
            };
            let reg: RegularizedBehavior<f64> =
                regularize(&f_cond, &f_xy, &SolverConfig::default()).unwrap();
            assert!(reg.final_kl.is_finite() && reg.final_kl >= 0.0);
            assert!(reg.min_moment_eig > 0.0);
            done += 1;
        }
    }

    #[test]
    fn rejects_malformed_inputs() {
        let (f_cond, f_xy) = uniform_input();
        let mut bad_cond = f_cond.clone();
        bad_cond[3] = [0.3, 0.3, 0.3, 0.3];
        assert!(regularize(&bad_cond, &f_xy, &SolverConfig::default()).is_err());
        let bad_xy = vec![0.5; 9];
        assert!(regularize(&f_cond, &bad_xy, &SolverConfig::default()).is_err());
        let bad_config = SolverConfig {
            t_factor: 0.5,
            ..SolverConfig::default()
        };
        assert!(regularize(&f_cond, &f_xy, &bad_config).is_err());
    }
}
